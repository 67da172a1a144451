#include "revmine/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <unordered_map>

#include "revmine/errors.hpp"

namespace revmine {

using nlohmann::json;

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

template <typename Positive>
ConfusionMatrix tally(const ReviewCorpus& gold, Positive&& predicted_positive) {
  ConfusionMatrix cm;
  for (const Review& r : gold.reviews) {
    if (!r.gold_label) throw ValidationError("review " + r.id + " has no gold label");
    const bool actual = *r.gold_label == GoldLabel::privacy;
    const bool predicted = predicted_positive(r);
    if (actual && predicted) ++cm.tp;
    else if (actual) ++cm.fn;
    else if (predicted) ++cm.fp;
    else ++cm.tn;
  }
  return cm;
}

}  // namespace

double f1_score(double precision, double recall) {
  const double sum = precision + recall;
  return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
  return metrics_from_pr(ratio(cm.tp, cm.tp + cm.fp), ratio(cm.tp, cm.tp + cm.fn));
}

MetricsReport metrics_from_pr(double precision, double recall) {
  return {precision, recall, f1_score(precision, recall)};
}

ConfusionMatrix confusion_from_nli(const ReviewCorpus& gold, const PseudoLabeledCorpus& pseudo) {
  std::unordered_map<std::string_view, PseudoLabel> by_id;
  for (std::size_t i = 0; i < pseudo.size(); ++i) by_id[pseudo.review_ids[i]] = pseudo.labels[i];
  return tally(gold, [&](const Review& r) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) throw ValidationError("gold review " + r.id + " has no pseudo label");
    return it->second == PseudoLabel::maybe_privacy;
  });
}

ConfusionMatrix confusion_from_llm(const ReviewCorpus& gold, std::span<const VoteRecord> decisions) {
  std::unordered_map<std::string_view, BinaryLabel> by_id;
  for (const VoteRecord& v : decisions) by_id[v.review_id] = v.decision;
  return tally(gold, [&](const Review& r) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) throw ValidationError("gold review " + r.id + " has no LLM decision");
    return it->second == BinaryLabel::yes;
  });
}

MetricsReport random_baseline(std::size_t n_pos, std::size_t n_total) {
  if (n_total == 0 || n_pos == 0 || n_pos > n_total) {
    throw ValidationError("random baseline needs 0 < n_pos <= n_total, got " +
                          std::to_string(n_pos) + "/" + std::to_string(n_total));
  }
  return metrics_from_pr(ratio(n_pos, n_total), 0.5);
}

KappaReport cohen_kappa(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw ValidationError("kappa: label vectors differ in length (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw ValidationError("kappa: no labels");
  KappaReport report;
  std::size_t agree = 0, a_pos = 0, b_pos = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] != 0 && a[i] != 1) || (b[i] != 0 && b[i] != 1)) {
      throw ValidationError("kappa: labels must be 0 or 1");
    }
    if (a[i] == b[i]) ++agree;
    else report.disagreements.push_back(i);
    a_pos += static_cast<std::size_t>(a[i]);
    b_pos += static_cast<std::size_t>(b[i]);
  }
  const double n = static_cast<double>(a.size());
  const double pa = static_cast<double>(a_pos) / n;
  const double pb = static_cast<double>(b_pos) / n;
  report.observed = static_cast<double>(agree) / n;
  report.expected = pa * pb + (1.0 - pa) * (1.0 - pb);
  report.kappa = report.expected >= 1.0
                     ? 1.0
                     : (report.observed - report.expected) / (1.0 - report.expected);
  return report;
}

json to_json(const KappaReport& report, std::span<const std::string> ids) {
  json dis = json::array();
  for (std::size_t i : report.disagreements) {
    if (i < ids.size()) dis.push_back(ids[i]);
    else dis.push_back(i);
  }
  return json{{"kappa", report.kappa},
              {"p_o", report.observed},
              {"p_e", report.expected},
              {"disagreements", dis}};
}

const ComparisonRow& ComparisonTable::row(std::string_view id) const {
  for (const ComparisonRow& r : rows) {
    if (r.id == id) return r;
  }
  throw ValidationError("no candidate named \"" + std::string(id) + "\"");
}

ComparisonTable select_best(std::span<const Candidate> candidates, std::string_view baseline_id) {
  if (candidates.empty()) throw ValidationError("select_best needs at least one candidate");
  ComparisonTable table;
  table.baseline = baseline_id.empty() ? candidates.front().id : std::string(baseline_id);
  auto base = std::find_if(candidates.begin(), candidates.end(),
                           [&](const Candidate& c) { return c.id == table.baseline; });
  if (base == candidates.end()) {
    throw ValidationError("baseline \"" + table.baseline + "\" is not among the candidates");
  }

  const Candidate* best = &candidates.front();
  for (const Candidate& c : candidates) {
    ComparisonRow row{c.id, c.metrics, std::nullopt};
    if (base->metrics.f1 > 0.0) row.improvement = c.metrics.f1 / base->metrics.f1;
    table.rows.push_back(std::move(row));

    const auto& bm = best->metrics;
    const bool better =
        c.metrics.f1 > bm.f1 ||
        (c.metrics.f1 == bm.f1 &&
         (c.metrics.precision > bm.precision ||
          (c.metrics.precision == bm.precision && c.id < best->id)));
    if (better) best = &c;
  }
  table.winner = best->id;
  return table;
}

json to_json(const MetricsReport& m) {
  return json{{"p", m.precision}, {"r", m.recall}, {"f1", m.f1}};
}

json to_json(const ConfusionMatrix& cm) {
  return json{{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}};
}

json to_json(const ComparisonTable& table) {
  json rows = json::array();
  for (const ComparisonRow& r : table.rows) {
    json row = to_json(r.metrics);
    row["id"] = r.id;
    row["improvement"] = r.improvement ? json(*r.improvement) : json(nullptr);
    rows.push_back(std::move(row));
  }
  return json{{"candidates", rows}, {"winner", table.winner}, {"baseline", table.baseline}};
}

std::string format_table(const ComparisonTable& table) {
  std::size_t width = 9;
  for (const ComparisonRow& r : table.rows) width = std::max(width, r.id.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %5s  %5s  %5s  %s\n", static_cast<int>(width), "candidate",
                "P", "R", "F1", "improvement");
  out += buf;
  for (const ComparisonRow& r : table.rows) {
    std::string imp = "-";
    if (r.id != table.baseline && r.improvement) {
      std::snprintf(buf, sizeof buf, "%.2fx", *r.improvement);
      imp = buf;
    }
    std::snprintf(buf, sizeof buf, "%-*s  %5.2f  %5.2f  %5.2f  %s%s\n", static_cast<int>(width),
                  r.id.c_str(), r.metrics.precision, r.metrics.recall, r.metrics.f1, imp.c_str(),
                  r.id == table.winner ? "  *" : "");
    out += buf;
  }
  return out;
}

}  // namespace revmine
