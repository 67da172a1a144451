// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// gating criterion fails. Criterion 9 talks to a live NLI service and only
// runs when REVMINE_NLI_SMOKE_ENDPOINT is set; it never gates.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "reported.hpp"
#include "revmine/pipeline.hpp"
#include "revmine/util.hpp"

using namespace revmine;

namespace {

using Clock = std::chrono::steady_clock;

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void report(int n, const std::string& title, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = Clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.detail << " [exception: " << e.what() << "]";
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!c.ok) ++failures;
  std::printf("%s criterion %d: %s%s (%.2fs)\n", c.ok ? "PASS" : "FAIL", n, title.c_str(), c.detail.str().c_str(),
              secs);
  std::fflush(stdout);
}

bool near(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void criterion_1(Check& c) {
  auto m = random_baseline(reported::llm_eval_positives, reported::llm_eval_total);
  c.detail << " P=" << fmt(m.precision) << " R=" << fmt(m.recall) << " F1=" << fmt(m.f1);
  c.expect(near(m.precision, 0.387, 0.005), "P = 0.387 +- 0.005");
  c.expect(m.recall == 0.5, "R = 0.5");
  c.expect(near(m.f1, 0.43, 0.01), "F1 = 0.43 +- 0.01");
}

void criterion_2(Check& c) {
  std::size_t rows = 0;
  auto check = [&](const auto& table) {
    for (const auto& r : table) {
      ++rows;
      const double f1 = f1_score(r.precision, r.recall);
      c.expect(near(f1, r.f1, 0.01), std::string(r.id) + " F1 " + fmt(f1) + " vs " + fmt(r.f1));
    }
  };
  check(reported::nli_models);
  check(reported::hypothesis_sets);
  check(reported::llm_models);
  c.expect(metrics(ConfusionMatrix{0, 0, 962, 414}).f1 == 0.0, "0/0 row gives 0");
  c.detail << " " << rows << " rows";
}

void criterion_3(Check& c) {
  std::vector<Candidate> models;
  for (const auto& r : reported::nli_models) models.push_back({std::string(r.id), {r.precision, r.recall, r.f1}});
  const auto t1 = select_best(models);
  c.expect(t1.winner == "DeBERTa-v3-base-mnli-fever-anli", "model winner " + t1.winner);

  std::vector<Candidate> sets{{"generic", {0.34, 0.93, 0.50}}, {"domain", {0.39, 0.86, 0.54}}};
  const auto t2 = select_best(sets, "generic");
  const double r2 = t2.row("domain").improvement.value_or(0.0);
  c.expect(t2.winner == "domain", "set winner " + t2.winner);
  c.expect(near(r2, 1.08, 0.01), "domain ratio 1.08 +- 0.01");

  std::vector<Candidate> llm{{"RC", {0.38, 0.5, 0.43}}, {"Llama-3.1", {0.72, 0.92, 0.81}}};
  const auto t3 = select_best(llm, "RC");
  const double r3 = t3.row("Llama-3.1").improvement.value_or(0.0);
  c.expect(near(r3, 1.88, 0.05), "LLM ratio 1.88 +- 0.05");
  c.detail << " winner=" << t1.winner << " domain=" << fmt(r2) << "x llama=" << fmt(r3) << "x";
}

void criterion_4(Check& c) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(4242);
  std::size_t rows_checked = 0, mismatches = 0;
  for (const HypothesisSet* set : {&builtin_generic(), &builtin_domain_mh()}) {
    for (int m = 0; m < 1000; ++m) {
      EntailmentMatrix mat;
      for (int r = 0; r < 200; ++r) mat.review_ids.push_back(std::to_string(r));
      for (int j = 1; j <= 10; ++j) mat.hypothesis_ids.push_back(j);
      mat.scores.resize(200 * 10);
      for (float& s : mat.scores) s = oracles::draw_score(rng);
      const auto labels = apply_heuristics(mat, set->heuristics);
      for (std::size_t r = 0; r < mat.rows(); ++r) {
        const std::vector<float> row(mat.row(r).begin(), mat.row(r).end());
        ++rows_checked;
        if (labels.labels[r] != oracles::heuristic_label(row, set->heuristics)) ++mismatches;
      }
    }
  }
  c.expect(mismatches == 0, std::to_string(mismatches) + " oracle mismatches");

  std::size_t violations = 0;
  std::uniform_real_distribution<float> bump(0.0f, 0.3f);
  for (int i = 0; i < 10000; ++i) {
    const HypothesisSet& set = i % 2 ? builtin_domain_mh() : builtin_generic();
    std::vector<float> row(set.size());
    for (float& s : row) s = oracles::draw_score(rng);
    std::vector<float> up = row;
    for (float& s : up) {
      if (rng() % 2) s = std::min(1.0f, s + bump(rng));
    }
    if (oracles::label_rank(label_row(up, set.heuristics)) < oracles::label_rank(label_row(row, set.heuristics))) {
      ++violations;
    }
  }
  c.expect(violations == 0, std::to_string(violations) + " monotonicity violations");
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  c.expect(secs < 30.0, "under 30 s");
  c.detail << " " << rows_checked << " rows, 10000 perturbations";
}

std::filesystem::path g_fixture_dir;
fixtures::ExtractionLedger g_ledger;

void criterion_5(Check& c) {
  const auto t0 = Clock::now();
  g_fixture_dir = fixtures::scratch_dir("acceptance-extract");
  g_ledger = fixtures::write_extraction_fixture(g_fixture_dir);
  c.expect(g_ledger.ingested == 500, "fixture has 500 reviews");
  std::vector<std::string> manifests;
  for (const char* run : {"run-a", "run-b"}) {
    ConfigOverrides ov;
    ov.work_dir = g_fixture_dir / run;
    auto res = run_extraction(load_config(g_fixture_dir / "config.json", ov));
    const auto broken = check_conservation(res.manifest);
    for (const auto& b : broken) c.expect(false, b);
    c.expect(res.manifest.counts.maybe_privacy == g_ledger.maybe_privacy, "maybe_privacy matches fixture");
    c.expect(res.manifest.counts.llm_yes == g_ledger.llm_yes, "llm_yes matches fixture");
    manifests.push_back(read_file(WorkDir{ov.work_dir.value()}.manifest()));
  }
  c.expect(manifests[0] == manifests[1], "manifests byte-identical");
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  c.expect(secs < 60.0, "under 60 s");
  c.detail << " " << manifests[0].size() << "-byte manifest, two runs";
}

void criterion_6(Check& c) {
  std::size_t sequences = 0;
  for (int code = 0; code < 243; ++code) {
    std::vector<Vote> votes;
    for (int k = 0, x = code; k < 5; ++k, x /= 3) votes.push_back(static_cast<Vote>(x % 3));
    std::vector<Vote> perm = votes;
    std::sort(perm.begin(), perm.end());
    const MajorityResult ref = majority_vote(perm);
    do {
      ++sequences;
      if (!(majority_vote(perm) == ref)) c.expect(false, "permutation changed the result");
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (std::count(votes.begin(), votes.end(), Vote::abstain) == 0 && ref.tie) c.expect(false, "tie with five votes");
  }
  const auto ex = majority_vote(std::vector{Vote::yes, Vote::no, Vote::abstain, Vote::abstain, Vote::abstain});
  c.expect(ex.decision == BinaryLabel::no && ex.tie, "[yes,no,abstain x3] -> (no, tie)");
  c.detail << " 243 multisets, " << sequences << " orderings";
}

void criterion_7(Check& c) {
  const HypothesisSet& set = builtin_domain_mh();
  ReviewCorpus corpus;
  for (int i = 0; i < 25; ++i) {
    Review r;
    r.id = "p" + std::to_string(i);
    r.text_raw = "Review " + std::to_string(i) + ": they sold my data, tracking my location!";
    r.text_norm = normalize_text(r.text_raw);
    corpus.reviews.push_back(r);
  }
  std::string first_system;
  for (const Review& r : corpus.reviews) {
    const PromptMessages p = build_prompt(set, r);
    if (first_system.empty()) first_system = p.system;
    c.expect(p.system == first_system, "system message differs for " + r.id);
    c.expect(p.user == *r.text_norm, "review not verbatim in " + r.id);
  }
  std::vector<std::string> lines;
  std::istringstream in(first_system);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  std::size_t listed = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::string want = std::to_string(i + 1) + ". " + set.hypotheses[i].text;
    const auto n = std::count(lines.begin(), lines.end(), want);
    c.expect(n == 1, "hypothesis " + std::to_string(i + 1) + " listed " + std::to_string(n) + " times");
    listed += static_cast<std::size_t>(n);
  }
  c.detail << " " << listed << "/21 hypotheses, " << corpus.size() << " reviews";
}

void criterion_8(Check& c) {
  const std::vector<int> x{1, 0, 1, 1, 0, 0, 1};
  c.expect(cohen_kappa(x, x).kappa == 1.0, "identical vectors give 1");
  const double k0 = cohen_kappa(std::vector<int>{1, 1, 0, 0}, std::vector<int>{1, 0, 0, 1}).kappa;
  c.expect(std::fabs(k0) <= 1e-9, "A/B example gives 0");

  if (g_fixture_dir.empty()) {
    g_fixture_dir = fixtures::scratch_dir("acceptance-annotate");
    g_ledger = fixtures::write_extraction_fixture(g_fixture_dir);
    ConfigOverrides ov;
    ov.work_dir = g_fixture_dir / "run-a";
    run_extraction(load_config(g_fixture_dir / "config.json", ov));
  }
  AnnotationSession session(read_queue(WorkDir{g_fixture_dir / "run-a"}.queue()), g_ledger.roster);
  ScriptedLabelSource src(AnnotatorChoice::privacy);
  for (const AnnotationTask& t : session.tasks()) {
    if (std::find(g_ledger.disagree_ids.begin(), g_ledger.disagree_ids.end(), t.review_id) !=
        g_ledger.disagree_ids.end()) {
      src.set(t.assigned[1], t.review_id, AnnotatorChoice::non_privacy);
    }
  }
  const auto outcome = run_annotation(session, src);
  c.expect(outcome.tiebreaks == g_ledger.tiebreaks,
           "tiebreaks " + std::to_string(outcome.tiebreaks) + " vs " + std::to_string(g_ledger.tiebreaks));
  c.expect(outcome.complete(), "session complete");
  c.detail << " k(A,B)=" << fmt(k0) << " tiebreaks=" << outcome.tiebreaks << "/" << g_ledger.tiebreaks;
  if (outcome.kappa) c.detail << " session kappa=" << fmt(outcome.kappa->kappa);
}

void criterion_9() {
  const char* endpoint = std::getenv("REVMINE_NLI_SMOKE_ENDPOINT");
  if (!endpoint || !*endpoint) {
    std::printf("SKIP criterion 9: live NLI smoke test (set REVMINE_NLI_SMOKE_ENDPOINT to run; non-gating)\n");
    return;
  }
  const char* model = std::getenv("REVMINE_NLI_SMOKE_MODEL");
  NliBackendDescriptor d{"smoke", model ? model : "unknown", endpoint};
  d.max_inflight = 1;
  HttpNliBackend backend(d);
  const std::vector<std::string> reviews{
      "they sold my data to advertisers", "the app keeps tracking my location",
      "great meditations and calm voice", "subscription renewed without asking",
      "my therapist shared my notes with my employer"};
  std::size_t ok = 0;
  std::string error;
  for (const std::string& text : reviews) {
    for (int id : {3, 14, 21}) {
      try {
        const Hypothesis& h = builtin_domain_mh().hypotheses[static_cast<std::size_t>(id - 1)];
        const auto s = infer_pair(backend, text, h);
        if (s.entail >= 0.0 && s.entail <= 1.0) ++ok;
      } catch (const std::exception& e) {
        error = e.what();
      }
    }
  }
  std::printf("%s criterion 9: live NLI smoke test, %zu/15 pairs scored%s (non-gating)\n",
              ok == 15 ? "PASS" : "FAIL", ok, error.empty() ? "" : (" [" + error + "]").c_str());
}

}  // namespace

int main() {
  report(1, "random classifier baseline on 358/926", criterion_1);
  report(2, "reported F1 values consistent with P and R", criterion_2);
  report(3, "best-model and best-hypotheses selection", criterion_3);
  report(4, "heuristics match brute-force oracle and stay monotone", criterion_4);
  report(5, "500-review run conserves counts and reproduces its manifest", criterion_5);
  report(6, "majority vote over all 5-vote multisets", criterion_6);
  report(7, "prompt lists every domain hypothesis once and keeps the review verbatim", criterion_7);
  report(8, "kappa examples and scripted annotation tiebreaks", criterion_8);
  criterion_9();
  std::printf("%s\n", failures == 0 ? "ALL GATING CRITERIA PASSED" : "SOME GATING CRITERIA FAILED");
  return failures == 0 ? 0 : 1;
}
