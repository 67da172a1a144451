#include "fixtures.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "revmine/corpus.hpp"
#include "revmine/errors.hpp"
#include "revmine/util.hpp"

namespace revmine::fixtures {

using nlohmann::json;

namespace {

constexpr std::array<const char*, 5> kApps{"Calm", "Headspace", "Sanvelo", "Talkspace", "Shine"};

// Complaints with nothing privacy-related in them. None contains a trigger
// phrase, before or after normalization.
constexpr std::array<const char*, 12> kFiller{
    "The app crashes every time I open it.",
    "Way too expensive for what it offers!!",
    "Customer support never replied to my emails",
    "Meditations are repetitive after a week.",
    "Subscription renewed without warning, very annoyed",
    "Audio keeps cutting out mid session :(",
    "Can't log in since the last update",
    "The narrator's voice is so irritating",
    "Too many notifications, I uninstalled it.",
    "Sleep stories stopped downloading - useless",
    "Free trial is basically nothing",
    "UI is confusing and slow on my phone \xF0\x9F\x98\xA1",
};

struct Trigger {
  const char* raw;     // as written in the review
  const char* phrase;  // normalized form the mock matches on
  std::vector<int> hypotheses;
  double score;
};

// With jitter 0.01 the scores stay clear of every domain threshold:
// 0.93 > 0.85 (one needed), 0.80 > 0.75 (three needed), 0.73 > 0.70 (five needed).
const std::vector<Trigger>& privacy_triggers() {
  static const std::vector<Trigger> t{
      {"It keeps TRACKING MY LOCATION even when closed!", "tracking my location", {3}, 0.93},
      {"I'm pretty sure they sold my data to advertisers.", "sold my data", {1, 2, 5}, 0.80},
      {"Their counselor shared my therapy notes with my employer...",
       "shared my therapy notes", {7, 8, 9, 10, 11}, 0.73},
  };
  return t;
}

// Fires two hypotheses at 0.80: below every domain rule.
const Trigger kNearMiss{"It asked for my email address twice.", "asked for my email", {1, 2}, 0.80};

std::string review_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "r%04zu", i + 1);
  return buf;
}

std::string date_for(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> month(1, 12), day(1, 28);
  char buf[16];
  std::snprintf(buf, sizeof buf, "2021-%02d-%02d", month(rng), day(rng));
  return buf;
}

std::string filler(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, kFiller.size() - 1);
  return kFiller[pick(rng)];
}

struct Row {
  std::string id, app, store;
  int rating = 1;
  std::string text, date;
  std::optional<int> label;
};

void write_csv(const std::filesystem::path& path, const std::vector<Row>& rows) {
  std::string out = "id,app,store,rating,text,date,label\n";
  for (const Row& r : rows) {
    out += csv_escape(r.id) + ',' + csv_escape(r.app) + ',' + csv_escape(r.store) + ',' +
           std::to_string(r.rating) + ',' + csv_escape(r.text) + ',' + r.date + ',' +
           (r.label ? std::to_string(*r.label) : std::string()) + '\n';
  }
  write_file_atomic(path, out);
}

json trigger_json(const char* phrase, const std::vector<int>& hyps, double score) {
  return json{{"phrase", phrase}, {"hypotheses", hyps}, {"score", score}};
}

}  // namespace

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("revmine-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

ExtractionLedger write_extraction_fixture(const std::filesystem::path& dir, const ExtractionPlan& plan) {
  const std::size_t no_votes = plan.maybe_privacy - plan.llm_yes - plan.llm_ties - plan.llm_failed;
  if (plan.llm_yes + plan.llm_ties + plan.llm_failed > plan.maybe_privacy ||
      plan.maybe_privacy + plan.near_miss + plan.empty_text > plan.total ||
      plan.disagreements > plan.llm_yes) {
    throw ValidationError("inconsistent extraction fixture plan");
  }

  // Role per review, shuffled so roles are spread over the corpus.
  enum Role { plain, near, empty, yes, no, tie, failed };
  std::vector<Role> roles;
  roles.insert(roles.end(), plan.llm_yes, yes);
  roles.insert(roles.end(), no_votes, no);
  roles.insert(roles.end(), plan.llm_ties, tie);
  roles.insert(roles.end(), plan.llm_failed, failed);
  roles.insert(roles.end(), plan.near_miss, near);
  roles.insert(roles.end(), plan.empty_text, empty);
  roles.resize(plan.total, plain);
  std::mt19937_64 rng(plan.seed);
  std::shuffle(roles.begin(), roles.end(), rng);

  static const std::vector<std::vector<std::string>> yes_scripts{
      {"yes", "yes", "yes", "yes", "yes"},
      {"Yes.", "no", "yes", "No", "yes"},
      {"yes", "maybe", "yes", "no", "YES, it does"},
      {"no", "yes", "yes", "yes", "no"},
  };
  static const std::vector<std::vector<std::string>> no_scripts{
      {"no", "no", "no", "no", "no"},
      {"no", "yes", "no", "no", "yes"},
      {"No.", "I cannot tell", "no", "yes", "no"},
  };
  static const std::vector<std::vector<std::string>> tie_scripts{
      {"yes", "no", "unsure", "unsure", "unsure"},
      {"hmm", "hmm", "hmm", "hmm", "hmm"},
  };

  ExtractionLedger ledger;
  ledger.roster = {"lead", "ann2", "ann3", "ann4"};
  std::vector<Row> rows;
  json script = json::object();
  script["*"] = json::array({"no"});
  std::size_t privacy_seen = 0, yes_seen = 0, no_seen = 0, tie_seen = 0;
  std::uniform_int_distribution<int> stars(1, 2);

  for (std::size_t i = 0; i < plan.total; ++i) {
    Row r;
    r.id = review_id(i);
    r.app = kApps[i % kApps.size()];
    r.store = i % 3 == 0 ? "apple_app_store" : "google_play";
    r.rating = stars(rng);
    r.date = date_for(rng);
    const Role role = roles[i];
    if (role == empty) {
      r.text = "!!! \xF0\x9F\x98\xA1\xF0\x9F\x98\xA1 ...";
    } else if (role == near) {
      r.text = filler(rng) + " " + kNearMiss.raw;
    } else if (role == plain) {
      r.text = filler(rng) + " " + filler(rng);
    } else {
      const Trigger& t = privacy_triggers()[privacy_seen++ % privacy_triggers().size()];
      r.text = filler(rng) + " " + t.raw;
      ledger.triggers[r.id] = t.hypotheses;
      std::vector<std::string> responses;
      switch (role) {
        case yes: {
          responses = yes_scripts[yes_seen++ % yes_scripts.size()];
          ledger.yes_ids.push_back(r.id);
          ledger.yes_votes[r.id] = static_cast<std::size_t>(std::count_if(
              responses.begin(), responses.end(), [](const std::string& s) {
                return s == "yes" || s == "Yes." || s == "YES, it does";
              }));
          break;
        }
        case no: responses = no_scripts[no_seen++ % no_scripts.size()]; break;
        case tie: responses = tie_scripts[tie_seen++ % tie_scripts.size()]; break;
        default: responses = {"yes", "!fail", "yes", "yes", "yes"}; break;
      }
      script[r.id] = responses;
    }
    rows.push_back(std::move(r));
  }

  ledger.ingested = plan.total;
  ledger.rating_filtered = plan.total;
  ledger.nli_scored = plan.total;
  ledger.maybe_privacy = plan.maybe_privacy;
  ledger.maybe_not_privacy = plan.total - plan.maybe_privacy;
  ledger.undetermined = 0;
  ledger.llm_yes = plan.llm_yes;
  ledger.llm_no = no_votes + plan.llm_ties;
  ledger.llm_ties = plan.llm_ties;
  ledger.llm_failed = plan.llm_failed;
  for (std::size_t k = 0; k < plan.disagreements; ++k) {
    ledger.disagree_ids.push_back(ledger.yes_ids[k * ledger.yes_ids.size() / plan.disagreements]);
  }
  ledger.tiebreaks = ledger.disagree_ids.size();

  json table{{"default_score", 0.05}, {"jitter", 0.01}, {"seed", plan.seed}, {"triggers", json::array()}};
  for (const Trigger& t : privacy_triggers()) {
    table["triggers"].push_back(trigger_json(t.phrase, t.hypotheses, t.score));
  }
  table["triggers"].push_back(trigger_json(kNearMiss.phrase, kNearMiss.hypotheses, kNearMiss.score));

  json config{
      {"work_dir", "run"},
      {"seed", plan.seed},
      {"corpus", {{"unlabeled", "reviews.csv"}, {"rating_min", 1}, {"rating_max", 2}}},
      {"nli",
       {{"backends", json::array({{{"name", "mock-nli"}, {"model", "mock-deberta"},
                                   {"endpoint", "mock"}, {"mock_table", "mock_nli.json"}}})},
        {"selected", "mock-nli"}}},
      {"hypotheses", {{"sets", {"builtin:generic", "builtin:domain_mh"}}, {"selected", "builtin:domain_mh"}}},
      {"llm",
       {{"backend", {{"name", "mock-llm"}, {"model", "mock-llama"}, {"endpoint", "mock"},
                     {"mock_script", "mock_llm.json"}}},
        {"sampling", {{"temperature", 0.3}, {"top_p", 0.9}, {"num_samples", 5}}}}},
      {"annotation", {{"annotators", ledger.roster}}},
  };

  std::filesystem::create_directories(dir);
  write_csv(dir / "reviews.csv", rows);
  write_file_atomic(dir / "mock_nli.json", table.dump(2) + "\n");
  write_file_atomic(dir / "mock_llm.json", script.dump(2) + "\n");
  write_file_atomic(dir / "config.json", config.dump(2) + "\n");
  return ledger;
}

GoldLedger write_gold_fixture(const std::filesystem::path& dir, const GoldPlan& plan) {
  // Phrases are disjoint, so each review is scored by exactly one trigger.
  // "all hypotheses" triggers fire on both sets; hypothesis 25 exists only in
  // the generic set.
  enum Kind { pos_both, pos_a, pos_ag, pos_none, neg_a, neg_b, neg_ag, neg_none };
  struct Group {
    Kind kind;
    std::size_t n;
    const char* raw;
    int label;
  };
  const std::vector<Group> groups{
      {pos_both, plan.pos_both, "They are reading my private journal entries.", 1},
      {pos_a, plan.pos_a, "The app leaked my mood history.", 1},
      {pos_ag, plan.pos_a_generic, "Too many permissions wanted for a breathing app.", 1},
      {pos_none, plan.pos_none, "I do not trust them with my mental health info.", 1},
      {neg_a, plan.neg_a, "Account settings are a mess.", 0},
      {neg_b, plan.neg_b, "Profile sync keeps failing.", 0},
      {neg_ag, plan.neg_a_generic, "Had to reset my password again.", 0},
      {neg_none, plan.neg_none, "", 0},
  };

  std::vector<Kind> kinds;
  for (const Group& g : groups) kinds.insert(kinds.end(), g.n, g.kind);
  std::mt19937_64 rng(plan.seed);
  std::shuffle(kinds.begin(), kinds.end(), rng);

  std::vector<Row> rows;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    const Group& g = groups[kinds[i]];
    Row r;
    r.id = "g" + review_id(i).substr(1);
    r.app = kApps[i % kApps.size()];
    r.store = i % 2 == 0 ? "google_play" : "apple_app_store";
    r.rating = 1 + static_cast<int>(i % 2);
    r.date = date_for(rng);
    r.text = filler(rng);
    if (*g.raw) r.text += std::string(" ") + g.raw;
    r.label = g.label;
    rows.push_back(std::move(r));
  }

  auto table = [&](std::vector<json> triggers) {
    return json{{"default_score", 0.05}, {"jitter", 0.01}, {"triggers", triggers}};
  };
  const json mock_a = table({
      trigger_json("reading my private journal", {}, 0.95),
      trigger_json("leaked my mood history", {}, 0.95),
      trigger_json("too many permissions", {25}, 0.95),
      trigger_json("account settings are a mess", {}, 0.95),
      trigger_json("reset my password", {25}, 0.95),
  });
  const json mock_b = table({
      trigger_json("reading my private journal", {}, 0.95),
      trigger_json("profile sync keeps failing", {}, 0.95),
  });

  GoldLedger ledger;
  auto cm = [&](std::size_t tp, std::size_t fp) {
    return ConfusionMatrix{tp, fp, plan.negatives() - fp, plan.positives() - tp};
  };
  ledger.confusion["model-a/generic"] =
      cm(plan.pos_both + plan.pos_a + plan.pos_a_generic, plan.neg_a + plan.neg_a_generic);
  ledger.confusion["model-b/generic"] = cm(plan.pos_both, plan.neg_b);
  ledger.confusion["model-a/domain_mh"] = cm(plan.pos_both + plan.pos_a, plan.neg_a);
  ledger.best_model = metrics(ledger.confusion["model-a/generic"]).f1 >
                              metrics(ledger.confusion["model-b/generic"]).f1
                          ? "model-a"
                          : "model-b";
  ledger.best_set = "domain_mh";
  if (ledger.best_model == "model-a" &&
      metrics(ledger.confusion["model-a/generic"]).f1 >= metrics(ledger.confusion["model-a/domain_mh"]).f1) {
    ledger.best_set = "generic";
  }

  json config{
      {"work_dir", "run"},
      {"seed", plan.seed},
      {"corpus", {{"labeled", "labeled.csv"}}},
      {"nli",
       {{"backends", json::array({
                         {{"name", "model-a"}, {"endpoint", "mock"}, {"mock_table", "mock_a.json"}},
                         {{"name", "model-b"}, {"endpoint", "mock"}, {"mock_table", "mock_b.json"}},
                     })}}},
      {"hypotheses", {{"sets", {"builtin:generic", "builtin:domain_mh"}}}},
  };

  std::filesystem::create_directories(dir);
  write_csv(dir / "labeled.csv", rows);
  write_file_atomic(dir / "mock_a.json", mock_a.dump(2) + "\n");
  write_file_atomic(dir / "mock_b.json", mock_b.dump(2) + "\n");
  write_file_atomic(dir / "config.json", config.dump(2) + "\n");
  return ledger;
}

TableOneLedger write_table_one_fixture(const std::filesystem::path& dir, std::size_t divisor,
                                       std::uint64_t seed) {
  struct Published {
    const char* app;
    std::size_t total, low;
  };
  static const std::array<Published, 5> published{{
      {"Calm", 106181, 22983},
      {"Headspace", 78989, 16376},
      {"Sanvelo", 8554, 698},
      {"Talkspace", 5054, 2928},
      {"Shine", 5596, 662},
  }};
  if (divisor == 0) throw ValidationError("divisor must be positive");

  // Largest-remainder apportionment of floor(sum / divisor).
  auto apportion = [&](auto field) {
    std::size_t sum = 0;
    for (const Published& p : published) sum += field(p);
    const std::size_t target = sum / divisor;
    std::vector<std::size_t> share(published.size());
    std::vector<std::size_t> order(published.size());
    std::size_t given = 0;
    for (std::size_t i = 0; i < published.size(); ++i) {
      share[i] = field(published[i]) / divisor;
      given += share[i];
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return field(published[a]) % divisor > field(published[b]) % divisor;
    });
    for (std::size_t k = 0; given < target; ++k, ++given) ++share[order[k]];
    return share;
  };
  const auto totals = apportion([](const Published& p) { return p.total; });
  const auto lows = apportion([](const Published& p) { return p.low; });

  TableOneLedger ledger;
  std::vector<Row> rows;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> low_star(1, 2), high_star(3, 5);
  for (std::size_t a = 0; a < published.size(); ++a) {
    const std::size_t n = std::max(totals[a], lows[a]);
    ledger.apps.push_back({published[a].app, n, lows[a]});
    ledger.total += n;
    ledger.low_rated += lows[a];
    std::vector<bool> is_low(n, false);
    std::fill(is_low.begin(), is_low.begin() + static_cast<std::ptrdiff_t>(lows[a]), true);
    std::shuffle(is_low.begin(), is_low.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      Row r;
      r.id = std::string(published[a].app) + "-" + std::to_string(i + 1);
      r.app = published[a].app;
      r.store = i % 2 == 0 ? "google_play" : "apple_app_store";
      r.rating = is_low[i] ? low_star(rng) : high_star(rng);
      r.date = date_for(rng);
      r.text = filler(rng);
      rows.push_back(std::move(r));
    }
  }
  std::filesystem::create_directories(dir);
  write_csv(dir / "reviews.csv", rows);
  return ledger;
}

}  // namespace revmine::fixtures
