#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <random>

#include "fixtures.hpp"
#include "revmine/corpus.hpp"
#include "revmine/errors.hpp"
#include "revmine/util.hpp"

using namespace revmine;

namespace {

ReviewCorpus five_ratings() {
  std::string csv = "id,app,store,rating,text\n";
  for (int r = 1; r <= 5; ++r) csv += "r" + std::to_string(r) + ",Calm,google_play," + std::to_string(r) + ",text\n";
  return ingest_reviews_from_string(csv, CorpusFormat::csv).corpus;
}

}  // namespace

TEST(Ingest, ThreeRowCsv) {
  auto res = ingest_reviews_from_string(
      "id,app,store,rating,text\n"
      "a,Calm,google_play,1,Too pricey\n"
      "b,Headspace,apple_app_store,2,\"Crashes, constantly\"\n"
      "c,Shine,other,5,\"Love it, \"\"truly\"\"\"\n",
      CorpusFormat::csv);
  ASSERT_EQ(res.corpus.size(), 3u);
  EXPECT_TRUE(res.rejects.empty());
  EXPECT_EQ(res.corpus.reviews[1].text_raw, "Crashes, constantly");
  EXPECT_EQ(res.corpus.reviews[1].store, Store::apple_app_store);
  EXPECT_EQ(res.corpus.reviews[2].text_raw, "Love it, \"truly\"");
  EXPECT_EQ(res.corpus.provenance.review_count, 3u);
  EXPECT_FALSE(res.corpus.reviews[0].gold_label.has_value());
}

TEST(Ingest, RatingSixIsRejectedNotDropped) {
  auto res = ingest_reviews_from_string(
      "id,app,store,rating,text\n"
      "a,Calm,google_play,1,ok\n"
      "b,Calm,google_play,6,bad rating\n"
      "c,Calm,google_play,2,ok\n",
      CorpusFormat::csv);
  EXPECT_EQ(res.corpus.size(), 2u);
  ASSERT_EQ(res.rejects.size(), 1u);
  EXPECT_EQ(res.rejects[0].line_no, 3u);
  EXPECT_NE(res.rejects[0].reason.find("rating"), std::string::npos);
  EXPECT_EQ(res.corpus.provenance.rejected_count, 1u);
}

TEST(Ingest, RejectReasons) {
  auto res = ingest_reviews_from_string(
      "id,app,store,rating,text,label,date\n"
      "a,Calm,google_play,1,fine,1,2021-03-04\n"
      "a,Calm,google_play,1,duplicate id,,\n"
      "b,Calm,google_play,x,not a number,,\n"
      "c,Calm,google_play,1,,,\n"
      "d,Calm,google_play,1,bad label,2,\n"
      "e,Calm,google_play,1,bad date kept,0,yesterday\n"
      "f,Calm,google_play,1,short row\n"
      "g,Calm,app_store,2,kept one,,\n"
      "h,Calm,app_store,2,kept two,,\n"
      "i,Calm,app_store,2,kept three,,\n"
      "j,Calm,app_store,2,kept four,,\n",
      CorpusFormat::csv);
  ASSERT_EQ(res.corpus.size(), 6u);
  EXPECT_EQ(res.rejects.size(), 5u);
  EXPECT_EQ(res.corpus.reviews[0].gold_label, GoldLabel::privacy);
  EXPECT_EQ(format_date(*res.corpus.reviews[0].submitted_at), "2021-03-04");
  EXPECT_EQ(res.corpus.reviews[1].gold_label, GoldLabel::non_privacy);
  EXPECT_FALSE(res.corpus.reviews[1].submitted_at.has_value());
}

TEST(Ingest, MajorityRejectedIsSchemaMismatch) {
  try {
    ingest_reviews_from_string(
        "id,app,store,rating,text\n"
        "a,Calm,google_play,9,x\n"
        "b,Calm,google_play,9,x\n"
        "c,Calm,google_play,1,x\n",
        CorpusFormat::csv);
    FAIL() << "expected SchemaMismatchError";
  } catch (const SchemaMismatchError& e) {
    EXPECT_EQ(e.rejected(), 2u);
    EXPECT_EQ(e.total(), 3u);
  }
}

TEST(Ingest, MissingColumnAndUnreadableFile) {
  EXPECT_THROW(ingest_reviews_from_string("id,app,rating,text\n1,a,1,x\n", CorpusFormat::csv), ValidationError);
  EXPECT_THROW(ingest_reviews("/nonexistent/reviews.csv", CorpusFormat::csv), ValidationError);
  EXPECT_THROW(parse_corpus_format("xml"), ValidationError);
}

TEST(Ingest, JsonlWithNumbersAndGarbageLine) {
  auto res = ingest_reviews_from_string(
      "{\"id\":\"1\",\"app\":\"Calm\",\"store\":\"play\",\"rating\":2,\"text\":\"meh\",\"label\":0}\n"
      "not json\n"
      "{\"id\":7,\"app\":\"Shine\",\"store\":\"ios\",\"rating\":1,\"text\":\"bad\",\"extra\":true}\n",
      CorpusFormat::jsonl);
  ASSERT_EQ(res.corpus.size(), 2u);
  ASSERT_EQ(res.rejects.size(), 1u);
  EXPECT_EQ(res.rejects[0].line_no, 2u);
  EXPECT_EQ(res.corpus.reviews[0].store, Store::google_play);
  EXPECT_EQ(res.corpus.reviews[1].id, "7");
  EXPECT_EQ(res.corpus.reviews[1].store, Store::apple_app_store);
}

TEST(Ingest, BomAndCrlf) {
  auto res = ingest_reviews_from_string("\xEF\xBB\xBFid,app,store,rating,text\r\na,Calm,google_play,1,hi\r\n",
                                        CorpusFormat::csv);
  ASSERT_EQ(res.corpus.size(), 1u);
  EXPECT_EQ(res.corpus.reviews[0].text_raw, "hi");
}

TEST(Ingest, RejectsFileIsJsonl) {
  auto dir = fixtures::scratch_dir("rejects");
  write_rejects(dir / "rejects.jsonl", {{3, "rating out of range [1,5]: 6"}});
  auto doc = nlohmann::json::parse(read_file(dir / "rejects.jsonl"));
  EXPECT_EQ(doc["line_no"], 3);
  EXPECT_EQ(doc["reason"], "rating out of range [1,5]: 6");
}

TEST(Ingest, GoldFixtureOf1376) {
  auto dir = fixtures::scratch_dir("gold-ingest");
  fixtures::GoldPlan plan;
  fixtures::write_gold_fixture(dir, plan);
  auto res = ingest_reviews(dir / "labeled.csv", CorpusFormat::csv);
  EXPECT_EQ(res.corpus.size(), 1376u);
  std::size_t pos = 0;
  for (const Review& r : res.corpus.reviews) pos += *r.gold_label == GoldLabel::privacy;
  EXPECT_EQ(pos, 414u);
  EXPECT_EQ(res.corpus.size() - pos, 962u);
}

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize_text(""), "");
  EXPECT_EQ(normalize_text("  Hello   WORLD!! "), "hello world");
  EXPECT_EQ(normalize_text("Don't bait people \xF0\x9F\x98\xA0"), "don t bait people");
  EXPECT_EQ(normalize_text("won't let me sign-up...  2FA\tbroken\n"), "won t let me sign up 2fa broken");
  EXPECT_EQ(normalize_text("\xF0\x9F\x98\xA1\xF0\x9F\x98\xA1"), "");
}

TEST(Normalize, IdempotentAndWellFormedOnRandomBytes) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> byte(0, 255), len(0, 64);
  for (int i = 0; i < 5000; ++i) {
    std::string s(static_cast<std::size_t>(len(rng)), '\0');
    for (char& c : s) c = static_cast<char>(byte(rng));
    const std::string once = normalize_text(s);
    EXPECT_EQ(normalize_text(once), once);
    EXPECT_TRUE(is_normalized(once));
    EXPECT_EQ(once.find("  "), std::string::npos);
    if (!once.empty()) {
      EXPECT_NE(once.front(), ' ');
      EXPECT_NE(once.back(), ' ');
    }
    for (char c : once) EXPECT_TRUE((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == ' ');
  }
}

TEST(Normalize, CorpusFillsTextNorm) {
  ReviewCorpus c = normalize_corpus(five_ratings());
  for (const Review& r : c.reviews) {
    ASSERT_TRUE(r.text_norm.has_value());
    EXPECT_EQ(r.premise(), "text");
  }
}

TEST(FilterByRating, Examples) {
  ReviewCorpus c = five_ratings();
  ReviewCorpus low = filter_by_rating(c, 1, 2);
  ASSERT_EQ(low.size(), 2u);
  EXPECT_EQ(low.reviews[0].id, "r1");
  EXPECT_EQ(low.reviews[1].id, "r2");
  EXPECT_EQ(low.provenance.review_count, 2u);
  EXPECT_EQ(filter_by_rating(c, 1, 5).size(), 5u);
  EXPECT_EQ(filter_by_rating(low, 1, 2).size(), low.size());
  EXPECT_THROW(filter_by_rating(c, 0, 2), ValidationError);
  EXPECT_THROW(filter_by_rating(c, 3, 2), ValidationError);
  EXPECT_THROW(filter_by_rating(c, 1, 6), ValidationError);
}

TEST(FilterByRating, TableOneShapedFixture) {
  auto dir = fixtures::scratch_dir("table-one");
  auto ledger = fixtures::write_table_one_fixture(dir);
  EXPECT_EQ(ledger.total, 2043u);
  EXPECT_EQ(ledger.low_rated, 436u);
  auto corpus = ingest_reviews(dir / "reviews.csv", CorpusFormat::csv).corpus;
  EXPECT_EQ(corpus.size(), ledger.total);
  EXPECT_EQ(filter_by_rating(corpus, 1, 2).size(), ledger.low_rated);
}

TEST(PartitionGold, Cases) {
  auto all = ingest_reviews_from_string("id,app,store,rating,text,label\na,x,other,1,t,1\nb,x,other,1,t,0\n",
                                        CorpusFormat::csv).corpus;
  auto p = partition_gold(all);
  EXPECT_EQ(p.labeled.size(), 2u);
  EXPECT_EQ(p.unlabeled.size(), 0u);

  auto none = five_ratings();
  p = partition_gold(none);
  EXPECT_EQ(p.labeled.size(), 0u);
  EXPECT_EQ(p.unlabeled.size(), 5u);
}

TEST(PartitionGold, SizesAddUpAndOrderIsKept) {
  std::string csv = "id,app,store,rating,text,label\n";
  std::mt19937 rng(5);
  std::size_t labeled = 0;
  for (int i = 0; i < 500; ++i) {
    const bool has = rng() % 3 == 0;
    labeled += has;
    csv += "id" + std::to_string(i) + ",x,other,1,t," + (has ? std::to_string(rng() % 2) : "") + "\n";
  }
  auto c = ingest_reviews_from_string(csv, CorpusFormat::csv).corpus;
  auto p = partition_gold(c);
  EXPECT_EQ(p.labeled.size(), labeled);
  EXPECT_EQ(p.labeled.size() + p.unlabeled.size(), c.size());
  for (std::size_t i = 1; i < p.unlabeled.size(); ++i) {
    EXPECT_LT(std::stoi(p.unlabeled.reviews[i - 1].id.substr(2)), std::stoi(p.unlabeled.reviews[i].id.substr(2)));
  }
}

TEST(CorpusJsonl, RoundTrip) {
  auto dir = fixtures::scratch_dir("corpus-jsonl");
  auto c = normalize_corpus(ingest_reviews_from_string(
      "id,app,store,rating,text,label,date\n"
      "a,Calm,google_play,1,\"Multi\nline, \"\"quoted\"\"\",1,2020-02-29\n"
      "b,Shine,apple_app_store,2,plain,,\n",
      CorpusFormat::csv).corpus);
  write_corpus_jsonl(dir / "c.jsonl", c);
  auto back = ingest_reviews(dir / "c.jsonl", CorpusFormat::jsonl).corpus;
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.reviews[i].id, c.reviews[i].id);
    EXPECT_EQ(back.reviews[i].text_raw, c.reviews[i].text_raw);
    EXPECT_EQ(back.reviews[i].gold_label, c.reviews[i].gold_label);
    EXPECT_EQ(back.reviews[i].store, c.reviews[i].store);
    EXPECT_EQ(back.reviews[i].submitted_at, c.reviews[i].submitted_at);
  }
  EXPECT_EQ(review_from_json(review_to_json(c.reviews[0])).text_norm, c.reviews[0].text_norm);
}

TEST(Csv, EscapeRoundTrip) {
  for (std::string s : {"plain", "with,comma", "with \"quote\"", "multi\nline", "", " padded "}) {
    auto rows = parse_csv(csv_escape(s) + "," + csv_escape(s) + "\n");
    ASSERT_EQ(rows.size(), 1u);
    ASSERT_EQ(rows[0].fields.size(), 2u);
    EXPECT_EQ(rows[0].fields[0], s);
  }
}

TEST(Dates, Parse) {
  EXPECT_TRUE(parse_iso_date("2021-10-06").has_value());
  EXPECT_TRUE(parse_iso_date("2021-10-06T12:00:00Z").has_value());
  EXPECT_FALSE(parse_iso_date("2021-02-30").has_value());
  EXPECT_FALSE(parse_iso_date("06/10/2021").has_value());
}
