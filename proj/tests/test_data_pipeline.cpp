#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "divrec/data/interactions.hpp"
#include "divrec/data/synthetic.hpp"
#include "divrec/errors.hpp"
#include "doctest.h"

using namespace divrec;
using namespace divrec::data;

namespace {

std::string line(const std::string& u, const std::string& i, int r, long ts, const std::string& t = "A title") {
  return R"({"user_id":")" + u + R"(","item_id":")" + i + R"(","rating":)" + std::to_string(r) +
         R"(,"timestamp":)" + std::to_string(ts) + R"(,"title":")" + t + "\"}";
}

Interaction rec(const std::string& u, const std::string& i, std::int64_t ts, int r = 5) {
  return {u, i, r, ts, "title " + i};
}

PreprocessConfig loose() {
  PreprocessConfig cfg;
  cfg.min_user = 1;
  cfg.min_item = 1;
  cfg.trunc_lo = 2;
  return cfg;
}

Catalog big_catalog(std::size_t n) {
  Catalog c;
  for (std::size_t i = 0; i < n; ++i) c["x" + std::to_string(i)] = "title x" + std::to_string(i);
  return c;
}

}  // namespace

TEST_CASE("ingest parses valid lines and counts malformed ones") {
  auto r = ingest_lines({line("u1", "a", 5, 1), line("u1", "b", 3, 2), line("u2", "a", 1, 3)});
  CHECK(r.interactions.size() == 3);
  CHECK(r.malformed == 0);

  std::vector<std::string> lines;
  for (int i = 0; i < 10; ++i) lines.push_back(line("u", "i" + std::to_string(i), 5, i));
  lines.push_back(line("u", "bad", 6, 11));
  r = ingest_lines(lines);
  CHECK(r.interactions.size() == 10);
  CHECK(r.malformed == 1);
  CHECK(r.total_lines == 11);
}

TEST_CASE("ingest rejects bad files") {
  CHECK_THROWS_AS(ingest_lines({line("u", "a", 5, 1), "{not json", line("u", "b", 9, 2)}), IngestError);
  CHECK_THROWS_AS(ingest_lines({line("u", "a", 5, -1), line("u", "b", 5, 2, "   ")}), IngestError);
  CHECK_THROWS_AS(ingest("/nonexistent/divrec/file.jsonl"), IoError);
  CHECK(ingest_lines({}).interactions.empty());
}

TEST_CASE("ingest reads a file written by the JSONL writer") {
  const auto path = std::filesystem::temp_directory_path() / "divrec_ingest_rt.jsonl";
  std::vector<Interaction> recs = {rec("u1", "a", 10, 5), rec("u2", "b", 20, 2)};
  write_interactions_jsonl(path, recs);
  auto r = ingest(path);
  REQUIRE(r.interactions.size() == 2);
  CHECK(r.interactions[1].item_id == "b");
  CHECK(r.interactions[1].rating == 2);
  CHECK(r.interactions[1].timestamp == 20);
  std::filesystem::remove(path);
}

TEST_CASE("preprocess drops users below min_user") {
  std::vector<Interaction> recs;
  for (int i = 0; i < 4; ++i) recs.push_back(rec("short", "i" + std::to_string(i), i));
  for (int i = 0; i < 6; ++i) recs.push_back(rec("long", "i" + std::to_string(i), i));
  PreprocessConfig cfg = loose();
  cfg.min_user = 5;
  auto ds = preprocess(recs, cfg);
  REQUIRE(ds.histories.size() == 1);
  CHECK(ds.histories[0].user_id == "long");
}

TEST_CASE("preprocess keeps the most recent trunc_hi items in order") {
  std::vector<Interaction> recs;
  std::mt19937_64 rng(3);
  std::vector<int> ts(25);
  std::iota(ts.begin(), ts.end(), 100);
  std::shuffle(ts.begin(), ts.end(), rng);
  for (int i = 0; i < 25; ++i) recs.push_back(rec("u", "item" + std::to_string(ts[i]), ts[i]));
  auto ds = preprocess(recs, loose());
  REQUIRE(ds.histories.size() == 1);
  const auto& h = ds.histories[0];
  // Oracle: sort by timestamp, keep the suffix.
  auto sorted = recs;
  std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.timestamp < b.timestamp; });
  REQUIRE(h.items.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) CHECK(h.items[i] == sorted[i + 5].item_id);
  CHECK(std::is_sorted(h.timestamps.begin(), h.timestamps.end()));
}

TEST_CASE("preprocess keeps only positive ratings and breaks timestamp ties by item id") {
  std::vector<Interaction> recs = {rec("u", "c", 5), rec("u", "a", 5), rec("u", "b", 5),
                                   rec("u", "z", 1, 3), rec("u", "a", 9)};
  auto ds = preprocess(recs, loose());
  REQUIRE(ds.histories.size() == 1);
  CHECK(ds.histories[0].items == std::vector<std::string>{"a", "b", "c"});
  // Low-rated item still counts as "interacted" for negative sampling.
  CHECK(std::binary_search(ds.histories[0].all_items.begin(), ds.histories[0].all_items.end(), "z"));
  CHECK(ds.catalog.count("z") == 0);
}

TEST_CASE("preprocess caps titles at 20 tokens") {
  std::string long_title;
  for (int i = 0; i < 25; ++i) long_title += "w" + std::to_string(i) + " ";
  std::vector<Interaction> recs = {{"u", "a", 5, 1, long_title}, rec("u", "b", 2)};
  auto ds = preprocess(recs, loose());
  CHECK(truncate_title(ds.catalog.at("a"), 100) == truncate_title(long_title, 20));
  CHECK(ds.histories[0].titles[0].find("w19") != std::string::npos);
  CHECK(ds.histories[0].titles[0].find("w20") == std::string::npos);
}

TEST_CASE("preprocess reports stage counts when everything is filtered") {
  std::vector<Interaction> recs = {rec("u", "a", 1, 3), rec("u", "b", 2, 3)};
  try {
    preprocess(recs, loose());
    FAIL("expected PreprocessError");
  } catch (const PreprocessError& e) {
    CHECK(std::string(e.what()).find("after_rating=0") != std::string::npos);
  }
  PreprocessConfig bad = loose();
  bad.trunc_lo = 1;
  CHECK_THROWS_AS(preprocess(recs, bad), ContractError);
}

TEST_CASE("count filter reaches a fixpoint where every user and item meets its threshold") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> user(0, 30), item(0, 40);
    std::vector<Interaction> recs;
    std::set<std::pair<int, int>> seen;
    for (int n = 0; n < 400; ++n) {
      int u = user(rng), i = item(rng);
      if (!seen.insert({u, i}).second) continue;
      recs.push_back(rec("u" + std::to_string(u), "i" + std::to_string(i), n));
    }
    std::size_t rounds = 0;
    auto kept = filter_to_fixpoint(recs, 8, 6, &rounds);
    std::map<std::string, std::size_t> per_user, per_item;
    for (const auto& r : kept) {
      ++per_user[r.user_id];
      ++per_item[r.item_id];
    }
    for (const auto& [u, c] : per_user) CHECK(c >= 8);
    for (const auto& [i, c] : per_item) CHECK(c >= 6);
    CHECK(rounds >= 1);
    // Idempotent at the fixpoint.
    CHECK(filter_to_fixpoint(kept, 8, 6).size() == kept.size());
  }
}

TEST_CASE("leave-one-out split on [a,b,c]") {
  UserHistory h{"u", {"a", "b", "c"}, {"ta", "tb", "tc"}, {1, 2, 3}, {"a", "b", "c"}};
  auto catalog = big_catalog(20);
  catalog["a"] = "ta";
  catalog["b"] = "tb";
  catalog["c"] = "tc";
  SplitConfig cfg;
  cfg.min_prefix = 1;
  auto split = split_leave_one_out({h}, catalog, cfg);
  REQUIRE(split.test.size() == 1);
  CHECK(split.test[0].target == "c");
  CHECK(split.test[0].history == std::vector<std::string>{"a", "b"});
  REQUIRE(split.train.size() == 1);
  CHECK(split.train[0].target == "b");
  CHECK(split.train[0].history == std::vector<std::string>{"a"});
  auto cands = candidates(split.test[0]);
  REQUIRE(cands.size() == 10);
  CHECK(cands[0].label == 1);
  CHECK(std::count_if(cands.begin(), cands.end(), [](auto& c) { return c.label == 0; }) == 9);
}

TEST_CASE("split contracts") {
  UserHistory tiny{"u", {"a", "b"}, {"ta", "tb"}, {1, 2}, {"a", "b"}};
  CHECK_THROWS_AS(split_leave_one_out({tiny}, big_catalog(20), {}), ContractError);
  UserHistory h{"u", {"x0", "x1", "x2"}, {"", "", ""}, {1, 2, 3}, {"x0", "x1", "x2"}};
  CHECK_THROWS_AS(split_leave_one_out({h}, big_catalog(11), {}), SamplingError);
  CHECK_NOTHROW(split_leave_one_out({h}, big_catalog(12), {}));
}

TEST_CASE("split on synthetic data: last target, disjoint negatives, determinism") {
  SyntheticConfig syn;
  auto ds = preprocess(generate_synthetic(syn), PreprocessConfig{});
  CHECK(ds.histories.size() >= 150);
  SplitConfig cfg;
  cfg.seed = 11;
  auto a = split_leave_one_out(ds.histories, ds.catalog, cfg);
  auto b = split_leave_one_out(ds.histories, ds.catalog, cfg);
  REQUIRE(a.test.size() == ds.histories.size());
  std::map<std::string, const UserHistory*> users;
  for (const auto& h : ds.histories) users[h.user_id] = &h;
  for (const auto* set : {&a.train, &a.test}) {
    for (const auto& s : *set) {
      const auto& h = *users.at(s.user_id);
      CHECK(s.negatives.size() == 9);
      CHECK(std::set<std::string>(s.negatives.begin(), s.negatives.end()).size() == 9);
      for (const auto& n : s.negatives) {
        CHECK_FALSE(std::binary_search(h.all_items.begin(), h.all_items.end(), n));
        CHECK(std::find(h.items.begin(), h.items.end(), n) == h.items.end());
      }
    }
  }
  for (std::size_t i = 0; i < a.test.size(); ++i) {
    const auto& h = *users.at(a.test[i].user_id);
    CHECK(a.test[i].target == h.items.back());
    CHECK(h.timestamps.back() == *std::max_element(h.timestamps.begin(), h.timestamps.end()));
    CHECK(a.test[i].negatives == b.test[i].negatives);
  }
  cfg.seed = 12;
  auto c = split_leave_one_out(ds.histories, ds.catalog, cfg);
  std::size_t differ = 0;
  for (std::size_t i = 0; i < a.test.size(); ++i) differ += a.test[i].negatives != c.test[i].negatives;
  CHECK(differ > a.test.size() / 2);
}

TEST_CASE("per-user negative sampling does not depend on user order") {
  auto ds = preprocess(generate_synthetic({}), PreprocessConfig{});
  auto reversed = ds.histories;
  std::reverse(reversed.begin(), reversed.end());
  auto a = split_leave_one_out(ds.histories, ds.catalog, {});
  auto b = split_leave_one_out(reversed, ds.catalog, {});
  std::map<std::string, std::vector<std::string>> na, nb;
  for (auto& s : a.test) na[s.user_id] = s.negatives;
  for (auto& s : b.test) nb[s.user_id] = s.negatives;
  CHECK(na == nb);
}

TEST_CASE("resampling redraws negatives but keeps invariants") {
  auto ds = preprocess(generate_synthetic({}), PreprocessConfig{});
  auto split = split_leave_one_out(ds.histories, ds.catalog, {});
  auto again = split.train;
  resample_negatives(again, ds.histories, ds.catalog, 0, 1);
  std::size_t differ = 0;
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(again[i].negatives.size() == 9);
    differ += again[i].negatives != split.train[i].negatives;
  }
  CHECK(differ > again.size() / 2);
}

TEST_CASE("split files round-trip") {
  auto ds = preprocess(generate_synthetic({}), PreprocessConfig{});
  auto split = split_leave_one_out(ds.histories, ds.catalog, {});
  const auto path = std::filesystem::temp_directory_path() / "divrec_split_rt.jsonl";
  write_split_jsonl(path, split.test);
  auto back = read_split_jsonl(path);
  REQUIRE(back.size() == split.test.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].history_titles == split.test[i].history_titles);
    CHECK(back[i].negative_titles == split.test[i].negative_titles);
    CHECK(back[i].target == split.test[i].target);
  }
  std::filesystem::remove(path);
}

TEST_CASE("synthetic generator is deterministic and plants category words") {
  auto a = generate_synthetic({});
  auto b = generate_synthetic({});
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].item_id == b[i].item_id);
  auto items = synthetic_items({});
  CHECK(items.size() == 120);
  std::set<std::string> titles;
  for (const auto& it : items) {
    titles.insert(it.title);
    CHECK(it.title.find(synthetic_categories()[it.cluster]) != std::string::npos);
  }
  CHECK(titles.size() == items.size());
}
