#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace divrec::data {

struct Interaction {
  std::string user_id;
  std::string item_id;
  int rating = 0;  // 1..5
  std::int64_t timestamp = 0;
  std::string title;
};

struct IngestResult {
  std::vector<Interaction> interactions;
  std::size_t total_lines = 0;
  std::size_t malformed = 0;
};

// JSONL with fields user_id, item_id, rating, timestamp, title. Invalid lines
// are skipped and counted; more than 10% invalid raises IngestError.
IngestResult ingest(const std::filesystem::path& path, std::string_view format = "jsonl");
IngestResult ingest_lines(const std::vector<std::string>& lines);

void write_interactions_jsonl(const std::filesystem::path& path,
                              const std::vector<Interaction>& interactions);

struct UserHistory {
  std::string user_id;
  std::vector<std::string> items;   // chronological
  std::vector<std::string> titles;  // parallel to items
  std::vector<std::int64_t> timestamps;
  // Every item the user touched in the raw log, any rating; sorted.
  std::vector<std::string> all_items;
};

// item_id -> (capped) title for every item surviving preprocessing.
using Catalog = std::map<std::string, std::string>;

struct PreprocessConfig {
  std::size_t min_user = 5;
  std::size_t min_item = 5;
  int positive_rating = 5;
  std::size_t trunc_lo = 5;
  std::size_t trunc_hi = 20;
  std::size_t title_max_tokens = 20;
};

struct FilterStats {
  std::size_t input = 0;
  std::size_t after_rating = 0;
  std::size_t after_count_filter = 0;
  std::size_t users_after_filter = 0;
  std::size_t items_after_filter = 0;
  std::size_t users_kept = 0;
  std::size_t fixpoint_rounds = 0;
};

struct Dataset {
  std::vector<UserHistory> histories;  // sorted by user_id
  Catalog catalog;
  FilterStats stats;
};

std::string truncate_title(std::string_view title, std::size_t max_tokens);

// Positive-rating filter, then alternating user/item count filters until no
// record is removed. Exposed separately so the fixpoint property is testable.
std::vector<Interaction> filter_to_fixpoint(std::vector<Interaction> positives, std::size_t min_user,
                                            std::size_t min_item, std::size_t* rounds = nullptr);

Dataset preprocess(const std::vector<Interaction>& interactions, const PreprocessConfig& cfg);

struct SplitSample {
  std::string user_id;
  std::vector<std::string> history;
  std::vector<std::string> history_titles;
  std::string target;
  std::string target_title;
  std::vector<std::string> negatives;
  std::vector<std::string> negative_titles;
};

struct Candidate {
  std::string item_id;
  std::string title;
  int label = 0;
};

// Target first, then negatives.
std::vector<Candidate> candidates(const SplitSample& sample);

struct SplitConfig {
  std::size_t n_negatives = 9;
  std::uint64_t seed = 0;
  // Training targets start at history prefix length max(1, min_prefix).
  std::size_t min_prefix = 4;
};

struct Split {
  std::vector<SplitSample> train;
  std::vector<SplitSample> test;
};

// Seeded per user, so results do not depend on user iteration order.
std::mt19937_64 user_rng(std::uint64_t seed, std::string_view user_id, std::uint64_t salt = 0);

std::vector<std::string> sample_negatives(const std::vector<std::string>& user_items,
                                          const Catalog& catalog, std::size_t n,
                                          std::mt19937_64& rng);

Split split_leave_one_out(const std::vector<UserHistory>& histories, const Catalog& catalog,
                          const SplitConfig& cfg);

// Redraws every sample's negatives (the per-epoch resampling option).
void resample_negatives(std::vector<SplitSample>& samples, const std::vector<UserHistory>& histories,
                        const Catalog& catalog, std::uint64_t seed, std::uint64_t epoch);

void write_split_jsonl(const std::filesystem::path& path, const std::vector<SplitSample>& samples);
std::vector<SplitSample> read_split_jsonl(const std::filesystem::path& path);

}  // namespace divrec::data
