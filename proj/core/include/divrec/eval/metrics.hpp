#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <string>
#include <vector>

namespace divrec::eval {

inline constexpr std::size_t kCandidates = 10;

struct RankedSample {
  std::vector<double> scores;  // one per candidate
  std::size_t positive = 0;    // index of the held-out item
};

// Places the target (scores[0]) at a random position. Ties are broken by
// candidate index, so without this the target would always win ties.
RankedSample shuffled(const std::vector<double>& target_first, std::mt19937_64& rng);

// 1-based; ties with a lower candidate index rank ahead.
std::size_t rank_of(const RankedSample& s);

double auc(const std::vector<RankedSample>& samples);
double hr_at_k(const std::vector<RankedSample>& samples, std::size_t k);
double ndcg_at_k(const std::vector<RankedSample>& samples, std::size_t k);
double mrr_at_k(const std::vector<RankedSample>& samples, std::size_t k);

struct MetricsReport {
  std::string variant;
  std::uint64_t seed = 0;
  std::string fingerprint;
  std::size_t n_samples = 0;
  double auc = 0.0;
  std::map<std::size_t, double> hr, ndcg, mrr;

  nlohmann::ordered_json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

MetricsReport evaluate(const std::vector<RankedSample>& samples, const std::vector<std::size_t>& ks = {1, 3, 5});

// Default column set: auc, hr@1/3/5, ndcg@3/5, mrr@3/5.
std::vector<std::string> default_columns();
double metric_value(const MetricsReport& r, const std::string& column);

void write_metrics_json(const std::filesystem::path& path, const std::vector<MetricsReport>& reports);
std::vector<MetricsReport> read_metrics_json(const std::filesystem::path& path);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsReport>& reports);

}  // namespace divrec::eval
