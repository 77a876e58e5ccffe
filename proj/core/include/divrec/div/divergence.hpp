#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "divrec/nn/tensor.hpp"

namespace divrec::div {

struct DivergenceConfig {
  double alpha = 0.5;  // cosine weight
  double beta = 0.5;   // JS weight
  double gamma = 1.0;  // constraint strength in the generator loss
  // false: constraint = alpha*cos - beta*js (minimising spreads both ways).
  // true: constraint = alpha*cos + beta*js, the formula as printed.
  bool paper_literal_sign = false;

  void validate() const;
};

inline constexpr double kDistTolerance = 1e-9;
inline constexpr double kLogClamp = 1e-12;

double cosine(std::span<const double> x, std::span<const double> y);
std::vector<double> softmax(std::span<const double> x);

// Natural log. Inputs must be distributions (nonnegative, sum 1 within 1e-9).
double kl(std::span<const double> p, std::span<const double> q);
double js(std::span<const double> p, std::span<const double> q);
double tv(std::span<const double> p, std::span<const double> q);

// alpha*cos(x,y) + beta*js(softmax x, softmax y)
double d_total(std::span<const double> x, std::span<const double> y, const DivergenceConfig& cfg);
// The term added to the generator loss (sign per cfg).
double constraint(std::span<const double> x, std::span<const double> y, const DivergenceConfig& cfg);

// Differentiable versions. Rows of `a` and `b` are paired; results are the
// mean over rows as a scalar tensor.
nn::Tensor cosine_rows(const nn::Tensor& a, const nn::Tensor& b);
nn::Tensor js_rows(const nn::Tensor& a, const nn::Tensor& b);  // on row softmax
nn::Tensor d_total_rows(const nn::Tensor& a, const nn::Tensor& b, const DivergenceConfig& cfg);
nn::Tensor constraint_rows(const nn::Tensor& a, const nn::Tensor& b, const DivergenceConfig& cfg);

struct EmbeddingBatch {
  std::vector<std::vector<double>> vectors;
  std::vector<int> class_ids;
  std::vector<std::string> sample_ids;

  std::size_t size() const { return vectors.size(); }
};

struct MetricStats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n_pairs = 0;
};

struct DiversityReport {
  std::map<std::string, MetricStats> overall;  // cos, kl, js, tv
  std::map<std::pair<int, int>, std::map<std::string, MetricStats>> by_class_pair;

  double mean(const std::string& metric) const { return overall.at(metric).mean; }
  nlohmann::json to_json() const;
};

// Statistics over every pair of samples from different classes; KL uses the
// average of both directions.
DiversityReport batch_diversity_report(const EmbeddingBatch& batch);

void save_report(const std::filesystem::path& path, const DiversityReport& report,
                 const std::string& fingerprint = {});

}  // namespace divrec::div
