#include "divrec/div/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "divrec/errors.hpp"
#include "divrec/nn/ops.hpp"

namespace divrec::div {

void DivergenceConfig::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0)) {
    throw ContractError("divergence weights must be nonnegative (alpha=" + std::to_string(alpha) +
                        ", beta=" + std::to_string(beta) + ", gamma=" + std::to_string(gamma) + ")");
  }
}

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || x.size() != y.size()) {
    throw DivergenceError("vectors of size " + std::to_string(x.size()) + " and " + std::to_string(y.size()) +
                          " cannot be compared");
  }
}

void check_distribution(std::span<const double> p) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DivergenceError("distribution has a negative or non-finite entry");
    total += v;
  }
  if (std::abs(total - 1.0) > kDistTolerance) {
    throw DivergenceError("distribution sums to " + std::to_string(total));
  }
}

double plogp_ratio(double p, double q) { return p > 0.0 ? p * std::log(p / std::max(q, kLogClamp)) : 0.0; }

}  // namespace

double cosine(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * y[i];
    nx += x[i] * x[i];
    ny += y[i] * y[i];
  }
  if (nx == 0.0 || ny == 0.0) throw DivergenceError("cosine of a zero vector is undefined");
  return std::clamp(dot / (std::sqrt(nx) * std::sqrt(ny)), -1.0, 1.0);
}

std::vector<double> softmax(std::span<const double> x) {
  if (x.empty()) throw DivergenceError("softmax of an empty vector");
  const double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) z += out[i] = std::exp(x[i] - mx);
  for (auto& v : out) v /= z;
  return out;
}

double kl(std::span<const double> p, std::span<const double> q) {
  check_pair(p, q);
  check_distribution(p);
  check_distribution(q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += plogp_ratio(p[i], q[i]);
  return s;
}

double js(std::span<const double> p, std::span<const double> q) {
  check_pair(p, q);
  check_distribution(p);
  check_distribution(q);
  // Per element the two arguments are visited in (min, max) order so the
  // floating-point result does not depend on argument order.
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = std::min(p[i], q[i]);
    const double b = std::max(p[i], q[i]);
    const double m = 0.5 * (a + b);
    s += 0.5 * plogp_ratio(a, m) + 0.5 * plogp_ratio(b, m);
  }
  return s;
}

double tv(std::span<const double> p, std::span<const double> q) {
  check_pair(p, q);
  check_distribution(p);
  check_distribution(q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

double d_total(std::span<const double> x, std::span<const double> y, const DivergenceConfig& cfg) {
  cfg.validate();
  const auto px = softmax(x);
  const auto py = softmax(y);
  return cfg.alpha * cosine(x, y) + cfg.beta * js(px, py);
}

double constraint(std::span<const double> x, std::span<const double> y, const DivergenceConfig& cfg) {
  cfg.validate();
  const double c = cosine(x, y);
  const double j = js(softmax(x), softmax(y));
  return cfg.alpha * c + (cfg.paper_literal_sign ? 1.0 : -1.0) * cfg.beta * j;
}

namespace {

nn::Tensor row_sums(const nn::Tensor& a) {
  return nn::matmul(a, nn::Tensor({a.cols(), 1}, std::vector<double>(a.cols(), 1.0)));
}

void check_rows(const nn::Tensor& a, const nn::Tensor& b) {
  if (a.ndim() != 2 || a.shape() != b.shape() || a.numel() == 0) {
    throw ShapeError("paired rows need equal 2-D shapes, got " + nn::shape_str(a.shape()) + " and " +
                     nn::shape_str(b.shape()));
  }
}

}  // namespace

nn::Tensor cosine_rows(const nn::Tensor& a, const nn::Tensor& b) {
  check_rows(a, b);
  auto dot = row_sums(nn::mul(a, b));
  auto na = row_sums(nn::mul(a, a));
  auto nb = row_sums(nn::mul(b, b));
  for (std::size_t i = 0; i < na.numel(); ++i) {
    if (na.at(i) == 0.0 || nb.at(i) == 0.0) throw DivergenceError("cosine of a zero vector is undefined");
  }
  return nn::mean(nn::div(dot, nn::sqrt(nn::mul(na, nb))));
}

nn::Tensor js_rows(const nn::Tensor& a, const nn::Tensor& b) {
  check_rows(a, b);
  auto lpa = nn::log_softmax_rows(a);
  auto lpb = nn::log_softmax_rows(b);
  auto pa = nn::exp(lpa);
  auto pb = nn::exp(lpb);
  auto lm = nn::log(nn::add_scalar(nn::scale(nn::add(pa, pb), 0.5), 1e-300));
  auto terms = nn::add(nn::mul(pa, nn::sub(lpa, lm)), nn::mul(pb, nn::sub(lpb, lm)));
  return nn::scale(nn::sum(terms), 0.5 / static_cast<double>(a.rows()));
}

nn::Tensor d_total_rows(const nn::Tensor& a, const nn::Tensor& b, const DivergenceConfig& cfg) {
  cfg.validate();
  return nn::add(nn::scale(cosine_rows(a, b), cfg.alpha), nn::scale(js_rows(a, b), cfg.beta));
}

nn::Tensor constraint_rows(const nn::Tensor& a, const nn::Tensor& b, const DivergenceConfig& cfg) {
  cfg.validate();
  const double sign = cfg.paper_literal_sign ? 1.0 : -1.0;
  return nn::add(nn::scale(cosine_rows(a, b), cfg.alpha), nn::scale(js_rows(a, b), sign * cfg.beta));
}

namespace {

struct Accum {
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    sum2 += v * v;
    ++n;
  }
  MetricStats stats() const {
    MetricStats s;
    s.n_pairs = n;
    if (n == 0) return s;
    s.mean = sum / static_cast<double>(n);
    s.std = std::sqrt(std::max(0.0, sum2 / static_cast<double>(n) - s.mean * s.mean));
    return s;
  }
};

const char* const kMetrics[] = {"cos", "kl", "js", "tv"};

nlohmann::json stats_json(const std::map<std::string, MetricStats>& m) {
  nlohmann::json j;
  for (const auto& [name, s] : m) {
    j[name] = {{"mean", s.mean}, {"std", s.std}, {"n_pairs", s.n_pairs}};
    if (name != "cos") j[name]["mean_bits"] = s.mean / std::numbers::ln2;
  }
  return j;
}

}  // namespace

DiversityReport batch_diversity_report(const EmbeddingBatch& batch) {
  if (batch.class_ids.size() != batch.vectors.size()) {
    throw ReportError("embedding batch has " + std::to_string(batch.vectors.size()) + " vectors but " +
                      std::to_string(batch.class_ids.size()) + " class ids");
  }
  std::vector<std::vector<double>> probs;
  probs.reserve(batch.size());
  for (const auto& v : batch.vectors) probs.push_back(softmax(v));

  std::map<std::string, Accum> overall;
  std::map<std::pair<int, int>, std::map<std::string, Accum>> by_pair;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t j = i + 1; j < batch.size(); ++j) {
      if (batch.class_ids[i] == batch.class_ids[j]) continue;
      const double values[] = {cosine(batch.vectors[i], batch.vectors[j]),
                               0.5 * (kl(probs[i], probs[j]) + kl(probs[j], probs[i])), js(probs[i], probs[j]),
                               tv(probs[i], probs[j])};
      const auto key = std::minmax(batch.class_ids[i], batch.class_ids[j]);
      for (std::size_t m = 0; m < 4; ++m) {
        overall[kMetrics[m]].add(values[m]);
        by_pair[key][kMetrics[m]].add(values[m]);
      }
    }
  }
  if (overall.empty()) throw ReportError("diversity report needs at least two classes in the batch");
  DiversityReport r;
  for (const auto& [name, acc] : overall) r.overall[name] = acc.stats();
  for (const auto& [key, metrics] : by_pair) {
    for (const auto& [name, acc] : metrics) r.by_class_pair[key][name] = acc.stats();
  }
  return r;
}

nlohmann::json DiversityReport::to_json() const {
  nlohmann::json j;
  j["units"] = "nats";
  j["overall"] = stats_json(overall);
  for (const auto& [key, m] : by_class_pair) {
    j["pairs"][std::to_string(key.first) + "-" + std::to_string(key.second)] = stats_json(m);
  }
  return j;
}

void save_report(const std::filesystem::path& path, const DiversityReport& report, const std::string& fingerprint) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto j = report.to_json();
  if (!fingerprint.empty()) j["fingerprint"] = fingerprint;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace divrec::div
