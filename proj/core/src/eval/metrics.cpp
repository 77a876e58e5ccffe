#include "divrec/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "divrec/errors.hpp"

namespace divrec::eval {

namespace {

void check_samples(const std::vector<RankedSample>& samples) {
  if (samples.empty()) throw ContractError("metrics need at least one sample");
  for (const auto& s : samples) {
    if (s.scores.size() != kCandidates || s.positive >= s.scores.size()) {
      throw ContractError("ranked sample must have " + std::to_string(kCandidates) +
                          " candidates and a valid positive index (got " + std::to_string(s.scores.size()) +
                          ", " + std::to_string(s.positive) + ")");
    }
  }
}

void check_k(std::size_t k) {
  if (k < 1 || k > kCandidates) throw ContractError("k must be in [1, " + std::to_string(kCandidates) + "], got " + std::to_string(k));
}

template <typename F>
double mean_over(const std::vector<RankedSample>& samples, F&& per_sample) {
  double total = 0.0;
  for (const auto& s : samples) total += per_sample(s);
  return total / static_cast<double>(samples.size());
}

}  // namespace

RankedSample shuffled(const std::vector<double>& target_first, std::mt19937_64& rng) {
  std::vector<std::size_t> perm(target_first.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  RankedSample s;
  s.scores.resize(target_first.size());
  for (std::size_t pos = 0; pos < perm.size(); ++pos) {
    s.scores[pos] = target_first[perm[pos]];
    if (perm[pos] == 0) s.positive = pos;
  }
  return s;
}

std::size_t rank_of(const RankedSample& s) {
  const double p = s.scores[s.positive];
  std::size_t ahead = 0;
  for (std::size_t i = 0; i < s.scores.size(); ++i) {
    if (i == s.positive) continue;
    if (s.scores[i] > p || (s.scores[i] == p && i < s.positive)) ++ahead;
  }
  return ahead + 1;
}

double auc(const std::vector<RankedSample>& samples) {
  check_samples(samples);
  return mean_over(samples, [](const RankedSample& s) {
    const double p = s.scores[s.positive];
    double wins = 0.0;
    for (std::size_t i = 0; i < s.scores.size(); ++i) {
      if (i == s.positive) continue;
      if (s.scores[i] < p) wins += 1.0;
      else if (s.scores[i] == p) wins += 0.5;
    }
    return wins / static_cast<double>(s.scores.size() - 1);
  });
}

double hr_at_k(const std::vector<RankedSample>& samples, std::size_t k) {
  check_samples(samples);
  check_k(k);
  return mean_over(samples, [k](const RankedSample& s) { return rank_of(s) <= k ? 1.0 : 0.0; });
}

double ndcg_at_k(const std::vector<RankedSample>& samples, std::size_t k) {
  check_samples(samples);
  check_k(k);
  return mean_over(samples, [k](const RankedSample& s) {
    const auto r = rank_of(s);
    return r <= k ? 1.0 / std::log2(static_cast<double>(r) + 1.0) : 0.0;
  });
}

double mrr_at_k(const std::vector<RankedSample>& samples, std::size_t k) {
  check_samples(samples);
  check_k(k);
  return mean_over(samples, [k](const RankedSample& s) {
    const auto r = rank_of(s);
    return r <= k ? 1.0 / static_cast<double>(r) : 0.0;
  });
}

MetricsReport evaluate(const std::vector<RankedSample>& samples, const std::vector<std::size_t>& ks) {
  MetricsReport r;
  r.n_samples = samples.size();
  r.auc = auc(samples);
  for (auto k : ks) {
    r.hr[k] = hr_at_k(samples, k);
    r.ndcg[k] = ndcg_at_k(samples, k);
    r.mrr[k] = mrr_at_k(samples, k);
  }
  return r;
}

std::vector<std::string> default_columns() {
  return {"auc", "hr@1", "hr@3", "hr@5", "ndcg@3", "ndcg@5", "mrr@3", "mrr@5"};
}

double metric_value(const MetricsReport& r, const std::string& column) {
  if (column == "auc") return r.auc;
  const auto at = column.find('@');
  if (at == std::string::npos) throw ReportError("unknown metric column " + column);
  const auto name = column.substr(0, at);
  const std::size_t k = std::stoul(column.substr(at + 1));
  const auto& table = name == "hr" ? r.hr : name == "ndcg" ? r.ndcg : name == "mrr" ? r.mrr
                                                                                     : throw ReportError("unknown metric column " + column);
  auto it = table.find(k);
  if (it == table.end()) throw ReportError("metric " + column + " was not computed");
  return it->second;
}

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["variant"] = variant;
  j["seed"] = seed;
  j["fingerprint"] = fingerprint;
  j["n_samples"] = n_samples;
  j["auc"] = auc;
  for (const auto& [name, table] : {std::pair{"hr", &hr}, std::pair{"ndcg", &ndcg}, std::pair{"mrr", &mrr}}) {
    for (const auto& [k, v] : *table) j[std::string(name) + "@" + std::to_string(k)] = v;
  }
  return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.variant = j.value("variant", "");
  r.seed = j.value("seed", std::uint64_t{0});
  r.fingerprint = j.value("fingerprint", "");
  r.n_samples = j.value("n_samples", std::size_t{0});
  r.auc = j.at("auc").get<double>();
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto at = it.key().find('@');
    if (at == std::string::npos) continue;
    const auto name = it.key().substr(0, at);
    const std::size_t k = std::stoul(it.key().substr(at + 1));
    auto& table = name == "hr" ? r.hr : name == "ndcg" ? r.ndcg : r.mrr;
    table[k] = it.value().get<double>();
  }
  return r;
}

void write_metrics_json(const std::filesystem::path& path, const std::vector<MetricsReport>& reports) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) arr.push_back(r.to_json());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << nlohmann::ordered_json{{"reports", arr}}.dump(2) << '\n';
}

std::vector<MetricsReport> read_metrics_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<MetricsReport> out;
  try {
    auto j = nlohmann::json::parse(in);
    for (const auto& r : j.at("reports")) out.push_back(MetricsReport::from_json(r));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed metrics file " + path.string() + ": " + e.what());
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsReport>& reports) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const auto cols = default_columns();
  out << "variant,seed,n_samples";
  for (const auto& c : cols) out << ',' << c;
  out << '\n';
  out.precision(10);
  for (const auto& r : reports) {
    out << r.variant << ',' << r.seed << ',' << r.n_samples;
    for (const auto& c : cols) out << ',' << metric_value(r, c);
    out << '\n';
  }
}

}  // namespace divrec::eval
