#include "divrec/collab/mf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>

#include "divrec/errors.hpp"
#include "divrec/util/hash.hpp"

namespace divrec::collab {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> mean_rows(const std::vector<double>& table, std::size_t dim) {
  std::vector<double> out(dim, 0.0);
  const std::size_t n = dim == 0 ? 0 : table.size() / dim;
  if (n == 0) return out;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < dim; ++j) out[j] += table[r * dim + j];
  }
  for (auto& v : out) v /= static_cast<double>(n);
  return out;
}

}  // namespace

CollabParams init_collab(const std::vector<std::string>& users, const std::vector<std::string>& items,
                         const CollabConfig& cfg) {
  if (cfg.dim == 0) throw ContractError("collaborative embedding dim must be positive");
  CollabParams p;
  p.dim = cfg.dim;
  for (const auto& u : users) p.user_index.try_emplace(u, p.user_index.size());
  for (const auto& i : items) p.item_index.try_emplace(i, p.item_index.size());
  std::mt19937_64 rng(util::mix64(cfg.seed ^ 0x636f6cULL));
  std::normal_distribution<double> init(0.0, cfg.init_scale);
  p.user_emb.resize(p.user_index.size() * cfg.dim);
  p.item_emb.resize(p.item_index.size() * cfg.dim);
  for (auto& v : p.user_emb) v = init(rng);
  for (auto& v : p.item_emb) v = init(rng);
  p.user_bias.assign(p.user_index.size(), 0.0);
  p.item_bias.assign(p.item_index.size(), 0.0);
  return p;
}

CollabParams train_collab(const std::vector<data::SplitSample>& train, const std::vector<std::string>& users,
                          const std::vector<std::string>& items, const CollabConfig& cfg) {
  CollabParams p = init_collab(users, items, cfg);
  struct Example {
    std::size_t u, i;
    double y;
  };
  std::vector<Example> examples;
  auto lookup = [](const std::map<std::string, std::size_t>& idx, const std::string& id, const char* kind) {
    auto it = idx.find(id);
    if (it == idx.end()) throw ContractError(std::string("unseen ") + kind + " id '" + id + "' in collaborative training");
    return it->second;
  };
  for (const auto& s : train) {
    const auto u = lookup(p.user_index, s.user_id, "user");
    examples.push_back({u, lookup(p.item_index, s.target, "item"), 1.0});
    for (const auto& n : s.negatives) examples.push_back({u, lookup(p.item_index, n, "item"), 0.0});
  }

  std::mt19937_64 rng(util::mix64(cfg.seed ^ 0x736764ULL));
  std::vector<std::size_t> order(examples.size());
  std::vector<double> ue(p.dim);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (auto idx : order) {
      const auto& ex = examples[idx];
      double* u = p.user_emb.data() + ex.u * p.dim;
      double* it = p.item_emb.data() + ex.i * p.dim;
      double s = p.global_bias + p.user_bias[ex.u] + p.item_bias[ex.i];
      for (std::size_t j = 0; j < p.dim; ++j) s += u[j] * it[j];
      const double g = sigmoid(s) - ex.y;  // d BCE / d score
      std::copy(u, u + p.dim, ue.begin());
      for (std::size_t j = 0; j < p.dim; ++j) {
        u[j] -= cfg.lr * (g * it[j] + cfg.l2 * u[j]);
        it[j] -= cfg.lr * (g * ue[j] + cfg.l2 * it[j]);
      }
      p.user_bias[ex.u] -= cfg.lr * g;
      p.item_bias[ex.i] -= cfg.lr * g;
      p.global_bias -= cfg.lr * g;
    }
  }
  for (double v : p.user_emb) {
    if (!std::isfinite(v)) throw NumericError("collaborative training diverged (non-finite embedding)");
  }
  return p;
}

std::pair<std::vector<double>, std::vector<double>> collab_embed(const CollabParams& p, const std::string& user,
                                                                 const std::string& item) {
  auto u = p.user_index.find(user);
  auto i = p.item_index.find(item);
  std::vector<double> ue = u == p.user_index.end() ? mean_rows(p.user_emb, p.dim)
                                                   : std::vector<double>(p.user(u->second).begin(), p.user(u->second).end());
  std::vector<double> ie = i == p.item_index.end() ? mean_rows(p.item_emb, p.dim)
                                                   : std::vector<double>(p.item(i->second).begin(), p.item(i->second).end());
  return {std::move(ue), std::move(ie)};
}

double collab_score(const CollabParams& p, const std::string& user, const std::string& item) {
  auto [ue, ie] = collab_embed(p, user, item);
  auto u = p.user_index.find(user);
  auto i = p.item_index.find(item);
  double s = p.global_bias;
  if (u != p.user_index.end()) s += p.user_bias[u->second];
  if (i != p.item_index.end()) s += p.item_bias[i->second];
  for (std::size_t j = 0; j < p.dim; ++j) s += ue[j] * ie[j];
  return s;
}

double collab_predict(const CollabParams& p, const std::string& user, const std::string& item) {
  if (!p.user_index.count(user) || !p.item_index.count(item)) return 0.5;
  return sigmoid(collab_score(p, user, item));
}

void save_collab(const std::filesystem::path& path, const CollabParams& p) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  nlohmann::json j;
  j["version"] = 1;
  j["dim"] = p.dim;
  std::vector<std::string> users(p.user_index.size()), items(p.item_index.size());
  for (const auto& [id, k] : p.user_index) users[k] = id;
  for (const auto& [id, k] : p.item_index) items[k] = id;
  j["users"] = users;
  j["items"] = items;
  j["user_emb"] = p.user_emb;
  j["item_emb"] = p.item_emb;
  j["user_bias"] = p.user_bias;
  j["item_bias"] = p.item_bias;
  j["global_bias"] = p.global_bias;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
}

CollabParams load_collab(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read collaborative checkpoint " + path.string());
  try {
    auto j = nlohmann::json::parse(in);
    CollabParams p;
    p.dim = j.at("dim");
    for (const auto& u : j.at("users")) p.user_index.emplace(u.get<std::string>(), p.user_index.size());
    for (const auto& i : j.at("items")) p.item_index.emplace(i.get<std::string>(), p.item_index.size());
    j.at("user_emb").get_to(p.user_emb);
    j.at("item_emb").get_to(p.item_emb);
    j.at("user_bias").get_to(p.user_bias);
    j.at("item_bias").get_to(p.item_bias);
    p.global_bias = j.at("global_bias");
    if (p.user_emb.size() != p.user_index.size() * p.dim || p.item_emb.size() != p.item_index.size() * p.dim) {
      throw IoError("collaborative checkpoint tables do not match their id lists");
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed collaborative checkpoint " + path.string() + ": " + e.what());
  }
}

void write_prediction_cache(const std::filesystem::path& path, const std::vector<CachedPrediction>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : rows) out << nlohmann::json{{"user", r.user}, {"item", r.item}, {"p", r.p}}.dump() << '\n';
}

}  // namespace divrec::collab
