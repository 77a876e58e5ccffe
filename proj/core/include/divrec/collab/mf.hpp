#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "divrec/data/interactions.hpp"

namespace divrec::collab {

struct CollabConfig {
  std::size_t dim = 32;
  std::size_t epochs = 40;
  double lr = 0.05;
  double l2 = 1e-4;
  double init_scale = 0.1;
  std::uint64_t seed = 0;
};

// Biased matrix factorisation: score = <u, i> + b_u + b_i + b.
struct CollabParams {
  std::size_t dim = 0;
  std::map<std::string, std::size_t> user_index;
  std::map<std::string, std::size_t> item_index;
  std::vector<double> user_emb;  // users x dim
  std::vector<double> item_emb;  // items x dim
  std::vector<double> user_bias;
  std::vector<double> item_bias;
  double global_bias = 0.0;

  std::span<const double> user(std::size_t u) const { return {user_emb.data() + u * dim, dim}; }
  std::span<const double> item(std::size_t i) const { return {item_emb.data() + i * dim, dim}; }
};

CollabParams init_collab(const std::vector<std::string>& users, const std::vector<std::string>& items,
                         const CollabConfig& cfg);

// SGD on BCE: each training sample contributes its target (label 1) and its
// negatives (label 0).
CollabParams train_collab(const std::vector<data::SplitSample>& train, const std::vector<std::string>& users,
                          const std::vector<std::string>& items, const CollabConfig& cfg);

// Raw score; unknown ids fall back to the mean row and zero bias.
double collab_score(const CollabParams& p, const std::string& user, const std::string& item);
// sigmoid(score); 0.5 when either id is unknown.
double collab_predict(const CollabParams& p, const std::string& user, const std::string& item);
std::pair<std::vector<double>, std::vector<double>> collab_embed(const CollabParams& p, const std::string& user,
                                                                 const std::string& item);

void save_collab(const std::filesystem::path& path, const CollabParams& p);
CollabParams load_collab(const std::filesystem::path& path);

struct CachedPrediction {
  std::string user;
  std::string item;
  double p = 0.0;
};
void write_prediction_cache(const std::filesystem::path& path, const std::vector<CachedPrediction>& rows);

}  // namespace divrec::collab
