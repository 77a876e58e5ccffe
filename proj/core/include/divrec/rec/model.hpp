#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "divrec/collab/mf.hpp"
#include "divrec/nn/layers.hpp"
#include "divrec/nn/tensor.hpp"
#include "divrec/prompt/templates.hpp"

namespace divrec::rec {

enum class Variant { kOri, kCol, kLora, kSm, kLoraSm };

std::string variant_name(Variant v);  // "Rec-ori", ...
Variant parse_variant(const std::string& name);  // ConfigError on unknown names

struct RecModelConfig {
  std::size_t vocab_size = 0;
  std::size_t width = 64;
  std::size_t layers = 2;
  std::size_t ff_width = 128;
  std::size_t max_len = 128;
  std::size_t adapter_rank = 4;
  double adapter_scaling = 1.0;
  std::size_t collab_dim = 32;
  std::size_t mapper_hidden = 64;
};

// Parameter groups that a stage may unfreeze.
enum class Group { kBase, kAdapter, kMapper, kCollab };
std::string group_name(Group g);

struct Prediction {
  double p_yes = 0.5;
  double logit_yes = 0.0;
  double logit_no = 0.0;
};

// Index of the collaborative vectors to inject for one prompt.
struct CollabRef {
  std::size_t user = 0;
  std::size_t item = 0;
};

// Causal transformer LM with a low-rank adapter on every projection matrix and
// an Mlp3 mapper from the collaborative space into the token space.
class RecModel {
 public:
  RecModel() = default;
  RecModel(const RecModelConfig& cfg, std::uint64_t seed);

  const RecModelConfig& config() const { return cfg_; }

  // Copies the collaborative tables in; the mapper input width must match.
  void attach_collab(const collab::CollabParams& params);
  bool has_collab() const { return user_table_.defined(); }
  std::optional<CollabRef> collab_ref(const std::string& user, const std::string& item) const;

  // [n, width] hidden states after the final norm.
  nn::Tensor hidden(const prompt::PromptInstance& inst, const std::optional<CollabRef>& vectors) const;
  // Next-token logits over the full vocabulary, [n, vocab].
  nn::Tensor lm_logits(std::span<const std::int32_t> ids) const;
  // [1, 2] logits (yes, no) at the answer position.
  nn::Tensor answer_logits(const prompt::PromptInstance& inst, const std::optional<CollabRef>& vectors) const;
  Prediction predict(const prompt::PromptInstance& inst, const std::optional<CollabRef>& vectors) const;
  nn::Tensor mapped(const nn::Tensor& collab_row) const { return mapper_.forward(collab_row); }

  nn::ParamList group(Group g) const;
  nn::ParamList params() const;
  std::map<Group, std::uint64_t> group_hashes() const;

  // Only the listed groups require grad afterwards.
  void set_trainable_groups(const std::vector<Group>& groups) const;

 private:
  RecModelConfig cfg_;
  nn::Tensor token_embedding_;
  nn::Tensor position_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNorm norm_;
  nn::Linear head_;
  nn::LowRankAdapter adapter_;
  nn::Mlp3 mapper_;
  std::map<std::string, std::size_t> user_index_, item_index_;
  nn::Tensor user_table_, item_table_;
};

void save_rec(const std::filesystem::path& path, const RecModel& model);
// `model` must be constructed with the same config; collab tables are restored
// when the file carries them.
void load_rec(const std::filesystem::path& path, RecModel& model);

}  // namespace divrec::rec
