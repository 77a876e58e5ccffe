#include "divrec/rec/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "divrec/errors.hpp"
#include "divrec/nn/checkpoint.hpp"
#include "divrec/nn/ops.hpp"
#include "divrec/prompt/tokenizer.hpp"
#include "divrec/util/hash.hpp"

namespace divrec::rec {

using nn::Tensor;

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kOri: return "Rec-ori";
    case Variant::kCol: return "Rec-col";
    case Variant::kLora: return "Rec-lora";
    case Variant::kSm: return "Rec-sm";
    case Variant::kLoraSm: return "Rec-lora&sm";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (auto v : {Variant::kOri, Variant::kCol, Variant::kLora, Variant::kSm, Variant::kLoraSm}) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigError("unknown rec variant '" + name + "' (expected Rec-ori, Rec-col, Rec-lora, Rec-sm or Rec-lora&sm)");
}

std::string group_name(Group g) {
  switch (g) {
    case Group::kBase: return "base";
    case Group::kAdapter: return "adapter";
    case Group::kMapper: return "mapper";
    case Group::kCollab: return "collab";
  }
  return "?";
}

RecModel::RecModel(const RecModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.vocab_size <= prompt::kNumReserved || cfg.width == 0 || cfg.layers == 0) {
    throw ContractError("rec model needs a vocabulary beyond the reserved ids and a positive width/depth");
  }
  if (cfg.adapter_rank == 0 || cfg.collab_dim == 0) throw ContractError("adapter rank and collab dim must be positive");
  nn::Rng rng(util::mix64(seed ^ 0x726563ULL));
  token_embedding_ = nn::init_uniform({cfg.vocab_size, cfg.width}, cfg.width, rng);
  position_ = nn::init_uniform({cfg.max_len, cfg.width}, cfg.width, rng);
  std::vector<std::pair<std::size_t, std::size_t>> targets;
  for (std::size_t i = 0; i < cfg.layers; ++i) {
    blocks_.emplace_back(cfg.width, cfg.ff_width, true, rng);
    auto t = blocks_.back().adapter_targets();
    targets.insert(targets.end(), t.begin(), t.end());
  }
  norm_ = nn::LayerNorm(cfg.width);
  head_ = nn::Linear(cfg.width, cfg.vocab_size, rng);
  adapter_ = nn::LowRankAdapter(cfg.adapter_rank, cfg.adapter_scaling, targets, rng);
  mapper_ = nn::Mlp3(cfg.collab_dim, cfg.mapper_hidden, cfg.mapper_hidden, cfg.width, rng);
}

void RecModel::attach_collab(const collab::CollabParams& params) {
  if (params.dim != cfg_.collab_dim) {
    throw ShapeError("collaborative dim " + std::to_string(params.dim) + " does not match mapper input " +
                     std::to_string(cfg_.collab_dim));
  }
  user_index_ = params.user_index;
  item_index_ = params.item_index;
  user_table_ = Tensor({user_index_.size(), params.dim}, params.user_emb, true);
  item_table_ = Tensor({item_index_.size(), params.dim}, params.item_emb, true);
}

std::optional<CollabRef> RecModel::collab_ref(const std::string& user, const std::string& item) const {
  auto u = user_index_.find(user);
  auto i = item_index_.find(item);
  if (u == user_index_.end() || i == item_index_.end()) return std::nullopt;
  return CollabRef{u->second, i->second};
}

Tensor RecModel::lm_logits(std::span<const std::int32_t> ids) const {
  prompt::PromptInstance inst;
  inst.ids.assign(ids.begin(), ids.end());
  return head_.forward(hidden(inst, std::nullopt));
}

Tensor RecModel::hidden(const prompt::PromptInstance& inst, const std::optional<CollabRef>& vectors) const {
  const std::size_t n = inst.ids.size();
  if (n == 0) throw ContractError("rec model: empty prompt");
  if (n > cfg_.max_len) {
    throw ContractError("rec prompt has " + std::to_string(n) + " tokens, above max_len " + std::to_string(cfg_.max_len));
  }
  Tensor h = nn::embedding(token_embedding_, inst.ids);
  if (vectors) {
    if (!has_collab()) throw ContractError("collaborative vectors requested but no collaborative tables attached");
    const auto up = inst.positions_of(prompt::kUserId);
    const auto ip = inst.positions_of(prompt::kTargetId);
    if (up.size() != 1 || ip.size() != 1) {
      throw ContractError("prompt must hold exactly one <userid> and one <targetid> to inject vectors");
    }
    const std::int32_t uid = static_cast<std::int32_t>(vectors->user);
    const std::int32_t iid = static_cast<std::int32_t>(vectors->item);
    Tensor mu = mapper_.forward(nn::embedding(user_table_, std::span(&uid, 1)));
    Tensor mi = mapper_.forward(nn::embedding(item_table_, std::span(&iid, 1)));
    std::vector<std::pair<std::size_t, Tensor>> subs{{up[0], mu}, {ip[0], mi}};
    if (subs[1].first < subs[0].first) std::swap(subs[0], subs[1]);
    std::vector<Tensor> parts;
    std::size_t at = 0;
    for (const auto& [pos, row] : subs) {
      if (pos > at) parts.push_back(nn::slice_rows(h, at, pos));
      parts.push_back(row);
      at = pos + 1;
    }
    if (at < n) parts.push_back(nn::slice_rows(h, at, n));
    h = nn::concat_rows(parts);
  }
  h = nn::add(h, nn::slice_rows(position_, 0, n));
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    h = blocks_[i].forward(h, &adapter_, i * nn::TransformerBlock::kAdapterSlots);
  }
  return norm_.forward(h);
}

Tensor RecModel::answer_logits(const prompt::PromptInstance& inst, const std::optional<CollabRef>& vectors) const {
  Tensor h = hidden(inst, vectors);
  Tensor last = nn::slice_rows(h, inst.answer_position(), inst.answer_position() + 1);
  const std::size_t cols[2] = {static_cast<std::size_t>(prompt::kYes), static_cast<std::size_t>(prompt::kNo)};
  Tensor w = nn::select_cols(head_.weight, cols);
  Tensor b = nn::select_cols(nn::reshape(head_.bias, {1, cfg_.vocab_size}), cols);
  return nn::add(nn::matmul(last, w), b);
}

Prediction RecModel::predict(const prompt::PromptInstance& inst, const std::optional<CollabRef>& vectors) const {
  nn::NoGradGuard guard;
  Tensor l = answer_logits(inst, vectors);
  Prediction p;
  p.logit_yes = l.at(0);
  p.logit_no = l.at(1);
  p.p_yes = 1.0 / (1.0 + std::exp(p.logit_no - p.logit_yes));
  return p;
}

nn::ParamList RecModel::group(Group g) const {
  nn::ParamList out;
  switch (g) {
    case Group::kBase:
      out.push_back({"token_embedding", token_embedding_});
      out.push_back({"position", position_});
      for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(out, "block." + std::to_string(i));
      norm_.collect(out, "norm");
      head_.collect(out, "head");
      break;
    case Group::kAdapter: out = adapter_.params("adapter"); break;
    case Group::kMapper: out = mapper_.params("mapper"); break;
    case Group::kCollab:
      if (has_collab()) {
        out.push_back({"collab.user", user_table_});
        out.push_back({"collab.item", item_table_});
      }
      break;
  }
  return out;
}

nn::ParamList RecModel::params() const {
  nn::ParamList out;
  for (auto g : {Group::kBase, Group::kAdapter, Group::kMapper, Group::kCollab}) out = nn::concat(out, group(g));
  return out;
}

std::map<Group, std::uint64_t> RecModel::group_hashes() const {
  std::map<Group, std::uint64_t> out;
  for (auto g : {Group::kBase, Group::kAdapter, Group::kMapper, Group::kCollab}) out[g] = nn::param_hash(group(g));
  return out;
}

void RecModel::set_trainable_groups(const std::vector<Group>& groups) const {
  for (auto g : {Group::kBase, Group::kAdapter, Group::kMapper, Group::kCollab}) {
    const bool on = std::find(groups.begin(), groups.end(), g) != groups.end();
    nn::set_trainable(group(g), on);
  }
}

void save_rec(const std::filesystem::path& path, const RecModel& model) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  nlohmann::json j = nn::params_to_json(model.params());
  if (model.has_collab()) {
    const auto& c = model.group(Group::kCollab);
    j["collab_shape"] = {c[0].tensor.dim(0), c[1].tensor.dim(0)};
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
}

void load_rec(const std::filesystem::path& path, RecModel& model) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read rec checkpoint " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed rec checkpoint " + path.string() + ": " + e.what());
  }
  if (j.contains("collab_shape") != model.has_collab()) {
    throw IoError("rec checkpoint " + path.string() + " and model disagree on collaborative tables");
  }
  nn::params_from_json(j, model.params());
}

}  // namespace divrec::rec
