#include "divrec/rec/finetune.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>

#include "divrec/errors.hpp"
#include "divrec/nn/ops.hpp"
#include "divrec/nn/optim.hpp"
#include "divrec/prompt/tokenizer.hpp"
#include "divrec/util/hash.hpp"
#include "divrec/util/log.hpp"

namespace divrec::rec {

using nn::Tensor;

ExampleOptions options_for(Variant v, ExampleOptions base) {
  if (v == Variant::kCol) {
    base.guidance = false;
    base.inject_vectors = false;
  }
  return base;
}

namespace {

const std::string& title_of(const TitleMap& titles, const std::string& item) {
  auto it = titles.find(item);
  if (it == titles.end()) throw ContractError("no title for item '" + item + "'");
  return it->second;
}

RecExample make_example(const data::SplitSample& s, const std::string& item, int label,
                        const prompt::PromptForge& forge, const TitleMap& titles,
                        const collab::CollabParams* collab, const RecModel& model, const ExampleOptions& opt) {
  prompt::RecPromptInput input;
  const std::size_t from = s.history.size() > opt.history_window ? s.history.size() - opt.history_window : 0;
  for (std::size_t i = from; i < s.history.size(); ++i) input.history_titles.push_back(title_of(titles, s.history[i]));
  input.target_title = title_of(titles, item);
  input.label = label;
  auto guidance = prompt::Guidance::kAbsent;
  if (opt.guidance) {
    if (collab == nullptr) throw ContractError("guidance requested without a collaborative model");
    guidance = prompt::guidance_from_probability(collab::collab_predict(*collab, s.user_id, item));
  }
  auto rendered = forge.render_rec(input, guidance);
  // Long titles can overflow the model; drop the oldest history titles first.
  while (rendered.ids.size() > model.config().max_len && input.history_titles.size() > 1) {
    input.history_titles.erase(input.history_titles.begin());
    rendered = forge.render_rec(input, guidance);
  }
  RecExample ex{s.user_id, item, std::move(rendered), std::nullopt};
  if (opt.inject_vectors) {
    if (!model.has_collab()) throw ContractError("vector injection requested but the model has no collaborative tables");
    ex.vectors = model.collab_ref(s.user_id, item);
  }
  return ex;
}

int label_of(const RecExample& ex) {
  if (!ex.prompt.label) throw ContractError("rec training example for " + ex.user + "/" + ex.item + " has no label");
  return *ex.prompt.label;
}

Tensor example_loss(const RecModel& model, const RecExample& ex, bool use_vectors) {
  const std::int32_t cls = label_of(ex) == 1 ? 0 : 1;  // column 0 is yes
  return nn::cross_entropy(model.answer_logits(ex.prompt, use_vectors ? ex.vectors : std::nullopt),
                           std::span(&cls, 1));
}

}  // namespace

std::vector<RecExample> build_examples(const std::vector<data::SplitSample>& samples,
                                       const prompt::PromptForge& forge, const TitleMap& titles,
                                       const collab::CollabParams* collab, const RecModel& model,
                                       const ExampleOptions& opt) {
  std::vector<RecExample> out;
  for (const auto& s : samples) {
    out.push_back(make_example(s, s.target, 1, forge, titles, collab, model, opt));
    const std::size_t n = opt.negatives == 0 ? s.negatives.size() : std::min(opt.negatives, s.negatives.size());
    for (std::size_t j = 0; j < n; ++j) out.push_back(make_example(s, s.negatives[j], 0, forge, titles, collab, model, opt));
  }
  return out;
}

namespace {

StageLog run_batches(RecModel& model, std::size_t n_items, const std::vector<Group>& groups, std::size_t epochs,
                     double lr, const RecTrainConfig& cfg, const std::string& stage,
                     const std::function<Tensor(std::size_t)>& loss_of) {
  if (cfg.batch_size == 0) throw ContractError("batch_size must be positive");
  StageLog log{stage, groups, {}, model.group_hashes(), {}};
  model.set_trainable_groups(groups);
  nn::ParamList params;
  for (auto g : groups) params = nn::concat(params, model.group(g));
  nn::Adam opt(params, {.lr = lr});
  nn::Rng rng(util::mix64(cfg.seed ^ util::fnv1a(stage)));
  std::vector<std::size_t> order(n_items);
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      opt.zero_grad();
      for (std::size_t i = b; i < end; ++i) {
        Tensor loss = loss_of(order[i]);
        total += loss.item();
        nn::backward(nn::scale(loss, 1.0 / static_cast<double>(end - b)));
      }
      opt.step();
    }
    log.epoch_loss.push_back(n_items == 0 ? 0.0 : total / static_cast<double>(n_items));
    util::log_debug(stage + " epoch " + std::to_string(e + 1) + " loss " + std::to_string(log.epoch_loss.back()));
  }
  model.set_trainable_groups({});
  log.hashes_after = model.group_hashes();
  for (const auto& [g, h] : log.hashes_before) {
    const bool trainable = std::find(groups.begin(), groups.end(), g) != groups.end();
    if (!trainable && log.hashes_after.at(g) != h) {
      throw ContractError(stage + " changed frozen parameter group '" + group_name(g) + "'");
    }
  }
  return log;
}

}  // namespace

StageLog pretrain_lm(RecModel& model, const std::vector<std::vector<std::int32_t>>& sequences,
                     const RecTrainConfig& cfg) {
  std::vector<std::vector<std::int32_t>> usable;
  for (const auto& s : sequences) {
    if (s.size() >= 2) usable.push_back(std::vector<std::int32_t>(s.begin(), s.begin() + std::min(s.size(), model.config().max_len)));
  }
  return run_batches(model, usable.size(), {Group::kBase}, cfg.lm_epochs, cfg.lm_lr, cfg, "pretrain-lm",
                     [&](std::size_t i) {
                       const auto& s = usable[i];
                       std::span<const std::int32_t> in(s.data(), s.size() - 1);
                       std::span<const std::int32_t> next(s.data() + 1, s.size() - 1);
                       return nn::cross_entropy(model.lm_logits(in), next);
                     });
}

StageLog train_stage(RecModel& model, const std::vector<RecExample>& examples, const std::vector<Group>& groups,
                     std::size_t epochs, double lr, const RecTrainConfig& cfg, const std::string& stage,
                     bool use_vectors) {
  for (const auto& ex : examples) label_of(ex);
  return run_batches(model, examples.size(), groups, epochs, lr, cfg, stage,
                     [&](std::size_t i) { return example_loss(model, examples[i], use_vectors); });
}

StageLog finetune_stage_a(RecModel& model, const std::vector<RecExample>& examples, const RecTrainConfig& cfg) {
  return train_stage(model, examples, {Group::kAdapter}, cfg.stage_a_epochs, cfg.lr_a, cfg, "finetune-a", false);
}

std::vector<Group> stage_b_groups(Variant v) {
  switch (v) {
    case Variant::kOri: return {Group::kMapper};
    case Variant::kLora: return {Group::kAdapter, Group::kMapper};
    case Variant::kSm: return {Group::kCollab, Group::kMapper};
    case Variant::kLoraSm: return {Group::kAdapter, Group::kCollab, Group::kMapper};
    case Variant::kCol: break;
  }
  throw ContractError("Rec-col has no stage B");
}

StageLog finetune_stage_b(RecModel& model, const std::vector<RecExample>& examples, const RecTrainConfig& cfg,
                          Variant variant) {
  if (!model.has_collab()) throw ContractError("stage B needs collaborative parameters attached to the model");
  return train_stage(model, examples, stage_b_groups(variant), cfg.stage_b_epochs, cfg.lr_b, cfg, "finetune-b", true);
}

double mean_bce(const RecModel& model, const std::vector<RecExample>& examples, bool use_vectors) {
  if (examples.empty()) throw ContractError("mean_bce: no examples");
  nn::NoGradGuard guard;
  double total = 0.0;
  for (const auto& ex : examples) total += example_loss(model, ex, use_vectors).item();
  return total / static_cast<double>(examples.size());
}

EvalOutput score_samples(const RecModel& model, const std::vector<data::SplitSample>& samples,
                         const prompt::PromptForge& forge, const TitleMap& titles,
                         const collab::CollabParams* collab, const ExampleOptions& opt, std::uint64_t seed) {
  EvalOutput out;
  std::mt19937_64 rng(util::mix64(seed ^ 0x6576616cULL));
  ExampleOptions all = opt;
  all.negatives = 0;
  for (const auto& s : samples) {
    auto examples = build_examples({s}, forge, titles, collab, model, all);
    if (examples.size() != eval::kCandidates) {
      throw ContractError("sample for user " + s.user_id + " has " + std::to_string(examples.size()) + " candidates");
    }
    std::vector<double> scores;
    for (const auto& ex : examples) {
      const double p = model.predict(ex.prompt, ex.vectors).p_yes;
      scores.push_back(p);
      out.rows.push_back({ex.user, ex.item, p, *ex.prompt.label});
    }
    out.ranked.push_back(eval::shuffled(scores, rng));
  }
  return out;
}

void write_predictions_jsonl(const std::filesystem::path& path, const std::vector<PredictionRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : rows) {
    out << nlohmann::json{{"user", r.user}, {"item", r.item}, {"p_yes", r.p_yes}, {"label", r.label}}.dump() << '\n';
  }
}

}  // namespace divrec::rec
