#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "divrec/collab/mf.hpp"
#include "divrec/data/interactions.hpp"
#include "divrec/eval/metrics.hpp"
#include "divrec/prompt/templates.hpp"
#include "divrec/rec/model.hpp"

namespace divrec::rec {

struct RecExample {
  std::string user;
  std::string item;
  prompt::PromptInstance prompt;
  std::optional<CollabRef> vectors;
};

using TitleMap = std::map<std::string, std::string>;  // item id -> title used in prompts

struct ExampleOptions {
  std::size_t history_window = 5;
  bool guidance = true;
  bool inject_vectors = true;
  // Negatives per training sample; 0 keeps all of them.
  std::size_t negatives = 0;
};

// Variant switches applied to ExampleOptions (Rec-col drops vectors and guidance).
ExampleOptions options_for(Variant v, ExampleOptions base);

// One example per candidate: the target with label 1, then its negatives with label 0.
std::vector<RecExample> build_examples(const std::vector<data::SplitSample>& samples,
                                       const prompt::PromptForge& forge, const TitleMap& titles,
                                       const collab::CollabParams* collab, const RecModel& model,
                                       const ExampleOptions& opt);

struct RecTrainConfig {
  std::size_t lm_epochs = 4;
  double lm_lr = 3e-3;
  std::size_t stage_a_epochs = 5;
  std::size_t stage_b_epochs = 2;
  double lr_a = 3e-3;
  double lr_b = 3e-3;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
};

struct StageLog {
  std::string stage;
  std::vector<Group> trainable;
  std::vector<double> epoch_loss;
  std::map<Group, std::uint64_t> hashes_before;
  std::map<Group, std::uint64_t> hashes_after;
};

// Next-token pretraining of the base weights only.
StageLog pretrain_lm(RecModel& model, const std::vector<std::vector<std::int32_t>>& sequences,
                     const RecTrainConfig& cfg);

// BCE on p_yes with only `groups` trainable. Every other group is hashed before
// and after; a change there is a ContractError.
StageLog train_stage(RecModel& model, const std::vector<RecExample>& examples, const std::vector<Group>& groups,
                     std::size_t epochs, double lr, const RecTrainConfig& cfg, const std::string& stage,
                     bool use_vectors);

// Adapter only, prompts without injected vectors.
StageLog finetune_stage_a(RecModel& model, const std::vector<RecExample>& examples, const RecTrainConfig& cfg);
// Mapper only (plus the adapter and/or collaborative tables for the joint variants).
StageLog finetune_stage_b(RecModel& model, const std::vector<RecExample>& examples, const RecTrainConfig& cfg,
                          Variant variant = Variant::kOri);
std::vector<Group> stage_b_groups(Variant v);

double mean_bce(const RecModel& model, const std::vector<RecExample>& examples, bool use_vectors);

struct PredictionRow {
  std::string user;
  std::string item;
  double p_yes = 0.0;
  int label = 0;
};

struct EvalOutput {
  std::vector<eval::RankedSample> ranked;
  std::vector<PredictionRow> rows;
};

// Scores the 10 candidates of every test sample; candidate order is shuffled
// with `seed` before ranking so ties do not favour the target.
EvalOutput score_samples(const RecModel& model, const std::vector<data::SplitSample>& samples,
                         const prompt::PromptForge& forge, const TitleMap& titles,
                         const collab::CollabParams* collab, const ExampleOptions& opt, std::uint64_t seed);

void write_predictions_jsonl(const std::filesystem::path& path, const std::vector<PredictionRow>& rows);

}  // namespace divrec::rec
