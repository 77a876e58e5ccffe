#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "divrec/attr/attributes.hpp"
#include "divrec/collab/mf.hpp"
#include "divrec/data/interactions.hpp"
#include "divrec/eval/metrics.hpp"
#include "divrec/exp/config.hpp"
#include "divrec/gan/trainer.hpp"
#include "divrec/prompt/templates.hpp"
#include "divrec/prompt/tokenizer.hpp"
#include "divrec/rec/finetune.hpp"

// In-memory building blocks of the experiment. The stage runner persists
// their results; the acceptance suite calls them directly.
namespace divrec::exp {

struct Prepared {
  data::Dataset dataset;
  data::Split split;
  std::unique_ptr<prompt::Tokenizer> tok;
  std::unique_ptr<prompt::PromptForge> forge;

  std::vector<std::string> users() const;
  std::vector<std::string> items() const;
  rec::TitleMap raw_titles() const { return {dataset.catalog.begin(), dataset.catalog.end()}; }
};

prompt::TemplateSet load_templates(const ExperimentConfig& cfg);
// Ingest, preprocess, split and build the vocabulary (catalog titles plus template text).
Prepared prepare(const ExperimentConfig& cfg, std::uint64_t seed);
Prepared assemble(const ExperimentConfig& cfg, data::Dataset dataset, data::Split split, prompt::Tokenizer tok);

void save_dataset(const std::filesystem::path& path, const data::Dataset& dataset);
data::Dataset load_dataset(const std::filesystem::path& path);

// Per-user text: every title but the held-out test target.
std::vector<attr::HistoryText> attribute_histories(const data::Dataset& dataset, std::size_t window);
attr::AttributeSet compute_attributes(const ExperimentConfig& cfg, const Prepared& p);

gan::GanConfig gan_config(const ExperimentConfig& cfg, std::uint64_t seed);
gan::GanData make_gan_data(const ExperimentConfig& cfg, const Prepared& p, const attr::AttributeSet& attrs);
// Untrained encoder with the same seed as train-gan would start from.
gan::GanState fresh_gan(const ExperimentConfig& cfg, const Prepared& p, const attr::AttributeSet& attrs,
                        std::uint64_t seed);

// Div-ori, Div-cos (alpha = 0), Div-JS (beta = 0), Div-all (gamma = 0).
std::vector<std::pair<std::string, gan::GanConfig>> div_variants(const ExperimentConfig& cfg, std::uint64_t seed);

rec::TitleMap reconstruct_titles(const gan::GanState& state, const Prepared& p);
collab::CollabParams fit_collab(const ExperimentConfig& cfg, const Prepared& p, std::uint64_t seed);
eval::MetricsReport evaluate_collab(const collab::CollabParams& c, const Prepared& p, std::uint64_t seed);

rec::RecModel make_rec_model(const ExperimentConfig& cfg, const Prepared& p, const collab::CollabParams& c,
                             std::uint64_t seed);
rec::RecTrainConfig rec_train_config(const ExperimentConfig& cfg, std::uint64_t seed);
// Capped, seeded subset of the training samples with freshly drawn negatives.
std::vector<data::SplitSample> rec_train_samples(const ExperimentConfig& cfg, const Prepared& p, std::uint64_t seed);
std::vector<std::vector<std::int32_t>> lm_corpus(const ExperimentConfig& cfg, const Prepared& p,
                                                 const rec::TitleMap& titles,
                                                 const std::vector<data::SplitSample>& samples);
// Stage A always sees text-only prompts; stage B and evaluation follow the variant.
rec::ExampleOptions stage_options(const ExperimentConfig& cfg, rec::Variant variant, char stage);

struct RecPipeline {
  rec::StageLog lm;
  rec::StageLog stage_a;
  std::optional<rec::StageLog> stage_b;
};

// LM pretraining plus stage A on `model`.
RecPipeline run_stage_a(const ExperimentConfig& cfg, const Prepared& p, const rec::TitleMap& titles,
                        const collab::CollabParams& c, rec::RecModel& model, std::uint64_t seed);
// Stage B for `variant` (no-op for Rec-col).
std::optional<rec::StageLog> run_stage_b(const ExperimentConfig& cfg, const Prepared& p, const rec::TitleMap& titles,
                                         const collab::CollabParams& c, rec::RecModel& model, rec::Variant variant,
                                         std::uint64_t seed);

eval::MetricsReport evaluate_rec(const ExperimentConfig& cfg, const Prepared& p, const rec::TitleMap& titles,
                                 const collab::CollabParams& c, const rec::RecModel& model, rec::Variant variant,
                                 std::uint64_t seed, const std::string& fp,
                                 std::vector<rec::PredictionRow>* rows = nullptr);

}  // namespace divrec::exp
