#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "divrec/attr/attributes.hpp"
#include "divrec/div/divergence.hpp"
#include "divrec/nn/layers.hpp"
#include "divrec/nn/optim.hpp"
#include "divrec/nn/seq_model.hpp"
#include "divrec/prompt/tokenizer.hpp"

namespace divrec::gan {

struct GanConfig {
  div::DivergenceConfig div;
  nn::SeqModelConfig model;  // vocab_size is filled in by init_gan
  std::size_t disc_hidden1 = 64;
  std::size_t disc_hidden2 = 32;

  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double lr_generator = 1e-3;
  double lr_discriminator = 1e-3;
  std::size_t disc_steps = 1;
  std::size_t gen_steps = 1;
  std::size_t max_pairs = 256;
  // Batches hold whole histories: every class variant of each sampled
  // history, so cross-class pairs include a history against its own variants.
  // Off: records from all corpora are shuffled independently.
  bool group_variants = true;

  // Non-saturating confusion term: generator is pushed towards a uniform
  // discriminator output. Off by default.
  bool confusion = false;
  double confusion_weight = 0.1;

  bool early_stop = true;
  std::size_t patience = 3;
  double min_improvement = 1e-4;

  // Autoencoder warm-up on single titles, and single-title reconstruction
  // mixed into every generator step so reconstruct() stays usable.
  std::size_t ae_epochs = 0;
  std::size_t title_replay = 8;

  std::size_t keep_checkpoints = 2;
  std::uint64_t seed = 0;
};

struct GanState {
  GanConfig cfg;
  std::size_t n_classes = 0;
  nn::SeqEncoderDecoder generator;
  nn::Mlp3 discriminator;
  std::size_t epoch = 0;
  bool trained = false;

  nn::ParamList generator_params() const { return generator.params(); }
  nn::ParamList discriminator_params() const { return discriminator.params("disc"); }
};

GanState init_gan(const GanConfig& cfg, std::size_t vocab_size, std::size_t n_classes);

using RecordRefs = std::vector<const attr::AugmentedRecord*>;

struct EncodedBatch {
  nn::Tensor embeddings;  // [n, width], graph-connected unless under NoGradGuard
  std::vector<std::int32_t> class_ids;
};

EncodedBatch encode_batch(const GanState& state, const RecordRefs& records);
div::EmbeddingBatch to_embedding_batch(const EncodedBatch& encoded, const RecordRefs& records);

// Mean multiclass cross-entropy of the discriminator on (detached) embeddings.
nn::Tensor discriminator_loss(const GanState& state, const nn::Tensor& embeddings,
                              std::span<const std::int32_t> class_ids);
double discriminator_accuracy(const GanState& state, const nn::Tensor& embeddings,
                              std::span<const std::int32_t> class_ids);

struct GeneratorLoss {
  nn::Tensor total;
  double reconstruction = 0.0;
  double constraint = 0.0;
  double confusion = 0.0;
  std::size_t pairs = 0;
};

// Reconstruction CE of each record's raw history tokens, plus gamma times the
// mean constraint over up to max_pairs cross-class pairs, plus optional
// replayed single-title reconstruction and confusion terms.
GeneratorLoss generator_loss(const GanState& state, const EncodedBatch& encoded, const RecordRefs& records,
                             nn::Rng& rng, const std::vector<std::vector<std::int32_t>>& replay = {});

struct GanOptimizers {
  nn::Adam generator;
  nn::Adam discriminator;
};

GanOptimizers make_optimizers(const GanState& state);

// One discriminator update on the detached embeddings; returns its loss.
double discriminator_step(GanState& state, GanOptimizers& opt, const EncodedBatch& encoded);
// One generator update; discriminator gradients are discarded afterwards.
GeneratorLoss generator_step(GanState& state, GanOptimizers& opt, const EncodedBatch& encoded,
                             const RecordRefs& records, nn::Rng& rng,
                             const std::vector<std::vector<std::int32_t>>& replay = {});

struct GanData {
  std::vector<std::vector<attr::AugmentedRecord>> train;  // k+1 corpora
  std::vector<std::vector<attr::AugmentedRecord>> probe;  // held-out histories, same classes
  std::vector<std::vector<std::int32_t>> titles;          // single-title token sequences
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss_generator = 0.0;
  double loss_discriminator = 0.0;
  double reconstruction = 0.0;
  double constraint = 0.0;
  double probe_accuracy = 0.0;
  div::DiversityReport probe;
};

struct TrainResult {
  div::DiversityReport baseline;  // probe set before the first update
  double baseline_accuracy = 0.0;
  std::vector<EpochLog> epochs;
  bool early_stopped = false;

  const div::DiversityReport& final_report() const { return epochs.empty() ? baseline : epochs.back().probe; }
};

// One epoch's batches over the k+1 corpora; `flat` is flatten(corpora).
std::vector<RecordRefs> epoch_batches(const std::vector<std::vector<attr::AugmentedRecord>>& corpora,
                                      const RecordRefs& flat, const GanConfig& cfg, nn::Rng& rng);

// Highest probe accuracy over the first `within` epochs (0 if none ran).
double best_probe_accuracy(const TrainResult& result, std::size_t within);

// Alternating optimisation: per batch one (or disc_steps) discriminator
// update on detached embeddings, then gen_steps generator updates. A
// non-finite loss restores the last completed epoch and raises NumericError.
TrainResult train_gan(GanState& state, const GanData& data, const std::filesystem::path& checkpoint_dir = {},
                      const std::function<void(const EpochLog&)>& on_epoch = {});

// Records of every corpus, corpus-major.
RecordRefs flatten(const std::vector<std::vector<attr::AugmentedRecord>>& corpora);
div::EmbeddingBatch probe_embeddings(const GanState& state, const RecordRefs& records);

// Greedy decode, at most 20 tokens, from the pooled embedding of the title.
std::string reconstruct(const GanState& state, const prompt::Tokenizer& tok, const std::string& title);
std::vector<std::int32_t> reconstruct_ids(const GanState& state, std::span<const std::int32_t> ids);
// Fraction of target positions the greedy decode reproduces.
double reconstruction_accuracy(const GanState& state, const std::vector<std::vector<std::int32_t>>& sequences);

void save_gan(const std::filesystem::path& dir, const GanState& state);
GanState load_gan(const std::filesystem::path& dir);

void write_epoch_csv(const std::filesystem::path& path, const std::vector<EpochLog>& epochs);

}  // namespace divrec::gan

namespace divrec::gan {

// Renders k+1 corpora for the training and probe histories and tokenises the
// single titles used for warm-up and replay.
GanData build_gan_data(const std::vector<attr::HistoryText>& train, const std::vector<attr::HistoryText>& probe,
                       const attr::AttributeSet& attrs, const prompt::PromptForge& forge,
                       const std::vector<std::string>& titles);

}  // namespace divrec::gan
