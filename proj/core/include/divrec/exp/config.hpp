#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "divrec/collab/mf.hpp"
#include "divrec/data/interactions.hpp"
#include "divrec/gan/trainer.hpp"
#include "divrec/rec/finetune.hpp"

namespace divrec::exp {

struct DataSection {
  std::filesystem::path interactions;
  std::string format = "jsonl";
  std::string domain = "books";
  std::filesystem::path templates;  // empty: built-in templates
  std::uint64_t content_hash = 0;   // FNV-1a of the interactions file
};

struct AttrSection {
  std::size_t k = 5;
  std::filesystem::path stoplist;
  std::filesystem::path predictions;  // external predictions JSONL, optional
  std::size_t n_categories = 12;
  std::size_t max_candidates = 3;
};

struct GanSection {
  gan::GanConfig gan;
  std::size_t history_window = 2;
  std::size_t n_train = 80;  // first users by id
  std::size_t n_probe = 30;  // last users by id, disjoint from the training users
};

struct RecSection {
  rec::Variant variant = rec::Variant::kOri;
  rec::RecModelConfig model;  // vocab_size and collab_dim are filled at run time
  rec::RecTrainConfig train;
  rec::ExampleOptions examples{.history_window = 5, .guidance = true, .inject_vectors = true, .negatives = 2};
  std::size_t max_train_samples = 600;
  bool use_reconstruction = true;
};

struct ReportSection {
  bool div_ablation = false;
  bool rec_ablation = false;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::filesystem::path source;      // the config file
  std::filesystem::path output_dir;  // resolved; DIVREC_OUT wins when set
  std::vector<std::uint64_t> seeds{1};
  DataSection data;
  data::PreprocessConfig preprocess;
  data::SplitConfig split;
  AttrSection attrs;
  GanSection gan;
  collab::CollabConfig collab;
  RecSection rec;
  ReportSection report;
};

// Parses and validates every field; unknown keys and bad values raise
// ConfigError. Relative paths resolve against the config file's directory.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig config_from_json(const nlohmann::json& root, const std::filesystem::path& base_dir);

// Canonical content of the config (paths as resolved, seeds excluded).
nlohmann::json canonical_json(const ExperimentConfig& cfg);
// 16 hex digits; depends on the canonical config, the dataset bytes and the seed.
std::string fingerprint(const ExperimentConfig& cfg, std::uint64_t seed);

std::filesystem::path seed_dir(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace divrec::exp
