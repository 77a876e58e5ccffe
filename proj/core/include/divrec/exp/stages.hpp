#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "divrec/eval/metrics.hpp"
#include "divrec/exp/config.hpp"

namespace divrec::exp {

enum class Stage {
  kIngest,
  kAttrs,
  kTrainGan,
  kReconstruct,
  kTrainCollab,
  kFinetuneA,
  kFinetuneB,
  kEval,
  kExportProj,
  kAblateDiv,
  kAblateRec,
};

std::string stage_name(Stage s);
std::optional<Stage> parse_stage(const std::string& name);
const std::vector<Stage>& all_stages();
// The main chain, in dependency order (ablations excluded).
const std::vector<Stage>& pipeline_stages();
std::vector<Stage> prerequisites(Stage s);

struct StageResult {
  Stage stage = Stage::kIngest;
  std::uint64_t seed = 0;
  bool skipped = false;  // up-to-date
  std::filesystem::path dir;
};

// Runs one stage for one seed under <output_dir>/seed_<seed>/<stage>/.
// Missing or stale prerequisites raise DependencyError.
StageResult run_stage(const ExperimentConfig& cfg, Stage stage, std::uint64_t seed, bool force = false);
// Stage B for `v` on top of the stored stage A model, then test metrics.
// Writes nothing; finetune-a must be up to date.
eval::MetricsReport evaluate_variant(const ExperimentConfig& cfg, std::uint64_t seed, rec::Variant v);
std::vector<StageResult> run_pipeline(const ExperimentConfig& cfg, std::uint64_t seed, bool force = false);

struct VariantRow {
  std::string variant;
  std::map<std::string, std::pair<double, double>> metrics;  // column -> (mean, std)
  std::size_t n_seeds = 0;
};

struct ReportTable {
  std::vector<std::string> columns;
  std::vector<VariantRow> rec_rows;
  std::vector<VariantRow> div_rows;  // columns js, cos, disc_accuracy
};

// Mean and sample std (0 for one value).
std::pair<double, double> mean_std(const std::vector<double>& values);
ReportTable aggregate(const std::vector<eval::MetricsReport>& reports, const std::vector<std::string>& columns);
// Reads every seed's outputs; ReportError lists missing runs. Writes
// report.json and report.md under the output directory.
ReportTable report(const ExperimentConfig& cfg);
std::string format_table(const ReportTable& t);

}  // namespace divrec::exp
