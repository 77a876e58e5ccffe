#include "divrec/exp/stages.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>

#include "divrec/errors.hpp"
#include "divrec/exp/pipeline.hpp"
#include "divrec/exp/projection.hpp"
#include "divrec/util/hash.hpp"
#include "divrec/util/log.hpp"

namespace divrec::exp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct StageInfo {
  Stage stage;
  const char* name;
  std::vector<Stage> needs;
};

const std::vector<StageInfo>& table() {
  static const std::vector<StageInfo> t{
      {Stage::kIngest, "ingest", {}},
      {Stage::kAttrs, "attrs", {Stage::kIngest}},
      {Stage::kTrainGan, "train-gan", {Stage::kAttrs}},
      {Stage::kReconstruct, "reconstruct", {Stage::kTrainGan}},
      {Stage::kTrainCollab, "train-collab", {Stage::kIngest}},
      {Stage::kFinetuneA, "finetune-a", {Stage::kReconstruct, Stage::kTrainCollab}},
      {Stage::kFinetuneB, "finetune-b", {Stage::kFinetuneA}},
      {Stage::kEval, "eval", {Stage::kFinetuneB}},
      {Stage::kExportProj, "export-proj", {Stage::kTrainGan}},
      {Stage::kAblateDiv, "ablate-div", {Stage::kAttrs}},
      {Stage::kAblateRec, "ablate-rec", {Stage::kFinetuneA}},
  };
  return t;
}

const StageInfo& info(Stage s) {
  for (const auto& i : table()) {
    if (i.stage == s) return i;
  }
  throw ContractError("unknown stage");
}

constexpr const char* kStageFile = "stage.json";

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed " + path.string() + ": " + e.what());
  }
}

struct Ctx {
  const ExperimentConfig& cfg;
  std::uint64_t seed;
  std::string fp;

  fs::path dir(Stage s) const { return seed_dir(cfg, seed) / info(s).name; }
};

Prepared load_prepared(const Ctx& c) {
  const auto d = c.dir(Stage::kIngest);
  data::Split split{data::read_split_jsonl(d / "train.jsonl"), data::read_split_jsonl(d / "test.jsonl")};
  return assemble(c.cfg, load_dataset(d / "dataset.json"), std::move(split), prompt::Tokenizer::load(d / "vocab.json"));
}

rec::TitleMap load_titles(const Ctx& c, const Prepared& p) {
  if (!c.cfg.rec.use_reconstruction) return p.raw_titles();
  return read_json(c.dir(Stage::kReconstruct) / "titles.json").get<rec::TitleMap>();
}

json stage_log_json(const rec::StageLog& log) {
  json groups = json::array(), before = json::object(), after = json::object();
  for (auto g : log.trainable) groups.push_back(rec::group_name(g));
  for (const auto& [g, h] : log.hashes_before) before[rec::group_name(g)] = util::hex64(h);
  for (const auto& [g, h] : log.hashes_after) after[rec::group_name(g)] = util::hex64(h);
  return {{"stage", log.stage}, {"trainable", groups}, {"epoch_loss", log.epoch_loss},
          {"hashes_before", before}, {"hashes_after", after}};
}

json run_ingest(const Ctx& c, const fs::path& out) {
  auto p = prepare(c.cfg, c.seed);
  save_dataset(out / "dataset.json", p.dataset);
  data::write_split_jsonl(out / "train.jsonl", p.split.train);
  data::write_split_jsonl(out / "test.jsonl", p.split.test);
  p.tok->save(out / "vocab.json");
  const auto& s = p.dataset.stats;
  return {{"users", p.dataset.histories.size()}, {"items", p.dataset.catalog.size()},
          {"train_samples", p.split.train.size()}, {"test_samples", p.split.test.size()},
          {"vocab", p.tok->size()}, {"input_records", s.input}, {"fixpoint_rounds", s.fixpoint_rounds}};
}

json run_attrs(const Ctx& c, const fs::path& out) {
  auto p = load_prepared(c);
  auto attrs = compute_attributes(c.cfg, p);
  attr::save_attributes(out / "attributes.json", attrs, c.fp);
  return {{"labels", attrs.labels}};
}

json run_train_gan(const Ctx& c, const fs::path& out) {
  auto p = load_prepared(c);
  auto attrs = attr::load_attributes(c.dir(Stage::kAttrs) / "attributes.json");
  auto data = make_gan_data(c.cfg, p, attrs);
  auto state = fresh_gan(c.cfg, p, attrs, c.seed);
  auto result = gan::train_gan(state, data, out / "checkpoints", [](const gan::EpochLog& e) {
    util::log_info("train-gan epoch " + std::to_string(e.epoch) + " js " + std::to_string(e.probe.mean("js")) +
                   " cos " + std::to_string(e.probe.mean("cos")) + " acc " + std::to_string(e.probe_accuracy));
  });
  gan::save_gan(out / "model", state);
  gan::write_epoch_csv(out / "epochs.csv", result.epochs);
  div::save_report(out / "diversity_untrained.json", result.baseline, c.fp);
  div::save_report(out / "diversity_trained.json", result.final_report(), c.fp);
  return {{"epochs", result.epochs.size()},
          {"early_stopped", result.early_stopped},
          {"probe_js_untrained", result.baseline.mean("js")},
          {"probe_js_trained", result.final_report().mean("js")},
          {"probe_cos_untrained", result.baseline.mean("cos")},
          {"probe_cos_trained", result.final_report().mean("cos")},
          {"disc_accuracy", result.epochs.empty() ? result.baseline_accuracy : result.epochs.back().probe_accuracy},
          {"disc_accuracy_best5", gan::best_probe_accuracy(result, 5)}};
}

json run_reconstruct(const Ctx& c, const fs::path& out) {
  auto p = load_prepared(c);
  auto state = gan::load_gan(c.dir(Stage::kTrainGan) / "model");
  auto titles = reconstruct_titles(state, p);
  std::size_t exact = 0;
  // Compare against the tokenizer round trip: decodes are lowercased.
  for (const auto& [id, t] : titles) exact += t == p.tok->decode(p.tok->encode(p.dataset.catalog.at(id))) ? 1 : 0;
  write_json(out / "titles.json", titles);
  return {{"titles", titles.size()}, {"exact_matches", exact}};
}

json run_train_collab(const Ctx& c, const fs::path& out) {
  auto p = load_prepared(c);
  auto params = fit_collab(c.cfg, p, c.seed);
  collab::save_collab(out / "collab.json", params);
  std::vector<collab::CachedPrediction> cache;
  for (const auto& s : p.split.test) {
    for (const auto& cand : data::candidates(s)) {
      cache.push_back({s.user_id, cand.item_id, collab::collab_predict(params, s.user_id, cand.item_id)});
    }
  }
  collab::write_prediction_cache(out / "predictions.jsonl", cache);
  auto m = evaluate_collab(params, p, c.seed);
  m.fingerprint = c.fp;
  eval::write_metrics_json(out / "metrics.json", {m});
  return {{"test_auc", m.auc}, {"test_hr@5", m.hr.at(5)}};
}

json run_finetune_a(const Ctx& c, const fs::path& out) {
  auto p = load_prepared(c);
  auto titles = load_titles(c, p);
  auto params = collab::load_collab(c.dir(Stage::kTrainCollab) / "collab.json");
  auto model = make_rec_model(c.cfg, p, params, c.seed);
  auto run = run_stage_a(c.cfg, p, titles, params, model, c.seed);
  rec::save_rec(out / "model.json", model);
  write_json(out / "log.json", {{"pretrain", stage_log_json(run.lm)}, {"stage_a", stage_log_json(run.stage_a)}});
  return {{"lm_loss", run.lm.epoch_loss}, {"stage_a_loss", run.stage_a.epoch_loss}};
}

rec::RecModel load_stage_model(const Ctx& c, const Prepared& p, const collab::CollabParams& params, Stage from) {
  auto model = make_rec_model(c.cfg, p, params, c.seed);
  rec::load_rec(c.dir(from) / "model.json", model);
  return model;
}

json run_finetune_b(const Ctx& c, const fs::path& out) {
  auto p = load_prepared(c);
  auto titles = load_titles(c, p);
  auto params = collab::load_collab(c.dir(Stage::kTrainCollab) / "collab.json");
  auto model = load_stage_model(c, p, params, Stage::kFinetuneA);
  auto log = run_stage_b(c.cfg, p, titles, params, model, c.cfg.rec.variant, c.seed);
  rec::save_rec(out / "model.json", model);
  if (!log) {
    util::log_info("finetune-b: Rec-col has no collaborative stage; stage A model carried over");
    return {{"skipped", "Rec-col"}};
  }
  write_json(out / "log.json", {{"stage_b", stage_log_json(*log)}});
  return {{"stage_b_loss", log->epoch_loss}};
}

json run_eval(const Ctx& c, const fs::path& out) {
  auto p = load_prepared(c);
  auto titles = load_titles(c, p);
  auto params = collab::load_collab(c.dir(Stage::kTrainCollab) / "collab.json");
  auto model = load_stage_model(c, p, params, Stage::kFinetuneB);
  std::vector<rec::PredictionRow> rows;
  auto m = evaluate_rec(c.cfg, p, titles, params, model, c.cfg.rec.variant, c.seed, c.fp, &rows);
  eval::write_metrics_json(out / "metrics.json", {m});
  eval::write_metrics_csv(out / "metrics.csv", {m});
  rec::write_predictions_jsonl(out / "predictions.jsonl", rows);
  return {{"auc", m.auc}, {"hr@5", m.hr.at(5)}};
}

json run_export_proj(const Ctx& c, const fs::path& out) {
  auto p = load_prepared(c);
  auto attrs = attr::load_attributes(c.dir(Stage::kAttrs) / "attributes.json");
  auto data = make_gan_data(c.cfg, p, attrs);
  const auto probe = gan::flatten(data.probe);
  auto untrained = fresh_gan(c.cfg, p, attrs, c.seed);
  auto trained = gan::load_gan(c.dir(Stage::kTrainGan) / "model");
  json summary;
  for (const auto& [name, state] : {std::pair<std::string, const gan::GanState*>{"untrained", &untrained},
                                    std::pair<std::string, const gan::GanState*>{"trained", &trained}}) {
    auto proj = project_pca(gan::probe_embeddings(*state, probe));
    write_projection_csv(out / ("projection_" + name + ".csv"), proj);
    write_projection_svg(out / ("projection_" + name + ".svg"), proj, name + " encoder, seed " + std::to_string(c.seed));
    summary["centroid_spread_" + name] = centroid_spread(proj);
  }
  summary["spread_ratio"] = summary["centroid_spread_trained"].get<double>() /
                            std::max(summary["centroid_spread_untrained"].get<double>(), 1e-300);
  write_json(out / "spread.json", summary);
  return summary;
}

json run_ablate_div(const Ctx& c, const fs::path& out) {
  auto p = load_prepared(c);
  auto attrs = attr::load_attributes(c.dir(Stage::kAttrs) / "attributes.json");
  auto data = make_gan_data(c.cfg, p, attrs);
  json rows = json::object();
  for (const auto& [name, g] : div_variants(c.cfg, c.seed)) {
    auto state = gan::init_gan(g, p.tok->size(), attrs.labels.size() + 1);
    auto result = gan::train_gan(state, data);
    const auto& r = result.final_report();
    rows[name] = {{"js", r.mean("js")}, {"cos", r.mean("cos")},
                  {"disc_accuracy", result.epochs.empty() ? result.baseline_accuracy : result.epochs.back().probe_accuracy},
                  {"disc_accuracy_best5", gan::best_probe_accuracy(result, 5)}};
    util::log_info("ablate-div " + name + " js " + std::to_string(r.mean("js")));
  }
  write_json(out / "ablation.json", {{"fingerprint", c.fp}, {"seed", c.seed}, {"variants", rows}});
  return rows;
}

eval::MetricsReport variant_from_stage_a(const Ctx& c, const Prepared& p, const rec::TitleMap& titles,
                                         const collab::CollabParams& params, rec::Variant v) {
  auto model = load_stage_model(c, p, params, Stage::kFinetuneA);
  run_stage_b(c.cfg, p, titles, params, model, v, c.seed);
  return evaluate_rec(c.cfg, p, titles, params, model, v, c.seed, c.fp);
}

json run_ablate_rec(const Ctx& c, const fs::path& out) {
  auto p = load_prepared(c);
  auto titles = load_titles(c, p);
  auto params = collab::load_collab(c.dir(Stage::kTrainCollab) / "collab.json");
  std::vector<eval::MetricsReport> reports;
  json summary = json::object();
  for (auto v : {rec::Variant::kOri, rec::Variant::kCol, rec::Variant::kLora, rec::Variant::kSm, rec::Variant::kLoraSm}) {
    reports.push_back(variant_from_stage_a(c, p, titles, params, v));
    summary[rec::variant_name(v)] = reports.back().auc;
  }
  eval::write_metrics_json(out / "metrics.json", reports);
  eval::write_metrics_csv(out / "metrics.csv", reports);
  return summary;
}

json dispatch(const Ctx& c, Stage s, const fs::path& out) {
  switch (s) {
    case Stage::kIngest: return run_ingest(c, out);
    case Stage::kAttrs: return run_attrs(c, out);
    case Stage::kTrainGan: return run_train_gan(c, out);
    case Stage::kReconstruct: return run_reconstruct(c, out);
    case Stage::kTrainCollab: return run_train_collab(c, out);
    case Stage::kFinetuneA: return run_finetune_a(c, out);
    case Stage::kFinetuneB: return run_finetune_b(c, out);
    case Stage::kEval: return run_eval(c, out);
    case Stage::kExportProj: return run_export_proj(c, out);
    case Stage::kAblateDiv: return run_ablate_div(c, out);
    case Stage::kAblateRec: return run_ablate_rec(c, out);
  }
  throw ContractError("unknown stage");
}

}  // namespace

std::string stage_name(Stage s) { return info(s).name; }

std::optional<Stage> parse_stage(const std::string& name) {
  for (const auto& i : table()) {
    if (name == i.name) return i.stage;
  }
  return std::nullopt;
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> s = [] {
    std::vector<Stage> out;
    for (const auto& i : table()) out.push_back(i.stage);
    return out;
  }();
  return s;
}

const std::vector<Stage>& pipeline_stages() {
  static const std::vector<Stage> s{Stage::kIngest,      Stage::kAttrs,     Stage::kTrainGan,
                                    Stage::kReconstruct, Stage::kTrainCollab, Stage::kFinetuneA,
                                    Stage::kFinetuneB,   Stage::kEval,      Stage::kExportProj};
  return s;
}

std::vector<Stage> prerequisites(Stage s) { return info(s).needs; }

namespace {

void check_prerequisites(const Ctx& c, const std::vector<Stage>& needs, const std::string& name) {
  for (Stage need : needs) {
    const fs::path f = c.dir(need) / kStageFile;
    if (!fs::exists(f)) {
      throw DependencyError("stage '" + name + "' needs '" + stage_name(need) + "' for seed " + std::to_string(c.seed) +
                            "; run `divrec " + stage_name(need) + "` first");
    }
    const auto theirs = read_json(f).value("fingerprint", std::string{});
    if (theirs != c.fp) {
      throw DependencyError("stage '" + stage_name(need) + "' output has fingerprint " + theirs +
                            " but the current config is " + c.fp + "; re-run it with --force");
    }
  }
}

}  // namespace

StageResult run_stage(const ExperimentConfig& cfg, Stage stage, std::uint64_t seed, bool force) {
  const Ctx c{cfg, seed, fingerprint(cfg, seed)};
  const fs::path out = c.dir(stage);
  const std::string name = stage_name(stage);
  check_prerequisites(c, prerequisites(stage), name);
  if (!force && fs::exists(out / kStageFile) && read_json(out / kStageFile).value("fingerprint", "") == c.fp) {
    util::log_info(name + " (seed " + std::to_string(seed) + "): up-to-date");
    return {stage, seed, true, out};
  }
  fs::remove_all(out);
  fs::create_directories(out);
  util::log_info(name + " (seed " + std::to_string(seed) + "): running");
  json summary = dispatch(c, stage, out);
  write_json(out / kStageFile, {{"stage", name}, {"seed", seed}, {"fingerprint", c.fp}, {"summary", summary}});
  return {stage, seed, false, out};
}

eval::MetricsReport evaluate_variant(const ExperimentConfig& cfg, std::uint64_t seed, rec::Variant v) {
  const Ctx c{cfg, seed, fingerprint(cfg, seed)};
  check_prerequisites(c, {Stage::kReconstruct, Stage::kTrainCollab, Stage::kFinetuneA}, "evaluate " + rec::variant_name(v));
  auto p = load_prepared(c);
  auto titles = load_titles(c, p);
  auto params = collab::load_collab(c.dir(Stage::kTrainCollab) / "collab.json");
  return variant_from_stage_a(c, p, titles, params, v);
}

std::vector<StageResult> run_pipeline(const ExperimentConfig& cfg, std::uint64_t seed, bool force) {
  std::vector<StageResult> out;
  for (Stage s : pipeline_stages()) out.push_back(run_stage(cfg, s, seed, force));
  return out;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) throw ReportError("mean_std of no values");
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  if (v.size() == 1) return {m, 0.0};
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / static_cast<double>(v.size() - 1))};
}

ReportTable aggregate(const std::vector<eval::MetricsReport>& reports, const std::vector<std::string>& columns) {
  ReportTable t;
  t.columns = columns;
  std::vector<std::string> order;
  std::map<std::string, std::vector<const eval::MetricsReport*>> by_variant;
  for (const auto& r : reports) {
    if (!by_variant.count(r.variant)) order.push_back(r.variant);
    by_variant[r.variant].push_back(&r);
  }
  for (const auto& v : order) {
    VariantRow row{v, {}, by_variant[v].size()};
    for (const auto& col : columns) {
      std::vector<double> xs;
      for (const auto* r : by_variant[v]) xs.push_back(eval::metric_value(*r, col));
      row.metrics[col] = mean_std(xs);
    }
    t.rec_rows.push_back(std::move(row));
  }
  return t;
}

ReportTable report(const ExperimentConfig& cfg) {
  std::vector<std::string> gaps;
  std::vector<eval::MetricsReport> reports;
  std::map<std::string, std::map<std::string, std::vector<double>>> div_values;
  std::vector<std::string> div_order;
  for (auto seed : cfg.seeds) {
    const auto root = seed_dir(cfg, seed);
    const auto fp = fingerprint(cfg, seed);
    auto collect = [&](const fs::path& file, const std::string& what) -> bool {
      if (!fs::exists(file)) {
        gaps.push_back("seed " + std::to_string(seed) + ": " + what + " missing");
        return false;
      }
      return true;
    };
    auto check_fp = [&](const std::string& theirs, const std::string& what) {
      if (theirs != fp) gaps.push_back("seed " + std::to_string(seed) + ": " + what + " has a stale fingerprint");
    };
    if (collect(root / "eval" / "metrics.json", "eval")) {
      for (auto& r : eval::read_metrics_json(root / "eval" / "metrics.json")) {
        check_fp(r.fingerprint, "eval");
        reports.push_back(std::move(r));
      }
    }
    if (cfg.report.rec_ablation && collect(root / "ablate-rec" / "metrics.json", "ablate-rec")) {
      for (auto& r : eval::read_metrics_json(root / "ablate-rec" / "metrics.json")) {
        check_fp(r.fingerprint, "ablate-rec");
        // The main eval row already carries the configured variant.
        if (r.variant != rec::variant_name(cfg.rec.variant)) reports.push_back(std::move(r));
      }
    }
    if (cfg.report.div_ablation && collect(root / "ablate-div" / "ablation.json", "ablate-div")) {
      auto j = read_json(root / "ablate-div" / "ablation.json");
      check_fp(j.value("fingerprint", ""), "ablate-div");
      for (const auto& [name, vals] : j.at("variants").items()) {
        if (!div_values.count(name)) div_order.push_back(name);
        for (const auto& [k, v] : vals.items()) div_values[name][k].push_back(v.get<double>());
      }
    }
  }
  if (!gaps.empty()) {
    std::string msg = "report is missing runs:";
    for (const auto& g : gaps) msg += "\n  " + g;
    throw ReportError(msg);
  }
  std::stable_sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
    auto rank = [](const std::string& v) {
      for (int i = 0; i < 5; ++i) {
        if (rec::variant_name(static_cast<rec::Variant>(i)) == v) return i;
      }
      return 5;
    };
    return rank(a.variant) < rank(b.variant);
  });
  auto table = aggregate(reports, eval::default_columns());
  for (const auto& name : div_order) {
    VariantRow row{name, {}, 0};
    for (const auto& [k, xs] : div_values[name]) {
      row.metrics[k] = mean_std(xs);
      row.n_seeds = xs.size();
    }
    table.div_rows.push_back(std::move(row));
  }

  json j;
  j["seeds"] = cfg.seeds;
  auto rows_json = [](const std::vector<VariantRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) {
      json m = json::object();
      for (const auto& [k, ms] : r.metrics) m[k] = {{"mean", ms.first}, {"std", ms.second}};
      out.push_back({{"variant", r.variant}, {"n_seeds", r.n_seeds}, {"metrics", m}});
    }
    return out;
  };
  j["rec"] = rows_json(table.rec_rows);
  if (!table.div_rows.empty()) j["div"] = rows_json(table.div_rows);
  write_json(cfg.output_dir / "report.json", j);
  std::ofstream md(cfg.output_dir / "report.md");
  md << format_table(table);
  return table;
}

std::string format_table(const ReportTable& t) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  auto emit = [&](const std::vector<VariantRow>& rows, const std::vector<std::string>& cols) {
    out << "| variant | seeds |";
    for (const auto& c : cols) out << ' ' << c << " |";
    out << "\n|---|---|";
    for (std::size_t i = 0; i < cols.size(); ++i) out << "---|";
    out << '\n';
    for (const auto& r : rows) {
      out << "| " << r.variant << " | " << r.n_seeds << " |";
      for (const auto& c : cols) {
        auto it = r.metrics.find(c);
        if (it == r.metrics.end()) {
          out << " - |";
        } else {
          out << ' ' << it->second.first << " ± " << it->second.second << " |";
        }
      }
      out << '\n';
    }
  };
  emit(t.rec_rows, t.columns);
  if (!t.div_rows.empty()) {
    out << '\n';
    emit(t.div_rows, {"js", "cos", "disc_accuracy"});
  }
  return out.str();
}

}  // namespace divrec::exp
