#include "divrec/exp/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <random>

#include "divrec/errors.hpp"
#include "divrec/util/hash.hpp"

namespace divrec::exp {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string> Prepared::users() const {
  std::vector<std::string> out;
  for (const auto& h : dataset.histories) out.push_back(h.user_id);
  return out;
}

std::vector<std::string> Prepared::items() const {
  std::vector<std::string> out;
  for (const auto& [id, t] : dataset.catalog) out.push_back(id);
  return out;
}

prompt::TemplateSet load_templates(const ExperimentConfig& cfg) {
  return cfg.data.templates.empty() ? prompt::TemplateSet::builtin() : prompt::TemplateSet::from_toml(cfg.data.templates);
}

Prepared assemble(const ExperimentConfig& cfg, data::Dataset dataset, data::Split split, prompt::Tokenizer tok) {
  Prepared p;
  p.dataset = std::move(dataset);
  p.split = std::move(split);
  p.tok = std::make_unique<prompt::Tokenizer>(std::move(tok));
  p.forge = std::make_unique<prompt::PromptForge>(load_templates(cfg), *p.tok);
  return p;
}

Prepared prepare(const ExperimentConfig& cfg, std::uint64_t seed) {
  auto raw = data::ingest(cfg.data.interactions, cfg.data.format);
  auto dataset = data::preprocess(raw.interactions, cfg.preprocess);
  auto split_cfg = cfg.split;
  split_cfg.seed = seed;
  auto split = data::split_leave_one_out(dataset.histories, dataset.catalog, split_cfg);
  const auto tpl = load_templates(cfg);
  std::vector<std::string> corpus;
  for (const auto& [id, t] : dataset.catalog) corpus.push_back(t);
  corpus.insert(corpus.end(), {tpl.attribute, tpl.gan_with_attribute, tpl.gan_plain, tpl.recommendation, cfg.data.domain});
  auto tok = prompt::Tokenizer::build(corpus);
  return assemble(cfg, std::move(dataset), std::move(split), std::move(tok));
}

void save_dataset(const fs::path& path, const data::Dataset& d) {
  json j;
  j["histories"] = json::array();
  for (const auto& h : d.histories) {
    j["histories"].push_back({{"user_id", h.user_id},
                              {"items", h.items},
                              {"titles", h.titles},
                              {"timestamps", h.timestamps},
                              {"all_items", h.all_items}});
  }
  j["catalog"] = d.catalog;
  const auto& s = d.stats;
  j["stats"] = {{"input", s.input},
                {"after_rating", s.after_rating},
                {"after_count_filter", s.after_count_filter},
                {"users_after_filter", s.users_after_filter},
                {"items_after_filter", s.items_after_filter},
                {"users_kept", s.users_kept},
                {"fixpoint_rounds", s.fixpoint_rounds}};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
}

data::Dataset load_dataset(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    auto j = json::parse(in);
    data::Dataset d;
    for (const auto& h : j.at("histories")) {
      data::UserHistory u;
      h.at("user_id").get_to(u.user_id);
      h.at("items").get_to(u.items);
      h.at("titles").get_to(u.titles);
      h.at("timestamps").get_to(u.timestamps);
      h.at("all_items").get_to(u.all_items);
      d.histories.push_back(std::move(u));
    }
    j.at("catalog").get_to(d.catalog);
    const auto& s = j.at("stats");
    d.stats = {s.at("input"),        s.at("after_rating"), s.at("after_count_filter"), s.at("users_after_filter"),
               s.at("items_after_filter"), s.at("users_kept"), s.at("fixpoint_rounds")};
    return d;
  } catch (const json::exception& e) {
    throw IoError("malformed dataset file " + path.string() + ": " + e.what());
  }
}

std::vector<attr::HistoryText> attribute_histories(const data::Dataset& dataset, std::size_t window) {
  std::vector<attr::HistoryText> out;
  for (const auto& h : dataset.histories) {
    std::vector<std::string> t(h.titles.begin(), h.titles.end() - 1);
    const std::size_t from = t.size() > window ? t.size() - window : 0;
    out.push_back({h.user_id, {t.begin() + static_cast<long>(from), t.end()}});
  }
  return out;
}

attr::AttributeSet compute_attributes(const ExperimentConfig& cfg, const Prepared& p) {
  attr::Predictions preds;
  if (!cfg.attrs.predictions.empty()) {
    preds = attr::read_external_predictions(cfg.attrs.predictions);
  } else {
    std::vector<std::string> titles;
    for (const auto& [id, t] : p.dataset.catalog) titles.push_back(t);
    auto predictor = attr::CooccurrencePredictor::build(titles, {cfg.attrs.n_categories, cfg.attrs.max_candidates});
    std::vector<attr::AttributeSample> samples;
    for (const auto& h : attribute_histories(p.dataset, std::numeric_limits<std::size_t>::max())) {
      samples.push_back({h.sample_id, p.forge->render_attribute(h.titles, cfg.data.domain)});
    }
    preds = attr::predict_attributes(samples, *p.tok, predictor);
  }
  std::set<std::string> stop;
  if (!cfg.attrs.stoplist.empty()) stop = attr::read_stoplist(cfg.attrs.stoplist);
  return attr::select_top_k(preds, cfg.attrs.k, stop);
}

gan::GanConfig gan_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  auto g = cfg.gan.gan;
  g.seed = seed;
  return g;
}

gan::GanData make_gan_data(const ExperimentConfig& cfg, const Prepared& p, const attr::AttributeSet& attrs) {
  auto hist = attribute_histories(p.dataset, cfg.gan.history_window);
  if (cfg.gan.n_train + cfg.gan.n_probe > hist.size()) {
    throw ConfigError("[gan] n_train + n_probe = " + std::to_string(cfg.gan.n_train + cfg.gan.n_probe) +
                      " exceeds the " + std::to_string(hist.size()) + " users in the dataset");
  }
  std::vector<attr::HistoryText> train(hist.begin(), hist.begin() + static_cast<long>(cfg.gan.n_train));
  std::vector<attr::HistoryText> probe(hist.end() - static_cast<long>(cfg.gan.n_probe), hist.end());
  std::vector<std::string> titles;
  for (const auto& [id, t] : p.dataset.catalog) titles.push_back(t);
  return gan::build_gan_data(train, probe, attrs, *p.forge, titles);
}

gan::GanState fresh_gan(const ExperimentConfig& cfg, const Prepared& p, const attr::AttributeSet& attrs,
                        std::uint64_t seed) {
  return gan::init_gan(gan_config(cfg, seed), p.tok->size(), attrs.labels.size() + 1);
}

std::vector<std::pair<std::string, gan::GanConfig>> div_variants(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto base = gan_config(cfg, seed);
  auto no_cos = base, no_js = base, none = base;
  no_cos.div.alpha = 0.0;
  no_js.div.beta = 0.0;
  none.div.gamma = 0.0;
  return {{"Div-ori", base}, {"Div-cos", no_cos}, {"Div-JS", no_js}, {"Div-all", none}};
}

rec::TitleMap reconstruct_titles(const gan::GanState& state, const Prepared& p) {
  rec::TitleMap out;
  for (const auto& [id, t] : p.dataset.catalog) {
    auto r = gan::reconstruct(state, *p.tok, t);
    // An empty decode would leave a hole in the prompt; keep the source title.
    out[id] = r.empty() ? t : r;
  }
  return out;
}

collab::CollabParams fit_collab(const ExperimentConfig& cfg, const Prepared& p, std::uint64_t seed) {
  auto c = cfg.collab;
  c.seed = seed;
  return collab::train_collab(p.split.train, p.users(), p.items(), c);
}

eval::MetricsReport evaluate_collab(const collab::CollabParams& c, const Prepared& p, std::uint64_t seed) {
  std::vector<eval::RankedSample> ranked;
  std::mt19937_64 rng(util::mix64(seed ^ 0x6576616cULL));
  for (const auto& s : p.split.test) {
    std::vector<double> scores{collab::collab_predict(c, s.user_id, s.target)};
    for (const auto& n : s.negatives) scores.push_back(collab::collab_predict(c, s.user_id, n));
    ranked.push_back(eval::shuffled(scores, rng));
  }
  auto r = eval::evaluate(ranked);
  r.variant = "collab";
  r.seed = seed;
  return r;
}

rec::RecModel make_rec_model(const ExperimentConfig& cfg, const Prepared& p, const collab::CollabParams& c,
                             std::uint64_t seed) {
  auto mc = cfg.rec.model;
  mc.vocab_size = p.tok->size();
  mc.collab_dim = c.dim;
  rec::RecModel model(mc, seed);
  model.attach_collab(c);
  return model;
}

rec::RecTrainConfig rec_train_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  auto t = cfg.rec.train;
  t.seed = seed;
  return t;
}

std::vector<data::SplitSample> rec_train_samples(const ExperimentConfig& cfg, const Prepared& p, std::uint64_t seed) {
  auto train = p.split.train;
  if (train.size() > cfg.rec.max_train_samples) {
    std::mt19937_64 rng(util::mix64(seed ^ 0x737562ULL));
    std::shuffle(train.begin(), train.end(), rng);
    train.resize(cfg.rec.max_train_samples);
  }
  // Fresh negatives: the collaborative model was fitted on the split's own.
  data::resample_negatives(train, p.dataset.histories, p.dataset.catalog, seed, 1000);
  return train;
}

std::vector<std::vector<std::int32_t>> lm_corpus(const ExperimentConfig& cfg, const Prepared& p,
                                                 const rec::TitleMap& titles,
                                                 const std::vector<data::SplitSample>& samples) {
  std::vector<std::vector<std::int32_t>> out;
  for (const auto& s : samples) {
    std::vector<std::string> t;
    const std::size_t w = cfg.rec.examples.history_window;
    const std::size_t from = s.history.size() > w ? s.history.size() - w : 0;
    for (std::size_t i = from; i < s.history.size(); ++i) t.push_back(titles.at(s.history[i]));
    t.push_back(titles.at(s.target));
    out.push_back(p.forge->history_ids(t));
  }
  return out;
}

rec::ExampleOptions stage_options(const ExperimentConfig& cfg, rec::Variant variant, char stage) {
  return rec::options_for(stage == 'a' ? rec::Variant::kCol : variant, cfg.rec.examples);
}

RecPipeline run_stage_a(const ExperimentConfig& cfg, const Prepared& p, const rec::TitleMap& titles,
                        const collab::CollabParams& c, rec::RecModel& model, std::uint64_t seed) {
  const auto tc = rec_train_config(cfg, seed);
  const auto samples = rec_train_samples(cfg, p, seed);
  RecPipeline out;
  out.lm = rec::pretrain_lm(model, lm_corpus(cfg, p, titles, samples), tc);
  auto examples = rec::build_examples(samples, *p.forge, titles, &c, model, stage_options(cfg, cfg.rec.variant, 'a'));
  out.stage_a = rec::finetune_stage_a(model, examples, tc);
  return out;
}

std::optional<rec::StageLog> run_stage_b(const ExperimentConfig& cfg, const Prepared& p, const rec::TitleMap& titles,
                                         const collab::CollabParams& c, rec::RecModel& model, rec::Variant variant,
                                         std::uint64_t seed) {
  if (variant == rec::Variant::kCol) return std::nullopt;
  const auto samples = rec_train_samples(cfg, p, seed);
  auto examples = rec::build_examples(samples, *p.forge, titles, &c, model, stage_options(cfg, variant, 'b'));
  return rec::finetune_stage_b(model, examples, rec_train_config(cfg, seed), variant);
}

eval::MetricsReport evaluate_rec(const ExperimentConfig& cfg, const Prepared& p, const rec::TitleMap& titles,
                                 const collab::CollabParams& c, const rec::RecModel& model, rec::Variant variant,
                                 std::uint64_t seed, const std::string& fp, std::vector<rec::PredictionRow>* rows) {
  auto out = rec::score_samples(model, p.split.test, *p.forge, titles, &c, stage_options(cfg, variant, 'e'), seed);
  auto report = eval::evaluate(out.ranked);
  report.variant = rec::variant_name(variant);
  report.seed = seed;
  report.fingerprint = fp;
  if (rows) *rows = std::move(out.rows);
  return report;
}

}  // namespace divrec::exp
