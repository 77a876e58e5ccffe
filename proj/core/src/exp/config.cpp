#include "divrec/exp/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "divrec/errors.hpp"
#include "divrec/util/hash.hpp"
#include "divrec/util/toml.hpp"

namespace divrec::exp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Typed access to one table that remembers which keys were read, so that
// leftovers (typos) can be reported.
class Section {
 public:
  Section(const json& root, std::string name) : name_(std::move(name)) {
    if (root.contains(name_)) {
      if (!root.at(name_).is_object()) throw ConfigError("[" + name_ + "] must be a table");
      table_ = root.at(name_);
    }
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    auto it = table_.find(key);
    if (it == table_.end()) return;
    seen_.insert(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("");
        if constexpr (std::is_unsigned_v<T>) {
          if (it->template get<std::int64_t>() < 0) throw ConfigError("");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError("");
      }
      out = it->template get<T>();
    } catch (const std::exception&) {
      throw ConfigError(where(key) + " has the wrong type or sign");
    }
  }

  void read_path(const std::string& key, fs::path& out, const fs::path& base) {
    std::string s;
    read(key, s);
    if (!s.empty()) out = resolve(base, s);
  }

  void finish() const {
    for (const auto& [k, v] : table_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown key " + where(k));
    }
  }

  std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }
  static fs::path resolve(const fs::path& base, const std::string& s) {
    fs::path p(s);
    return p.is_absolute() ? p.lexically_normal() : (base / p).lexically_normal();
  }

 private:
  std::string name_;
  json table_ = json::object();
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

std::uint64_t file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return util::fnv1a(ss.str());
}

// Merges an external table file under `key`; inline keys win.
void merge_file(json& root, const std::string& key, const fs::path& file) {
  json external = util::load_toml(file);
  if (external.contains(key) && external.size() == 1) external = external.at(key);
  json merged = external;
  if (root.contains(key)) merged.update(root.at(key));
  root[key] = merged;
}

}  // namespace

ExperimentConfig config_from_json(const json& input, const fs::path& base) {
  json root = input;
  ExperimentConfig cfg;

  Section ex(root, "experiment");
  ex.read("name", cfg.name);
  std::string out = "out";
  ex.read("output_dir", out);
  cfg.output_dir = Section::resolve(base, out);
  if (const char* env = std::getenv("DIVREC_OUT"); env != nullptr && *env != '\0') cfg.output_dir = env;
  std::vector<std::int64_t> seeds;
  ex.read("seeds", seeds);
  if (!seeds.empty()) {
    cfg.seeds.clear();
    for (auto s : seeds) {
      require(s >= 0, "[experiment] seeds must be non-negative");
      cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  require(std::set<std::uint64_t>(cfg.seeds.begin(), cfg.seeds.end()).size() == cfg.seeds.size(),
          "[experiment] seeds must be unique");
  fs::path gan_file, rec_file;
  ex.read_path("gan_config", gan_file, base);
  ex.read_path("rec_config", rec_file, base);
  ex.finish();
  if (!gan_file.empty()) merge_file(root, "gan", gan_file);
  if (!rec_file.empty()) merge_file(root, "rec", rec_file);

  Section d(root, "data");
  d.read_path("interactions", cfg.data.interactions, base);
  d.read("format", cfg.data.format);
  d.read("domain", cfg.data.domain);
  d.read_path("templates", cfg.data.templates, base);
  d.finish();
  require(!cfg.data.interactions.empty(), "[data] interactions is required");
  require(cfg.data.format == "jsonl", "[data] format must be \"jsonl\"");
  require(!cfg.data.domain.empty(), "[data] domain must not be empty");
  require(fs::is_regular_file(cfg.data.interactions), "[data] interactions file not found: " + cfg.data.interactions.string());
  require(cfg.data.templates.empty() || fs::is_regular_file(cfg.data.templates),
          "[data] templates file not found: " + cfg.data.templates.string());
  cfg.data.content_hash = file_hash(cfg.data.interactions);

  Section p(root, "preprocess");
  p.read("min_user", cfg.preprocess.min_user);
  p.read("min_item", cfg.preprocess.min_item);
  p.read("positive_rating", cfg.preprocess.positive_rating);
  p.read("trunc_lo", cfg.preprocess.trunc_lo);
  p.read("trunc_hi", cfg.preprocess.trunc_hi);
  p.read("title_max_tokens", cfg.preprocess.title_max_tokens);
  p.read("n_negatives", cfg.split.n_negatives);
  p.read("min_prefix", cfg.split.min_prefix);
  p.finish();
  require(cfg.preprocess.positive_rating >= 1 && cfg.preprocess.positive_rating <= 5, "[preprocess] positive_rating must be in 1..5");
  require(cfg.preprocess.trunc_lo >= 3, "[preprocess] trunc_lo must be at least 3 (train and test need history)");
  require(cfg.preprocess.trunc_hi >= cfg.preprocess.trunc_lo, "[preprocess] trunc_hi must be >= trunc_lo");
  require(cfg.preprocess.title_max_tokens >= 1, "[preprocess] title_max_tokens must be positive");
  require(cfg.split.n_negatives == 9, "[preprocess] n_negatives must be 9 (10-candidate protocol)");

  Section a(root, "attributes");
  a.read("k", cfg.attrs.k);
  a.read_path("stoplist", cfg.attrs.stoplist, base);
  a.read_path("predictions", cfg.attrs.predictions, base);
  a.read("n_categories", cfg.attrs.n_categories);
  a.read("max_candidates", cfg.attrs.max_candidates);
  a.finish();
  require(cfg.attrs.k >= 1, "[attributes] k must be positive");
  require(cfg.attrs.n_categories >= cfg.attrs.k, "[attributes] n_categories must be >= k");
  require(cfg.attrs.max_candidates >= 1, "[attributes] max_candidates must be positive");
  require(cfg.attrs.stoplist.empty() || fs::is_regular_file(cfg.attrs.stoplist),
          "[attributes] stoplist not found: " + cfg.attrs.stoplist.string());
  require(cfg.attrs.predictions.empty() || fs::is_regular_file(cfg.attrs.predictions),
          "[attributes] predictions not found: " + cfg.attrs.predictions.string());

  auto& g = cfg.gan.gan;
  Section gs(root, "gan");
  gs.read("alpha", g.div.alpha);
  gs.read("beta", g.div.beta);
  gs.read("gamma", g.div.gamma);
  gs.read("paper_literal_sign", g.div.paper_literal_sign);
  gs.read("width", g.model.width);
  gs.read("layers", g.model.layers);
  gs.read("ff_width", g.model.ff_width);
  gs.read("max_len", g.model.max_len);
  gs.read("disc_hidden1", g.disc_hidden1);
  gs.read("disc_hidden2", g.disc_hidden2);
  gs.read("epochs", g.epochs);
  gs.read("batch_size", g.batch_size);
  gs.read("lr_generator", g.lr_generator);
  gs.read("lr_discriminator", g.lr_discriminator);
  gs.read("disc_steps", g.disc_steps);
  gs.read("group_variants", g.group_variants);
  gs.read("gen_steps", g.gen_steps);
  gs.read("max_pairs", g.max_pairs);
  gs.read("confusion", g.confusion);
  gs.read("confusion_weight", g.confusion_weight);
  gs.read("early_stop", g.early_stop);
  gs.read("patience", g.patience);
  gs.read("min_improvement", g.min_improvement);
  gs.read("ae_epochs", g.ae_epochs);
  gs.read("title_replay", g.title_replay);
  gs.read("keep_checkpoints", g.keep_checkpoints);
  gs.read("history_window", cfg.gan.history_window);
  gs.read("n_train", cfg.gan.n_train);
  gs.read("n_probe", cfg.gan.n_probe);
  gs.finish();
  try {
    g.div.validate();
  } catch (const ContractError& e) {
    throw ConfigError(std::string("[gan] ") + e.what());
  }
  require(g.model.width > 0 && g.model.layers > 0 && g.model.ff_width > 0 && g.model.max_len > 0,
          "[gan] width, layers, ff_width and max_len must be positive");
  require(g.batch_size > 0 && g.disc_steps > 0 && g.gen_steps > 0, "[gan] batch_size and step counts must be positive");
  require(g.lr_generator > 0 && g.lr_discriminator > 0, "[gan] learning rates must be positive");
  require(cfg.gan.history_window >= 1, "[gan] history_window must be positive");
  require(cfg.gan.n_train >= 1 && cfg.gan.n_probe >= 1, "[gan] n_train and n_probe must be positive");

  Section c(root, "collab");
  c.read("dim", cfg.collab.dim);
  c.read("epochs", cfg.collab.epochs);
  c.read("lr", cfg.collab.lr);
  c.read("l2", cfg.collab.l2);
  c.read("init_scale", cfg.collab.init_scale);
  c.finish();
  require(cfg.collab.dim >= 1, "[collab] dim must be positive");
  require(cfg.collab.lr > 0 && cfg.collab.l2 >= 0 && cfg.collab.init_scale > 0, "[collab] lr, l2 and init_scale out of range");

  auto& r = cfg.rec;
  Section rs(root, "rec");
  std::string variant = rec::variant_name(r.variant);
  rs.read("variant", variant);
  rs.read("width", r.model.width);
  rs.read("layers", r.model.layers);
  rs.read("ff_width", r.model.ff_width);
  rs.read("max_len", r.model.max_len);
  rs.read("adapter_rank", r.model.adapter_rank);
  rs.read("adapter_scaling", r.model.adapter_scaling);
  rs.read("mapper_hidden", r.model.mapper_hidden);
  rs.read("lm_epochs", r.train.lm_epochs);
  rs.read("lm_lr", r.train.lm_lr);
  rs.read("stage_a_epochs", r.train.stage_a_epochs);
  rs.read("stage_b_epochs", r.train.stage_b_epochs);
  rs.read("lr_a", r.train.lr_a);
  rs.read("lr_b", r.train.lr_b);
  rs.read("batch_size", r.train.batch_size);
  rs.read("history_window", r.examples.history_window);
  rs.read("negatives", r.examples.negatives);
  rs.read("guidance", r.examples.guidance);
  rs.read("max_train_samples", r.max_train_samples);
  rs.read("use_reconstruction", r.use_reconstruction);
  rs.finish();
  try {
    r.variant = rec::parse_variant(variant);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("[rec] ") + e.what());
  }
  r.model.collab_dim = cfg.collab.dim;
  require(r.model.width > 0 && r.model.layers > 0 && r.model.ff_width > 0 && r.model.mapper_hidden > 0,
          "[rec] width, layers, ff_width and mapper_hidden must be positive");
  require(r.model.max_len >= 32, "[rec] max_len must be at least 32");
  require(r.model.adapter_rank >= 1 && r.model.adapter_scaling > 0, "[rec] adapter_rank and adapter_scaling must be positive");
  require(r.train.lm_lr > 0 && r.train.lr_a > 0 && r.train.lr_b > 0, "[rec] learning rates must be positive");
  require(r.train.batch_size > 0, "[rec] batch_size must be positive");
  require(r.examples.history_window >= 1, "[rec] history_window must be positive");
  require(r.examples.negatives <= 9, "[rec] negatives must be in 0..9 (0 keeps all nine)");
  require(r.max_train_samples >= 1, "[rec] max_train_samples must be positive");

  Section rp(root, "report");
  rp.read("div_ablation", cfg.report.div_ablation);
  rp.read("rec_ablation", cfg.report.rec_ablation);
  rp.finish();

  for (const auto& [k, v] : root.items()) {
    static const std::set<std::string> known{"experiment", "data", "preprocess", "attributes", "gan", "collab", "rec", "report"};
    if (!known.count(k)) throw ConfigError("unknown table [" + k + "]");
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
  auto base = fs::absolute(path).parent_path();
  auto cfg = config_from_json(util::load_toml(path), base);
  cfg.source = fs::absolute(path).lexically_normal();
  return cfg;
}

json canonical_json(const ExperimentConfig& cfg) {
  const auto& g = cfg.gan.gan;
  const auto& r = cfg.rec;
  json j;
  j["name"] = cfg.name;
  j["data"] = {{"interactions", cfg.data.interactions.filename().string()},
               {"content_hash", util::hex64(cfg.data.content_hash)},
               {"format", cfg.data.format},
               {"domain", cfg.data.domain},
               {"templates", cfg.data.templates.empty() ? "builtin" : util::hex64(file_hash(cfg.data.templates))}};
  j["preprocess"] = {{"min_user", cfg.preprocess.min_user},   {"min_item", cfg.preprocess.min_item},
                     {"positive_rating", cfg.preprocess.positive_rating},
                     {"trunc_lo", cfg.preprocess.trunc_lo},   {"trunc_hi", cfg.preprocess.trunc_hi},
                     {"title_max_tokens", cfg.preprocess.title_max_tokens},
                     {"n_negatives", cfg.split.n_negatives}, {"min_prefix", cfg.split.min_prefix}};
  j["attributes"] = {{"k", cfg.attrs.k},
                     {"stoplist", cfg.attrs.stoplist.empty() ? "" : util::hex64(file_hash(cfg.attrs.stoplist))},
                     {"predictions", cfg.attrs.predictions.empty() ? "" : util::hex64(file_hash(cfg.attrs.predictions))},
                     {"n_categories", cfg.attrs.n_categories},
                     {"max_candidates", cfg.attrs.max_candidates}};
  j["gan"] = {{"alpha", g.div.alpha},
              {"beta", g.div.beta},
              {"gamma", g.div.gamma},
              {"paper_literal_sign", g.div.paper_literal_sign},
              {"width", g.model.width},
              {"layers", g.model.layers},
              {"ff_width", g.model.ff_width},
              {"max_len", g.model.max_len},
              {"disc_hidden1", g.disc_hidden1},
              {"disc_hidden2", g.disc_hidden2},
              {"epochs", g.epochs},
              {"batch_size", g.batch_size},
              {"lr_generator", g.lr_generator},
              {"lr_discriminator", g.lr_discriminator},
              {"disc_steps", g.disc_steps},
              {"group_variants", g.group_variants},
              {"gen_steps", g.gen_steps},
              {"max_pairs", g.max_pairs},
              {"confusion", g.confusion},
              {"confusion_weight", g.confusion_weight},
              {"early_stop", g.early_stop},
              {"patience", g.patience},
              {"min_improvement", g.min_improvement},
              {"ae_epochs", g.ae_epochs},
              {"title_replay", g.title_replay},
              {"keep_checkpoints", g.keep_checkpoints},
              {"history_window", cfg.gan.history_window},
              {"n_train", cfg.gan.n_train},
              {"n_probe", cfg.gan.n_probe}};
  j["collab"] = {{"dim", cfg.collab.dim}, {"epochs", cfg.collab.epochs}, {"lr", cfg.collab.lr},
                 {"l2", cfg.collab.l2},   {"init_scale", cfg.collab.init_scale}};
  j["rec"] = {{"variant", rec::variant_name(r.variant)},
              {"width", r.model.width},
              {"layers", r.model.layers},
              {"ff_width", r.model.ff_width},
              {"max_len", r.model.max_len},
              {"adapter_rank", r.model.adapter_rank},
              {"adapter_scaling", r.model.adapter_scaling},
              {"mapper_hidden", r.model.mapper_hidden},
              {"lm_epochs", r.train.lm_epochs},
              {"lm_lr", r.train.lm_lr},
              {"stage_a_epochs", r.train.stage_a_epochs},
              {"stage_b_epochs", r.train.stage_b_epochs},
              {"lr_a", r.train.lr_a},
              {"lr_b", r.train.lr_b},
              {"batch_size", r.train.batch_size},
              {"history_window", r.examples.history_window},
              {"negatives", r.examples.negatives},
              {"guidance", r.examples.guidance},
              {"max_train_samples", r.max_train_samples},
              {"use_reconstruction", r.use_reconstruction}};
  return j;
}

std::string fingerprint(const ExperimentConfig& cfg, std::uint64_t seed) {
  return util::hex64(util::mix64(util::fnv1a(canonical_json(cfg).dump()) ^ util::mix64(seed)));
}

fs::path seed_dir(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.output_dir / ("seed_" + std::to_string(seed));
}

}  // namespace divrec::exp
