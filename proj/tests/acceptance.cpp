// Acceptance suite: one PASS/FAIL line per criterion. Exit code is the number
// of failed criteria. Pipeline criteria (5-10) share one run of the bundled
// synthetic experiment under a temporary output directory.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "divrec/collab/mf.hpp"
#include "divrec/data/interactions.hpp"
#include "divrec/data/synthetic.hpp"
#include "divrec/div/divergence.hpp"
#include "divrec/errors.hpp"
#include "divrec/eval/metrics.hpp"
#include "divrec/exp/config.hpp"
#include "divrec/exp/pipeline.hpp"
#include "divrec/exp/stages.hpp"
#include "divrec/nn/layers.hpp"
#include "divrec/nn/ops.hpp"
#include "divrec/nn/seq_model.hpp"
#include "divrec/prompt/templates.hpp"
#include "divrec/rec/finetune.hpp"
#include "divrec/util/log.hpp"
#include "gradcheck.hpp"

using namespace divrec;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

// Thresholds.
constexpr double kGradTol = 1e-4;
constexpr double kGradBudgetSec = 60.0;
constexpr int kGradSeeds = 10;
constexpr double kDivTol = 1e-12;
constexpr int kDivTrials = 1000;
constexpr double kHr5Band = 0.02;
constexpr std::size_t kNegatives = 9;
constexpr double kSpreadFactor = 2.0;
constexpr std::size_t kMaxGanEpochs = 20;
constexpr double kGanBudgetSec = 300.0;
constexpr std::size_t kBetweenSeedsNeeded = 2;
constexpr double kChance = 1.0 / 6.0;
constexpr double kAccMargin = 0.20;
constexpr std::size_t kAccEpochs = 5;
constexpr double kMinAuc = 0.70;
constexpr double kMinHr5 = 0.70;
constexpr double kPipelineBudgetSec = 600.0;
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  return json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path source_dir() {
  const char* s = std::getenv("DIVREC_SOURCE_DIR");
  return s != nullptr ? fs::path(s) : fs::path(DIVREC_SOURCE_DIR_DEFAULT);
}

nn::Tensor random_tensor(std::size_t r, std::size_t c, nn::Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(r * c);
  for (auto& x : v) x = u(rng);
  return nn::Tensor({r, c}, std::move(v));
}

void randomize(const nn::ParamList& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (const auto& p : params) {
    nn::Tensor t = p.tensor;
    for (auto& v : t.mutable_values()) v = u(rng);
  }
}

// ---- 1. gradients -------------------------------------------------------

struct RecToy {
  std::unique_ptr<prompt::Tokenizer> tok;
  std::unique_ptr<prompt::PromptForge> forge;
  rec::TitleMap titles;
  std::vector<std::string> users, items;
  data::SplitSample sample;
  collab::CollabParams collab;

  RecToy() {
    std::vector<std::string> corpus;
    const char* words[] = {"red apple", "blue car", "green hat", "old boat", "new lamp", "tall door"};
    for (int i = 0; i < 6; ++i) {
      items.push_back("i" + std::to_string(i));
      titles[items.back()] = words[i];
      corpus.push_back(words[i]);
    }
    const auto tpl = prompt::TemplateSet::builtin();
    corpus.push_back(tpl.recommendation);
    tok = std::make_unique<prompt::Tokenizer>(prompt::Tokenizer::build(corpus));
    forge = std::make_unique<prompt::PromptForge>(tpl, *tok);
    users = {"u0", "u1"};
    sample.user_id = "u0";
    sample.history = {"i0", "i1", "i2"};
    sample.target = "i3";
    sample.negatives = {"i4", "i5"};
    collab = collab::init_collab(users, items, {.dim = 6, .init_scale = 0.5, .seed = 1});
  }

  rec::RecModel model(std::uint64_t seed) const {
    rec::RecModelConfig c;
    c.vocab_size = tok->size();
    c.width = 12;
    c.layers = 1;
    c.ff_width = 16;
    c.max_len = 64;
    c.collab_dim = 6;
    c.mapper_hidden = 10;
    rec::RecModel m(c, seed);
    m.attach_collab(collab);
    return m;
  }
};

Outcome criterion_gradients() {
  const auto t0 = Clock::now();
  std::map<std::string, double> worst;
  auto record = [&](const std::string& what, const testing::GradCheckResult& r) {
    worst[what] = std::max(worst[what], r.max_rel_error);
  };
  const RecToy toy;
  for (int seed = 0; seed < kGradSeeds; ++seed) {
    nn::Rng rng(static_cast<std::uint64_t>(seed) + 1000);

    nn::Mlp3 mlp(8, 12, 10, 6, rng);
    auto x = random_tensor(4, 8, rng);
    std::vector<std::int32_t> cls{0, 5, 2, 3};
    record("mlp", testing::grad_check([&] { return nn::cross_entropy(mlp.forward(x), cls); }, mlp.params()));

    nn::SeqModelConfig sc;
    sc.vocab_size = 14;
    sc.width = 8;
    sc.ff_width = 12;
    sc.max_len = 12;
    nn::SeqEncoderDecoder seq(sc, rng);
    std::vector<std::int32_t> src{3, 4, 5, 6, 7, 8}, tgt{4, 5, 6};
    auto w = random_tensor(1, sc.width, rng);
    record("encoder", testing::grad_check([&] { return nn::sum(nn::mul(seq.encode(src), w)); },
                                          seq.encoder_params(), 1e-5, 8));
    std::set<std::string> enc_names;
    for (const auto& p : seq.encoder_params()) enc_names.insert(p.name);
    nn::ParamList dec;
    for (const auto& p : seq.params()) {
      if (!enc_names.count(p.name)) dec.push_back(p);
    }
    auto emb = random_tensor(1, sc.width, rng);
    record("decoder", testing::grad_check([&] { return seq.reconstruction_loss(emb, tgt, 1); }, dec, 1e-5, 8));

    auto model = toy.model(static_cast<std::uint64_t>(seed));
    randomize(model.group(rec::Group::kAdapter), static_cast<std::uint64_t>(seed) + 50);
    auto ex = rec::build_examples({toy.sample}, *toy.forge, toy.titles, &toy.collab, model, {.negatives = 1});
    const auto& e = ex[static_cast<std::size_t>(seed) % ex.size()];
    const std::int32_t answer = *e.prompt.label == 1 ? 0 : 1;
    auto loss = [&] { return nn::cross_entropy(model.answer_logits(e.prompt, e.vectors), std::span(&answer, 1)); };
    model.set_trainable_groups({rec::Group::kAdapter, rec::Group::kMapper});
    record("adapter", testing::grad_check(loss, model.group(rec::Group::kAdapter)));
    record("mapper", testing::grad_check(loss, model.group(rec::Group::kMapper)));

    div::DivergenceConfig dc{.alpha = 0.3 + 0.05 * seed, .beta = 0.7};
    auto a = random_tensor(5, 7, rng), b = random_tensor(5, 7, rng);
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    record("d_total", testing::grad_check([&] { return div::d_total_rows(a, b, dc); }, {{"a", a}, {"b", b}}));
  }
  const double secs = seconds_since(t0);
  double max_err = 0.0;
  std::string detail;
  for (const auto& [k, v] : worst) {
    max_err = std::max(max_err, v);
    detail += k + " " + fmt("%.1e", v) + ", ";
  }
  return {max_err < kGradTol && secs < kGradBudgetSec,
          detail + "max < " + fmt("%.0e", kGradTol) + "; " + fmt("%.1f", secs) + " s < " + fmt("%.0f", kGradBudgetSec) + " s"};
}

// ---- 2. divergences -----------------------------------------------------

std::vector<double> random_dist(std::mt19937_64& rng, std::size_t n) {
  std::gamma_distribution<double> g(0.7, 1.0);
  std::vector<double> v(n);
  double s = 0.0;
  for (auto& x : v) s += (x = g(rng) + 1e-300);
  for (auto& x : v) x /= s;
  return v;
}

Outcome criterion_divergences() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> dim(2, 32);
  std::uniform_real_distribution<double> scale(1e-3, 1e3), coord(-5.0, 5.0);
  std::size_t bad = 0;
  std::string first;
  auto require = [&](bool ok, const char* what) {
    if (!ok && bad++ == 0) first = what;
  };
  for (int t = 0; t < kDivTrials; ++t) {
    const auto n = dim(rng);
    auto p = random_dist(rng, n), q = random_dist(rng, n), r = random_dist(rng, n);
    require(div::js(p, q) == div::js(q, p), "js symmetry");
    require(div::js(p, q) >= -kDivTol && div::js(p, q) <= std::numbers::ln2 + kDivTol, "js range");
    require(div::kl(p, q) >= -kDivTol, "kl >= 0");
    require(std::abs(div::kl(p, p)) <= kDivTol, "kl(p,p) = 0");
    require(div::tv(p, r) <= div::tv(p, q) + div::tv(q, r) + kDivTol, "tv triangle");
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = coord(rng);
    for (auto& v : y) v = coord(rng);
    auto sx = x;
    const double s = scale(rng);
    for (auto& v : sx) v *= s;
    require(std::abs(div::cosine(sx, y) - div::cosine(x, y)) <= kDivTol, "cosine scale invariance");
  }
  return {bad == 0, std::to_string(kDivTrials) + " trials, " + std::to_string(bad) + " violations" +
                        (bad ? " (first: " + first + ")" : "") + ", tol " + fmt("%.0e", kDivTol)};
}

// ---- 3. metrics ---------------------------------------------------------

Outcome criterion_metrics() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u;
  std::uniform_int_distribution<int> coarse(0, 4);
  std::uniform_int_distribution<std::size_t> pos(0, eval::kCandidates - 1);
  auto make = [&](std::size_t n, bool ties) {
    std::vector<eval::RankedSample> out(n);
    for (auto& s : out) {
      s.scores.resize(eval::kCandidates);
      for (auto& v : s.scores) v = ties ? coarse(rng) : u(rng);
      s.positive = pos(rng);
    }
    return out;
  };
  std::size_t bad = 0;
  // AUC per sample: pairwise wins of the positive over each negative, ties half.
  for (bool ties : {false, true}) {
    auto samples = make(1000, ties);
    double sum = 0.0;
    for (const auto& s : samples) {
      double wins = 0.0;
      for (std::size_t j = 0; j < s.scores.size(); ++j) {
        if (j == s.positive) continue;
        const double a = s.scores[s.positive], b = s.scores[j];
        wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
      }
      const double oracle = wins / static_cast<double>(s.scores.size() - 1);
      bad += eval::auc({s}) != oracle;
      sum += oracle;
    }
    bad += std::abs(eval::auc(samples) - sum / 1000.0) > 1e-12;

    // Rank: candidates scored higher, plus equal scores at a lower index.
    for (std::size_t k : {1, 3, 5, 10}) {
      double hr = 0, nd = 0, mr = 0;
      for (const auto& s : samples) {
        std::size_t rank = 1;
        for (std::size_t j = 0; j < s.scores.size(); ++j) {
          const double a = s.scores[s.positive], b = s.scores[j];
          rank += b > a || (b == a && j < s.positive);
        }
        if (rank <= k) {
          hr += 1.0;
          nd += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
          mr += 1.0 / static_cast<double>(rank);
        }
      }
      bad += std::abs(eval::hr_at_k(samples, k) - hr / 1000.0) > 1e-12;
      bad += std::abs(eval::ndcg_at_k(samples, k) - nd / 1000.0) > 1e-12;
      bad += std::abs(eval::mrr_at_k(samples, k) - mr / 1000.0) > 1e-12;
    }
  }
  const double hr5 = eval::hr_at_k(make(10000, false), 5);
  const bool band = std::abs(hr5 - 0.5) <= kHr5Band;
  return {bad == 0 && band, std::to_string(bad) + " oracle mismatches; random HR@5 " + fmt("%.4f", hr5) +
                                " within 0.5 +- " + fmt("%.2f", kHr5Band)};
}

// ---- 4. split -----------------------------------------------------------

std::size_t split_violations(const data::Dataset& ds, const data::Split& split) {
  std::map<std::string, const data::UserHistory*> by_user;
  for (const auto& h : ds.histories) by_user[h.user_id] = &h;
  std::size_t bad = 0;
  auto check_negatives = [&](const data::SplitSample& s, const data::UserHistory& h) {
    bad += s.negatives.size() != kNegatives;
    bad += std::set<std::string>(s.negatives.begin(), s.negatives.end()).size() != s.negatives.size();
    for (const auto& n : s.negatives) {
      bad += std::binary_search(h.all_items.begin(), h.all_items.end(), n);
      bad += std::find(h.items.begin(), h.items.end(), n) != h.items.end();
      bad += ds.catalog.count(n) == 0;
    }
  };
  std::set<std::string> tested;
  for (const auto& s : split.test) {
    const auto& h = *by_user.at(s.user_id);
    tested.insert(s.user_id);
    // Chronologically last: no event of this user is later than the target.
    bad += s.target != h.items.back();
    bad += !std::is_sorted(h.timestamps.begin(), h.timestamps.end());
    bad += *std::max_element(h.timestamps.begin(), h.timestamps.end()) != h.timestamps.back();
    bad += s.history != std::vector<std::string>(h.items.begin(), h.items.end() - 1);
    check_negatives(s, h);
  }
  bad += tested.size() != ds.histories.size();
  for (const auto& s : split.train) {
    const auto& h = *by_user.at(s.user_id);
    bad += s.target == h.items.back() && s.history.size() + 1 == h.items.size();
    check_negatives(s, h);
  }
  return bad;
}

Outcome criterion_split(const exp::ExperimentConfig& cfg) {
  std::size_t bad = 0, datasets = 0, users = 0;
  for (auto seed : kSeeds) {
    auto p = exp::prepare(cfg, seed);
    bad += split_violations(p.dataset, p.split);
    users += p.dataset.histories.size();
    ++datasets;
  }
  for (std::uint64_t s = 0; s < 12; ++s) {
    data::SyntheticConfig sc;
    sc.users = 80 + 20 * s;
    sc.items = 90 + 15 * s;
    sc.seed = 900 + s;
    data::PreprocessConfig pc;
    pc.trunc_hi = 8 + s;
    auto ds = data::preprocess(data::generate_synthetic(sc), pc);
    auto split = data::split_leave_one_out(ds.histories, ds.catalog, {.seed = s, .min_prefix = 1 + s % 4});
    bad += split_violations(ds, split);
    users += ds.histories.size();
    ++datasets;
  }
  return {bad == 0, std::to_string(datasets) + " datasets, " + std::to_string(users) + " users, " +
                        std::to_string(bad) + " violations"};
}

// ---- pipeline criteria --------------------------------------------------

struct PipelineRun {
  std::map<exp::Stage, double> seconds;  // summed over seeds
  std::map<std::uint64_t, double> gan_seconds;
};

PipelineRun run_all(const exp::ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  PipelineRun r;
  for (auto seed : seeds) {
    for (auto stage : exp::pipeline_stages()) {
      const auto t0 = Clock::now();
      exp::run_stage(cfg, stage, seed, true);
      const double s = seconds_since(t0);
      r.seconds[stage] += s;
      if (stage == exp::Stage::kTrainGan) r.gan_seconds[seed] = s;
    }
  }
  return r;
}

json stage_summary(const exp::ExperimentConfig& cfg, std::uint64_t seed, exp::Stage s) {
  return read_json(exp::seed_dir(cfg, seed) / exp::stage_name(s) / "stage.json").at("summary");
}

Outcome criterion_diversity(const exp::ExperimentConfig& cfg, const PipelineRun& run) {
  bool ok = cfg.gan.gan.epochs <= kMaxGanEpochs;
  std::string detail;
  for (auto seed : kSeeds) {
    const auto g = stage_summary(cfg, seed, exp::Stage::kTrainGan);
    const auto spread = read_json(exp::seed_dir(cfg, seed) / "export-proj" / "spread.json");
    const double cu = g.at("probe_cos_untrained"), ct = g.at("probe_cos_trained");
    const double ju = g.at("probe_js_untrained"), jt = g.at("probe_js_trained");
    const double ratio = spread.at("spread_ratio");
    const double secs = run.gan_seconds.at(seed);
    ok = ok && ct < cu && jt > ju && ratio >= kSpreadFactor && secs < kGanBudgetSec;
    detail += "seed " + std::to_string(seed) + ": cos " + fmt("%.3f", cu) + "->" + fmt("%.3f", ct) + ", js " +
              fmt("%.3f", ju) + "->" + fmt("%.3f", jt) + ", spread x" + fmt("%.2f", ratio) + ", " +
              fmt("%.0f", secs) + " s; ";
  }
  return {ok, detail + "need spread >= x" + fmt("%.0f", kSpreadFactor) + ", <= " + std::to_string(kMaxGanEpochs) +
                  " epochs, < " + fmt("%.0f", kGanBudgetSec) + " s"};
}

Outcome criterion_ablation(const exp::ExperimentConfig& cfg) {
  std::size_t all_below = 0, between = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    exp::run_stage(cfg, exp::Stage::kAblateDiv, seed, true);
    const auto v = read_json(exp::seed_dir(cfg, seed) / "ablate-div" / "ablation.json").at("variants");
    const double ori = v.at("Div-ori").at("js"), all = v.at("Div-all").at("js");
    const double cos = v.at("Div-cos").at("js"), js = v.at("Div-JS").at("js");
    all_below += all < ori;
    between += all < cos && cos < ori && all < js && js < ori;
    detail += "seed " + std::to_string(seed) + ": all " + fmt("%.3f", all) + " JS " + fmt("%.3f", js) + " cos " +
              fmt("%.3f", cos) + " ori " + fmt("%.3f", ori) + "; ";
  }
  return {all_below == kSeeds.size() && between >= kBetweenSeedsNeeded,
          detail + "all<ori on " + std::to_string(all_below) + "/3, cos and JS between on " + std::to_string(between) +
              "/3 (need 3 and " + std::to_string(kBetweenSeedsNeeded) + ")"};
}

Outcome criterion_discriminator(const exp::ExperimentConfig& cfg) {
  bool ok = true;
  std::string detail;
  for (auto seed : kSeeds) {
    const double acc = stage_summary(cfg, seed, exp::Stage::kTrainGan).at("disc_accuracy_best5");
    ok = ok && acc >= kChance + kAccMargin;
    detail += "seed " + std::to_string(seed) + " " + fmt("%.3f", acc) + "; ";
  }
  return {ok, detail + "best probe accuracy in " + std::to_string(kAccEpochs) + " epochs, need >= " +
                  fmt("%.3f", kChance + kAccMargin)};
}

Outcome criterion_recommendation(const exp::ExperimentConfig& cfg, const PipelineRun& run) {
  double total = 0.0;
  for (const auto& [s, t] : run.seconds) total += t;
  bool ok = total < kPipelineBudgetSec;
  double ori_sum = 0.0, col_sum = 0.0;
  std::string detail;
  for (auto seed : kSeeds) {
    const auto m = eval::read_metrics_json(exp::seed_dir(cfg, seed) / "eval" / "metrics.json").at(0);
    const auto col = exp::evaluate_variant(cfg, seed, rec::Variant::kCol);
    ok = ok && m.variant == "Rec-ori" && m.auc >= kMinAuc && m.hr.at(5) >= kMinHr5;
    ori_sum += m.auc;
    col_sum += col.auc;
    detail += "seed " + std::to_string(seed) + ": AUC " + fmt("%.3f", m.auc) + " HR@5 " + fmt("%.3f", m.hr.at(5)) +
              " (Rec-col AUC " + fmt("%.3f", col.auc) + "); ";
  }
  const double n = static_cast<double>(kSeeds.size());
  ok = ok && ori_sum / n >= col_sum / n;
  return {ok, detail + "mean Rec-ori " + fmt("%.3f", ori_sum / n) + " vs Rec-col " + fmt("%.3f", col_sum / n) +
                  "; pipeline " + fmt("%.0f", total) + " s < " + fmt("%.0f", kPipelineBudgetSec) + " s"};
}

// Every group outside `trainable` keeps its hash and every trainable group moves.
bool frozen_ok(const json& log, const std::set<std::string>& expected, std::string& why) {
  std::set<std::string> trainable;
  for (const auto& g : log.at("trainable")) trainable.insert(g.get<std::string>());
  if (trainable != expected) {
    why = "trainable set mismatch in " + log.at("stage").get<std::string>();
    return false;
  }
  for (const auto& [g, h] : log.at("hashes_before").items()) {
    const bool same = log.at("hashes_after").at(g) == h;
    if (trainable.count(g) == same) {
      why = log.at("stage").get<std::string>() + ": group " + g + (same ? " did not move" : " moved while frozen");
      return false;
    }
  }
  return true;
}

Outcome criterion_freezing(const exp::ExperimentConfig& cfg) {
  std::size_t checked = 0;
  for (auto seed : kSeeds) {
    const auto a = read_json(exp::seed_dir(cfg, seed) / "finetune-a" / "log.json").at("stage_a");
    const auto b = read_json(exp::seed_dir(cfg, seed) / "finetune-b" / "log.json").at("stage_b");
    std::string why;
    if (!frozen_ok(a, {"adapter"}, why) || !frozen_ok(b, {"mapper"}, why)) {
      return {false, "seed " + std::to_string(seed) + ": " + why};
    }
    checked += a.at("hashes_before").size() + b.at("hashes_before").size();
  }
  return {true, std::to_string(checked) + " group hashes over 3 seeds; stage A moved only adapter, stage B only mapper"};
}

Outcome criterion_reproducible(const exp::ExperimentConfig& cfg, const fs::path& other) {
  auto again = cfg;
  again.output_dir = other;
  run_all(again, {kSeeds.front()});
  const auto rel = fs::path("eval") / "metrics.json";
  const auto a = slurp(exp::seed_dir(cfg, kSeeds.front()) / rel);
  const auto b = slurp(exp::seed_dir(again, kSeeds.front()) / rel);
  return {!a.empty() && a == b, "seed " + std::to_string(kSeeds.front()) + " metrics.json " + std::to_string(a.size()) +
                                    " bytes, " + (a == b ? "identical" : "different")};
}

}  // namespace

int main() {
  util::set_log_level(util::LogLevel::kWarn);
  const auto tmp = fs::temp_directory_path() / ("divrec_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(tmp);

  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;
  auto cfg = exp::load_config(source_dir() / "configs" / "synthetic.toml");
  cfg.output_dir = tmp / "run_a";
  std::optional<PipelineRun> run;
  std::string pipeline_error;
  auto pipeline = [&]() -> const PipelineRun* {
    if (!run && pipeline_error.empty()) {
      try {
        run = run_all(cfg, kSeeds);
      } catch (const std::exception& e) {
        pipeline_error = e.what();
      }
    }
    if (!run) throw std::runtime_error("pipeline failed: " + pipeline_error);
    return &*run;
  };

  criteria.emplace_back("gradient correctness", criterion_gradients);
  criteria.emplace_back("divergence properties", criterion_divergences);
  criteria.emplace_back("metric oracles", criterion_metrics);
  criteria.emplace_back("split protocol", [&] { return criterion_split(cfg); });
  criteria.emplace_back("diversity-training effect", [&] { return criterion_diversity(cfg, *pipeline()); });
  criteria.emplace_back("ablation ordering", [&] {
    pipeline();
    return criterion_ablation(cfg);
  });
  criteria.emplace_back("discriminator learning", [&] {
    pipeline();
    return criterion_discriminator(cfg);
  });
  criteria.emplace_back("end-to-end recommendation", [&] { return criterion_recommendation(cfg, *pipeline()); });
  criteria.emplace_back("freezing contracts", [&] {
    pipeline();
    return criterion_freezing(cfg);
  });
  criteria.emplace_back("reproducibility", [&] {
    pipeline();
    return criterion_reproducible(cfg, tmp / "run_b");
  });

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  fs::remove_all(tmp);
  return failed;
}
