// divrec: runs the experiment stages from the command line.
//
//   divrec <stage> --config path [--force] [--seed N]
//   divrec all --config path          every stage of the main chain
//   divrec report --config path
//   divrec synth --out interactions.jsonl
//
// Exit codes: 0 ok, 1 other failure, 2 config error, 3 missing dependency,
// 4 numeric failure.

#include <CLI11.hpp>
#include <iostream>

#include "divrec/data/synthetic.hpp"
#include "divrec/errors.hpp"
#include "divrec/exp/config.hpp"
#include "divrec/exp/stages.hpp"
#include "divrec/util/log.hpp"

using namespace divrec;

namespace {

struct StageArgs {
  std::string config;
  bool force = false;
  std::int64_t seed = -1;
};

std::vector<std::uint64_t> seeds_for(const exp::ExperimentConfig& cfg, const StageArgs& a) {
  if (a.seed >= 0) return {static_cast<std::uint64_t>(a.seed)};
  return cfg.seeds;
}

void print_result(const exp::StageResult& r) {
  std::cout << exp::stage_name(r.stage) << " seed " << r.seed << ": " << (r.skipped ? "up-to-date" : "done") << " ("
            << r.dir.string() << ")\n";
}

int run(int argc, char** argv) {
  CLI::App app{"divrec: diversity-encoder and guided recommendation experiments"};
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");
  app.add_flag("-q,--quiet", quiet, "warnings and errors only");

  std::map<CLI::App*, exp::Stage> stage_cmds;
  std::map<CLI::App*, StageArgs> args;
  auto add_common = [&](CLI::App* sub) {
    auto& a = args[sub];
    sub->add_option("-c,--config", a.config, "experiment TOML")->required()->check(CLI::ExistingFile);
    sub->add_flag("-f,--force", a.force, "re-run even when outputs are up-to-date");
    sub->add_option("-s,--seed", a.seed, "run one seed instead of the config's list")->check(CLI::NonNegativeNumber);
  };
  for (auto s : exp::all_stages()) {
    auto* sub = app.add_subcommand(exp::stage_name(s), "run the " + exp::stage_name(s) + " stage");
    add_common(sub);
    stage_cmds[sub] = s;
  }
  auto* all = app.add_subcommand("all", "run ingest through export-proj (and enabled ablations)");
  add_common(all);
  auto* report = app.add_subcommand("report", "aggregate eval results over the configured seeds");
  add_common(report);

  auto* synth = app.add_subcommand("synth", "write the planted-affinity synthetic interaction log");
  std::string synth_out;
  data::SyntheticConfig sc;
  synth->add_option("-o,--out", synth_out, "output JSONL")->required();
  synth->add_option("--users", sc.users);
  synth->add_option("--items", sc.items);
  synth->add_option("--seed", sc.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (verbose) util::set_log_level(util::LogLevel::kDebug);
  if (quiet) util::set_log_level(util::LogLevel::kWarn);

  if (synth->parsed()) {
    auto log = data::generate_synthetic(sc);
    data::write_interactions_jsonl(synth_out, log);
    std::cout << "wrote " << log.size() << " interactions to " << synth_out << '\n';
    return 0;
  }

  for (auto* sub : app.get_subcommands()) {
    const auto& a = args.at(sub);
    const auto cfg = exp::load_config(a.config);
    if (sub == report) {
      std::cout << exp::format_table(exp::report(cfg));
      return 0;
    }
    for (auto seed : seeds_for(cfg, a)) {
      if (sub == all) {
        for (const auto& r : exp::run_pipeline(cfg, seed, a.force)) print_result(r);
        if (cfg.report.div_ablation) print_result(exp::run_stage(cfg, exp::Stage::kAblateDiv, seed, a.force));
        if (cfg.report.rec_ablation) print_result(exp::run_stage(cfg, exp::Stage::kAblateRec, seed, a.force));
      } else {
        print_result(exp::run_stage(cfg, stage_cmds.at(sub), seed, a.force));
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DependencyError& e) {
    std::cerr << "dependency error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
