#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "erpo/checkpoint.hpp"
#include "erpo/config.hpp"
#include "erpo/env.hpp"
#include "erpo/errors.hpp"
#include "erpo/evalreport.hpp"
#include "erpo/objective.hpp"
#include "erpo/scheduler.hpp"
#include "erpo/trainer.hpp"

namespace fs = std::filesystem;
using namespace erpo;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string algo;
  std::string out = "out";
  std::vector<std::string> overrides;
  std::string tracker_in;
  std::string tracker_out;
  std::string checkpoint;
  std::vector<double> temps{1.0, 1.1, 1.2};
  int samples = 4;
  std::string split = "train";
  int k = 0;
  std::string stream_path;
  int instances = 100;
  double h = 1e-5;
};

// Config errors exit with 3; everything else raised by the library exits with 1.
struct ConfigFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int fail(int code, std::string_view kind, std::string_view message) {
  std::string flat(message);
  for (auto& c : flat) {
    if (c == '\n') c = ' ';
  }
  std::cerr << fmt::format("erpo: error exit={} kind={} message=\"{}\"\n", code, kind, flat);
  return code;
}

bool is_config_kind(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig:
    case ErrorKind::TemperatureOrder:
    case ErrorKind::DegenerateGroup:
    case ErrorKind::RewardOrder:
    case ErrorKind::UnknownKey:
    case ErrorKind::EmptyMix:
      return true;
    default:
      return false;
  }
}

TrainerConfig resolve_config(const Options& opt, TrainerConfig base) {
  if (!opt.config_path.empty()) base = load_config(opt.config_path);
  for (const auto& kv : opt.overrides) apply_assignment(base, kv);
  if (opt.seed) base.seed = *opt.seed;
  if (!opt.algo.empty()) base.algorithm = parse_algorithm(opt.algo);
  return validate_config(base);
}

TrainerConfig resolve_config(const Options& opt) {
  try {
    return resolve_config(opt, TrainerConfig{});
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::IoFailure || is_config_kind(e.kind())) throw ConfigFailure(e.what());
    throw;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoFailure, fmt::format("cannot write '{}'", path.string()));
  out << text;
}

void write_provenance(const fs::path& out, const TrainerConfig& cfg) {
  fs::create_directories(out);
  save_config(cfg, out / "config.cfg");
  write_text(out / "seed.txt", fmt::format("{}\n", cfg.seed));
}

std::vector<int> split_ids(const TaskSet& tasks, const std::string& split) {
  std::vector<int> ids;
  const int lo = split == "holdout" ? tasks.num_train : 0;
  const int hi = split == "holdout" ? tasks.size() : tasks.num_train;
  for (int id = lo; id < hi; ++id) ids.push_back(id);
  return ids;
}

int cmd_train(const Options& opt) {
  const fs::path out = opt.out;
  TrainerConfig cfg;
  TaskSet tasks;
  TrainState state;
  if (!opt.checkpoint.empty()) {
    auto ckpt = load_checkpoint(opt.checkpoint);
    try {
      cfg = resolve_config(opt, ckpt.config);
    } catch (const Error& e) {
      throw ConfigFailure(e.what());
    }
    tasks = std::move(ckpt.tasks);
    state = std::move(ckpt.state);
  } else {
    cfg = resolve_config(opt);
    tasks = make_taskset(cfg);
    state = init_state(cfg, tasks);
  }
  if (!opt.tracker_in.empty()) {
    auto tracker = restore(opt.tracker_in);
    if (tracker.size() != tasks.num_train) {
      throw Error(ErrorKind::CorruptSnapshot,
                  fmt::format("tracker has {} prompts, taskset has {}", tracker.size(), tasks.num_train));
    }
    state.tracker = std::move(tracker);
  }

  write_provenance(out, cfg);
  {
    std::ofstream ts(out / "taskset.tsv");
    write_taskset(tasks, ts);
  }
  RunOptions run_opts;
  run_opts.checkpoint_dir = out / "checkpoints";
  auto result = resume(cfg, tasks, std::move(state), run_opts);
  {
    std::ofstream stream(out / "stream.jsonl");
    write_stream(result.stream, stream);
  }
  emit_report(result.stream, RunMetadata{std::string(to_string(cfg.algorithm)), cfg.seed, config_hash(cfg)},
              out / "report");
  snapshot(result.state.tracker, out / "tracker.tsv", config_hash(cfg));
  if (!opt.tracker_out.empty()) snapshot(result.state.tracker, opt.tracker_out, config_hash(cfg));

  const auto steps = result.stream.steps();
  if (!steps.empty()) {
    const auto& last = steps.back();
    std::cout << fmt::format("trained {} steps: solve_rate={:.4f} residual={} avg_T={:.4f} max_T={:.4f}\n",
                             steps.size(), last.solve_rate, last.residual_count,
                             last.avg_temperature, last.max_temperature);
  }
  return 0;
}

int cmd_sweep(const Options& opt) {
  if (opt.checkpoint.empty()) throw CLI::RequiredError("--checkpoint");
  auto ckpt = load_checkpoint(opt.checkpoint);
  TrainerConfig cfg;
  try {
    cfg = resolve_config(opt, ckpt.config);
  } catch (const Error& e) {
    throw ConfigFailure(e.what());
  }
  const auto ids = split_ids(ckpt.tasks, opt.split);
  const auto rows = residual_proportions(ckpt.state.policy, ckpt.tasks, ids, opt.temps,
                                         cfg.group_size, opt.samples, cfg.top_p, cfg.seed);
  std::ostringstream table;
  table << "temperature\tall_correct_pct\tall_incorrect_pct\tgroups\n";
  for (const auto& r : rows) {
    table << fmt::format("{}\t{:.4f}\t{:.4f}\t{}\n", r.temperature, r.all_correct_pct,
                         r.all_incorrect_pct, r.groups);
  }
  write_provenance(opt.out, cfg);
  write_text(fs::path(opt.out) / "residual_proportions.tsv", table.str());
  std::cout << table.str();
  return 0;
}

int cmd_eval(const Options& opt) {
  if (opt.checkpoint.empty()) throw CLI::RequiredError("--checkpoint");
  auto ckpt = load_checkpoint(opt.checkpoint);
  TrainerConfig cfg;
  try {
    cfg = resolve_config(opt, ckpt.config);
  } catch (const Error& e) {
    throw ConfigFailure(e.what());
  }
  const int k = opt.k > 0 ? opt.k : cfg.eval_k;
  const auto ids = split_ids(ckpt.tasks, opt.split);
  const auto res = evaluate(ckpt.state.policy, ckpt.tasks, ids, k, cfg.eval_temperature,
                            cfg.eval_top_p, cfg.seed);
  const std::string line =
      fmt::format("prompts\tk\tmean_at_k\tmaj_at_k\n{}\t{}\t{:.6f}\t{:.6f}\n", res.prompts, res.k,
                  res.mean_at_k, res.maj_at_k);
  write_provenance(opt.out, cfg);
  write_text(fs::path(opt.out) / "eval.tsv", line);
  std::cout << line;
  return 0;
}

int cmd_report(const Options& opt) {
  fs::path stream_path = opt.stream_path;
  if (stream_path.empty()) throw CLI::RequiredError("--stream");
  std::ifstream in(stream_path);
  if (!in) throw Error(ErrorKind::IoFailure, fmt::format("cannot open '{}'", stream_path.string()));
  const auto stream = read_stream(in);
  TrainerConfig cfg;
  const auto sibling = stream_path.parent_path() / "config.cfg";
  if (opt.config_path.empty() && fs::exists(sibling)) {
    Options with = opt;
    with.config_path = sibling.string();
    cfg = resolve_config(with);
  } else {
    cfg = resolve_config(opt);
  }
  emit_report(stream, RunMetadata{std::string(to_string(cfg.algorithm)), cfg.seed, config_hash(cfg)},
              opt.out);
  std::cout << fmt::format("report: {} step records written to {}\n", stream.steps().size(), opt.out);
  return 0;
}

int cmd_gradcheck(const Options& opt) {
  const TrainerConfig cfg = resolve_config(opt);
  double worst_grpo = 0.0;
  double worst_dapo = 0.0;
  for (int i = 0; i < opt.instances; ++i) {
    const auto seed = cfg.seed * 1000003ULL + static_cast<std::uint64_t>(i);
    worst_grpo = std::max(worst_grpo, objective_gradient_check(
                                          random_gradient_check_instance(ObjectiveKind::Grpo, seed, opt.h), opt.h));
    worst_dapo = std::max(worst_dapo, objective_gradient_check(
                                          random_gradient_check_instance(ObjectiveKind::Dapo, seed, opt.h), opt.h));
  }
  std::cout << fmt::format("grpo\t{}\t{:.3e}\ndapo\t{}\t{:.3e}\n", opt.instances, worst_grpo,
                           opt.instances, worst_dapo);
  return worst_grpo < 1e-5 && worst_dapo < 1e-5 ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ERPO desk-scale experiments"};
  app.require_subcommand(1, 1);
  Options opt;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "config file (key = value)");
    sub->add_option("--seed", opt.seed, "override the seed");
    sub->add_option("--algo", opt.algo, "grpo, dapo, ra or erpo")
        ->check(CLI::IsMember({"grpo", "dapo", "ra", "erpo", "dapo+ra", "dapo+erpo"}));
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--set", opt.overrides, "key=value override, repeatable");
  };

  auto* train = app.add_subcommand("train", "run the training loop");
  common(train);
  train->add_option("--checkpoint", opt.checkpoint, "resume from a checkpoint directory");
  train->add_option("--tracker-in", opt.tracker_in, "initial history tracker snapshot");
  train->add_option("--tracker-out", opt.tracker_out, "write the final tracker here");

  auto* sweep = app.add_subcommand("sweep-temp", "all-correct/all-incorrect proportions vs temperature");
  common(sweep);
  sweep->add_option("--checkpoint", opt.checkpoint, "checkpoint directory")->required();
  sweep->add_option("--temps", opt.temps, "comma-separated temperatures")->delimiter(',');
  sweep->add_option("--samples", opt.samples, "groups per prompt")->check(CLI::PositiveNumber);
  sweep->add_option("--split", opt.split, "train or holdout")->check(CLI::IsMember({"train", "holdout"}));

  auto* eval = app.add_subcommand("eval", "mean@k and maj@k on held-out prompts");
  common(eval);
  eval->add_option("--checkpoint", opt.checkpoint, "checkpoint directory")->required();
  eval->add_option("--k", opt.k, "samples per prompt")->check(CLI::PositiveNumber);
  eval->add_option("--split", opt.split, "holdout (default) or train")
      ->check(CLI::IsMember({"train", "holdout"}));

  auto* report = app.add_subcommand("report", "summary and series files from a metrics stream");
  common(report);
  report->add_option("--stream", opt.stream_path, "stream.jsonl from a training run")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of both objectives");
  common(gradcheck);
  gradcheck->add_option("--instances", opt.instances, "random instances per objective")
      ->check(CLI::PositiveNumber);
  gradcheck->add_option("--step", opt.h, "finite-difference step")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    return fail(kExitUsage, "UsageError", e.what());
  }

  try {
    if (*train) return cmd_train(opt);
    if (*sweep) return cmd_sweep(opt);
    if (*eval) {
      if (eval->count("--split") == 0) opt.split = "holdout";
      return cmd_eval(opt);
    }
    if (*report) return cmd_report(opt);
    if (*gradcheck) return cmd_gradcheck(opt);
  } catch (const ConfigFailure& e) {
    return fail(kExitConfig, "ConfigError", e.what());
  } catch (const Error& e) {
    return fail(kExitRuntime, to_string(e.kind()), e.what());
  } catch (const std::exception& e) {
    return fail(kExitRuntime, "RuntimeFailure", e.what());
  }
  return kExitUsage;
}
