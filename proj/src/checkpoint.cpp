#include "erpo/checkpoint.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <string>

#include <fmt/format.h>

#include "erpo/errors.hpp"

namespace erpo {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "erpo-checkpoint v1";

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoFailure, fmt::format("cannot write '{}'", path.string()));
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, fmt::format("cannot open '{}'", path.string()));
  return in;
}

void write_policy_file(const Policy& policy, const fs::path& path) {
  auto out = open_out(path);
  write_policy(policy, out);
}

Policy read_policy_file(const fs::path& path) {
  auto in = open_in(path);
  return read_policy(in);
}

}  // namespace

void save_checkpoint(const fs::path& dir, const TrainerConfig& cfg, const TaskSet& tasks,
                     const TrainState& state) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, fmt::format("cannot create '{}'", dir.string()));

  open_out(dir / "VERSION") << kVersion << '\n';
  save_config(cfg, dir / "config.cfg");
  {
    auto out = open_out(dir / "taskset.tsv");
    write_taskset(tasks, out);
  }
  write_policy_file(state.policy, dir / "policy.txt");
  write_policy_file(state.old_policy, dir / "old_policy.txt");
  write_policy_file(state.ref_policy, dir / "ref_policy.txt");
  snapshot(state.tracker, dir / "tracker.tsv", config_hash(cfg));
  {
    auto out = open_out(dir / "optimizer.txt");
    const bool adam = cfg.optimizer == OptimizerKind::Adam;
    out << fmt::format("# erpo-optimizer v1 kind={} updates={}\n", adam ? "adam" : "sgd",
                       state.optimizer.updates);
    if (adam) {
      write_policy(state.optimizer.first_moment, out);
      write_policy(state.optimizer.second_moment, out);
    }
  }
  open_out(dir / "rng.txt") << fmt::format("seed={}\nstep={}\n", cfg.seed, state.step);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  {
    auto in = open_in(dir / "VERSION");
    std::string version;
    std::getline(in, version);
    if (version != kVersion) {
      throw Error(ErrorKind::CorruptSnapshot, fmt::format("unsupported checkpoint '{}'", version));
    }
  }
  Checkpoint ckpt;
  ckpt.config = validate_config(load_config(dir / "config.cfg"));
  {
    auto in = open_in(dir / "taskset.tsv");
    ckpt.tasks = read_taskset(in);
  }
  auto& state = ckpt.state;
  state.policy = read_policy_file(dir / "policy.txt");
  state.old_policy = read_policy_file(dir / "old_policy.txt");
  state.ref_policy = read_policy_file(dir / "ref_policy.txt");
  state.tracker = restore(dir / "tracker.tsv");
  {
    auto in = open_in(dir / "optimizer.txt");
    std::string header;
    std::getline(in, header);
    char kind[8] = {};
    long updates = 0;
    if (std::sscanf(header.c_str(), "# erpo-optimizer v1 kind=%7s updates=%ld", kind, &updates) != 2) {
      throw Error(ErrorKind::CorruptSnapshot, "optimizer.txt: bad header");
    }
    state.optimizer.updates = updates;
    if (std::string(kind) == "adam") {
      state.optimizer.first_moment = read_policy(in);
      state.optimizer.second_moment = read_policy(in);
    }
  }
  {
    auto in = open_in(dir / "rng.txt");
    std::string line;
    std::uint64_t seed = 0;
    int step = -1;
    std::getline(in, line);
    std::sscanf(line.c_str(), "seed=%" SCNu64, &seed);
    std::getline(in, line);
    std::sscanf(line.c_str(), "step=%d", &step);
    if (seed != ckpt.config.seed || step < 0 || step > ckpt.config.steps) {
      throw Error(ErrorKind::CorruptSnapshot, "rng.txt disagrees with config");
    }
    state.step = step;
  }
  return ckpt;
}

}  // namespace erpo
