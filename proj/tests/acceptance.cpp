// Acceptance checks 1-11. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "erpo/advantage.hpp"
#include "erpo/checkpoint.hpp"
#include "erpo/config.hpp"
#include "erpo/distribution.hpp"
#include "erpo/evalreport.hpp"
#include "erpo/objective.hpp"
#include "erpo/scheduler.hpp"
#include "erpo/trainer.hpp"
#include "oracles.hpp"

using namespace erpo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// One-sided sign test: P(X >= wins) for X ~ Binomial(n, 1/2).
double sign_test(int wins, int n) {
  double p = 0.0;
  for (int k = wins; k <= n; ++k) {
    double c = 1.0;
    for (int i = 0; i < k; ++i) c = c * (n - i) / (i + 1);
    p += c / std::pow(2.0, n);
  }
  return p;
}

constexpr int kSeeds = 5;

TrainerConfig base_config() {
  return validate_config(load_config(fs::path(ERPO_CONFIG_DIR) / "residual.cfg"));
}

std::vector<int> id_range(int lo, int hi) {
  std::vector<int> ids(static_cast<std::size_t>(hi - lo));
  std::iota(ids.begin(), ids.end(), lo);
  return ids;
}

// Trained runs shared by criteria 6-8, keyed by algorithm and seed.
struct Trained {
  TrainerConfig cfg;
  TaskSet tasks;
  RunResult result;
};

std::vector<Trained>& runs(Algorithm algo) {
  static std::vector<Trained> dapo;
  static std::vector<Trained> erpo;
  auto& slot = algo == Algorithm::Dapo ? dapo : erpo;
  if (slot.empty()) {
    for (int s = 1; s <= kSeeds; ++s) {
      auto cfg = base_config();
      cfg.algorithm = algo;
      cfg.seed = static_cast<std::uint64_t>(s);
      auto tasks = make_taskset(cfg);
      auto result = run(cfg, tasks);
      slot.push_back(Trained{cfg, std::move(tasks), std::move(result)});
    }
  }
  return slot;
}

Outcome criterion1() {
  const auto start = Clock::now();
  auto rng = RandomStream::derive(101, StreamTag::Test);
  const int sizes[] = {2, 4, 8, 16};
  double worst_mean = 0.0;
  double worst_std = 0.0;
  int groups = 0;
  while (groups < 1000) {
    const int G = sizes[rng.below(4)];
    std::vector<double> r(static_cast<std::size_t>(G));
    for (auto& v : r) v = rng.below(2) ? rng.normal() * 5.0 : (rng.below(2) ? 1.0 : -1.0);
    if (*std::max_element(r.begin(), r.end()) == *std::min_element(r.begin(), r.end())) continue;
    const auto a = group_advantage(r);
    std::vector<long double> wide(a.advantages.data(), a.advantages.data() + G);
    worst_mean = std::max(worst_mean, static_cast<double>(std::fabs(oracle::mean(wide))));
    worst_std = std::max(worst_std, static_cast<double>(std::fabs(oracle::popstd(wide) - 1)));
    ++groups;
  }
  const double t = seconds_since(start);
  return {worst_mean < 1e-9 && worst_std < 1e-9 && t < 1.0,
          fmt::format("{} groups, max|mean|={:.2e}, max|std-1|={:.2e}, {:.3f}s", groups, worst_mean,
                      worst_std, t)};
}

Outcome criterion2() {
  const auto start = Clock::now();
  auto rng = RandomStream::derive(102, StreamTag::Test);
  double worst_closed = 0.0;
  double worst_oracle = 0.0;
  for (int G = 2; G <= 64; ++G) {
    for (int pair = 0; pair < 100; ++pair) {
      const double hi = rng.uniform(-10.0, 10.0);
      const double lo = hi - rng.uniform(1e-3, 20.0);
      const auto a = reactivated_advantage(std::vector<double>(static_cast<std::size_t>(G), hi), hi, lo);
      const double want = static_cast<double>(oracle::reactivated(G, hi, lo));
      for (int i = 0; i < G; ++i) {
        worst_closed = std::max(worst_closed, std::fabs(a.advantages(i) - 1.0 / std::sqrt(double(G))));
        worst_oracle = std::max(worst_oracle, std::fabs(a.advantages(i) - want));
      }
    }
  }
  const double t = seconds_since(start);
  return {worst_closed < 1e-12 && worst_oracle < 1e-12 && t < 1.0,
          fmt::format("G=2..64 x 100 pairs, max|A-1/sqrt(G)|={:.2e}, max|A-oracle|={:.2e}, {:.3f}s",
                      worst_closed, worst_oracle, t)};
}

Outcome criterion3() {
  const auto start = Clock::now();
  const double h = 1e-5;
  double worst[2] = {0.0, 0.0};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    int k = 0;
    for (auto kind : {ObjectiveKind::Grpo, ObjectiveKind::Dapo}) {
      const auto inst = random_gradient_check_instance(kind, 1000 + seed, h);
      worst[k] = std::max(worst[k], objective_gradient_check(inst, h));
      ++k;
    }
  }
  const double t = seconds_since(start);
  return {worst[0] < 1e-5 && worst[1] < 1e-5 && t < 30.0,
          fmt::format("100 instances each, max rel err grpo={:.2e} dapo={:.2e}, {:.3f}s", worst[0],
                      worst[1], t)};
}

Outcome criterion4() {
  auto rng = RandomStream::derive(104, StreamTag::Test);
  int mismatches = 0;
  int decreases = 0;
  for (int i = 0; i < 10000; ++i) {
    TrainerConfig cfg;
    cfg.T0 = rng.uniform(0.1, 2.0);
    cfg.Tmax = cfg.T0 + rng.uniform(0.0, 1.0);
    cfg.Ts = rng.uniform(0.0, 0.1);
    const auto H = rng.below(60);
    HistoryTracker tracker(1);
    for (std::uint64_t s = 0; s < H; ++s) {
      tracker.update(0, true);
      tracker.advance();
    }
    const double got = temperature_for(tracker, 0, cfg);
    mismatches += got != std::min(cfg.T0 + cfg.Ts * static_cast<double>(H), cfg.Tmax) ? 1 : 0;
    tracker.update(0, true);
    decreases += temperature_for(tracker, 0, cfg) < got ? 1 : 0;
  }

  // Replay an ERPO run step by step against the tracker state before each step.
  auto cfg = base_config();
  cfg.algorithm = Algorithm::DapoErpo;
  cfg.steps = 120;
  cfg.seed = 4;
  const auto tasks = make_taskset(cfg);
  auto state = init_state(cfg, tasks);
  int replay_bad = 0;
  long replayed = 0;
  for (int step = 1; step <= cfg.steps; ++step) {
    const auto before = state.tracker.counts();
    const auto rollout = rollout_step(state, tasks, cfg);
    for (const auto& g : rollout.groups) {
      const double H = static_cast<double>(before[static_cast<std::size_t>(g.prompt_id)]);
      replay_bad += g.temperature_used != std::min(cfg.T0 + cfg.Ts * H, cfg.Tmax) ? 1 : 0;
      ++replayed;
    }
    update_step(state, rollout.groups, cfg, step);
    state.step = step;
  }
  return {mismatches == 0 && decreases == 0 && replay_bad == 0,
          fmt::format("10000 tuples: {} mismatches, {} decreases; replay of {} groups: {} inconsistent",
                      mismatches, decreases, replayed, replay_bad)};
}

Outcome criterion5() {
  auto rng = RandomStream::derive(105, StreamTag::Test);
  const double temps[] = {0.5, 1.0, 1.1, 1.2, 1.5};
  int entropy_bad = 0;
  int mass_bad = 0;
  double worst_nucleus = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(9));
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z(i) = rng.normal() * rng.uniform(0.1, 6.0);
    double prev_h = -1.0;
    double prev_top = 2.0;
    for (double T : temps) {
      const auto p = tempered_softmax(z, T);
      const double h = entropy(p);
      // Slack for rounding when the distribution is numerically one-hot.
      entropy_bad += h < prev_h - 1e-12 ? 1 : 0;
      mass_bad += p.maxCoeff() > prev_top + 1e-12 ? 1 : 0;
      prev_h = h;
      prev_top = p.maxCoeff();
    }
    const double top_p = rng.uniform(0.01, 1.0);
    const auto p = tempered_softmax(z, rng.uniform(0.5, 1.5));
    const auto got = nucleus(p, top_p);
    const auto want = oracle::nucleus(std::vector<double>(p.data(), p.data() + n), top_p);
    for (int i = 0; i < n; ++i) worst_nucleus = std::max(worst_nucleus, std::fabs(got(i) - want[static_cast<std::size_t>(i)]));
  }
  return {entropy_bad == 0 && mass_bad == 0 && worst_nucleus < 1e-12,
          fmt::format("1000 logit vectors: {} entropy violations, {} argmax-mass violations, "
                      "max|top-p - oracle|={:.2e}",
                      entropy_bad, mass_bad, worst_nucleus)};
}

Outcome criterion6() {
  const auto start = Clock::now();
  auto& trained = runs(Algorithm::Dapo);
  int wins = 0;
  std::string per_seed;
  for (const auto& t : trained) {
    const auto steps = t.result.stream.steps();
    const std::size_t decile = std::max<std::size_t>(1, steps.size() / 10);
    double first = 0.0;
    double last = 0.0;
    for (std::size_t i = 0; i < decile; ++i) {
      first += steps[i].residual_count;
      last += steps[steps.size() - 1 - i].residual_count;
    }
    first /= static_cast<double>(decile);
    last /= static_cast<double>(decile);
    wins += last > first ? 1 : 0;
    per_seed += fmt::format(" {:.1f}->{:.1f}", first, last);
  }
  const double p = sign_test(wins, kSeeds);
  const double t = seconds_since(start);
  const auto& cfg = trained.front().cfg;
  return {p < 0.05 && t < 300.0 && cfg.n_prompts == 256 && cfg.group_size == 8 && cfg.steps >= 100,
          fmt::format("DAPO N={} G={} K={}: all-correct groups/step first->last decile{}; {}/{} seeds, "
                      "sign test p={:.4f}, {:.1f}s",
                      cfg.n_prompts, cfg.group_size, cfg.steps, per_seed, wins, kSeeds, p, t)};
}

Outcome criterion7() {
  auto& trained = runs(Algorithm::Dapo);
  int lower = 0;
  int smaller_shift = 0;
  int groups = 0;
  std::string per_seed;
  for (const auto& t : trained) {
    const auto ids = id_range(0, t.tasks.num_train);
    const std::vector<double> temps{1.0, 1.2};
    const int samples = (1000 + t.tasks.num_train - 1) / t.tasks.num_train;
    const auto rows = residual_proportions(t.result.state.policy, t.tasks, ids, temps,
                                           t.cfg.group_size, samples, t.cfg.top_p, t.cfg.seed);
    groups = rows[0].groups;
    lower += rows[1].all_correct_pct < rows[0].all_correct_pct ? 1 : 0;
    const double dc = std::fabs(rows[1].all_correct_pct - rows[0].all_correct_pct);
    const double di = std::fabs(rows[1].all_incorrect_pct - rows[0].all_incorrect_pct);
    smaller_shift += di < dc ? 1 : 0;
    per_seed += fmt::format(" [{:.1f}%->{:.1f}% / {:.1f}%->{:.1f}%]", rows[0].all_correct_pct,
                            rows[1].all_correct_pct, rows[0].all_incorrect_pct, rows[1].all_incorrect_pct);
  }
  const double p = sign_test(lower, kSeeds);
  return {p < 0.05 && smaller_shift == kSeeds && groups >= 1000,
          fmt::format("{} groups per temperature; all-correct / all-incorrect at T=1.0->1.2{}; lower in "
                      "{}/{} (p={:.4f}); smaller all-incorrect shift in {}/{}",
                      groups, per_seed, lower, kSeeds, p, smaller_shift, kSeeds)};
}

Outcome criterion8() {
  auto& dapo = runs(Algorithm::Dapo);
  auto& erpo = runs(Algorithm::DapoErpo);
  int fewer = 0;
  std::string residual;
  std::string solve;
  bool solve_ok = true;
  for (int s = 0; s < kSeeds; ++s) {
    auto last_half = [](const Trained& t) {
      const auto steps = t.result.stream.steps();
      long total = 0;
      for (std::size_t i = steps.size() / 2; i < steps.size(); ++i) total += steps[i].residual_count;
      return total;
    };
    const long rd = last_half(dapo[static_cast<std::size_t>(s)]);
    const long re = last_half(erpo[static_cast<std::size_t>(s)]);
    fewer += re < rd ? 1 : 0;
    residual += fmt::format(" {}/{}", re, rd);

    auto held_out = [](const Trained& t) {
      const auto ids = id_range(t.tasks.num_train, t.tasks.size());
      return evaluate(t.result.state.policy, t.tasks, ids, 32, 1.0, 0.7, t.cfg.seed).mean_at_k;
    };
    auto train_split = [](const Trained& t) {
      const auto ids = id_range(0, t.tasks.num_train);
      return evaluate(t.result.state.policy, t.tasks, ids, 32, 1.0, 0.7, t.cfg.seed).mean_at_k;
    };
    const double hd = held_out(dapo[static_cast<std::size_t>(s)]);
    const double he = held_out(erpo[static_cast<std::size_t>(s)]);
    solve_ok = solve_ok && he >= hd - 0.02;
    solve += fmt::format(" {:.3f}/{:.3f} (train {:.3f}/{:.3f})", he, hd,
                         train_split(erpo[static_cast<std::size_t>(s)]),
                         train_split(dapo[static_cast<std::size_t>(s)]));
  }
  return {fewer >= 4 && solve_ok,
          fmt::format("last-half all-correct groups erpo/dapo:{} -> fewer in {}/{}; held-out mean@32 "
                      "erpo/dapo:{}",
                      residual, fewer, kSeeds, solve)};
}

Outcome criterion9() {
  auto& erpo = runs(Algorithm::DapoErpo);
  const auto& t = erpo.front();
  const auto steps = t.result.stream.steps();
  int bad = 0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    bad += steps[i].max_temperature > t.cfg.Tmax ? 1 : 0;
    bad += steps[i].avg_temperature > steps[i].max_temperature ? 1 : 0;
    if (i > 0) {
      bad += steps[i].max_temperature < steps[i - 1].max_temperature ? 1 : 0;
      bad += steps[i].avg_temperature < steps[i - 1].avg_temperature ? 1 : 0;
    }
  }
  const auto dir = fs::temp_directory_path() / "erpo_acceptance_report";
  fs::remove_all(dir);
  emit_report(t.result.stream, RunMetadata{"dapo+erpo", t.cfg.seed, config_hash(t.cfg)}, dir);
  auto series_ok = [&](const char* name, double MetricsRecord::*field) {
    std::ifstream in(dir / name);
    std::string line;
    std::getline(in, line);
    std::size_t i = 0;
    while (std::getline(in, line)) {
      int step = 0;
      double value = 0.0;
      if (std::sscanf(line.c_str(), "%d\t%lf", &step, &value) != 2) return false;
      if (i >= steps.size() || step != steps[i].step || value != steps[i].*field) return false;
      ++i;
    }
    return i == steps.size();
  };
  const bool emitted = series_ok("series_avg_temperature.tsv", &MetricsRecord::avg_temperature) &&
                       series_ok("series_max_temperature.tsv", &MetricsRecord::max_temperature);
  fs::remove_all(dir);
  return {bad == 0 && emitted && steps.back().max_temperature > t.cfg.T0,
          fmt::format("{} steps: avg T {:.4f}->{:.4f}, max T {:.3f}->{:.3f} (cap {}), {} violations, "
                      "series emitted={}",
                      steps.size(), steps.front().avg_temperature, steps.back().avg_temperature,
                      steps.front().max_temperature, steps.back().max_temperature, t.cfg.Tmax, bad,
                      emitted)};
}

Outcome criterion10() {
  bool identical = true;
  bool resumed = true;
  for (auto algo : {Algorithm::Dapo, Algorithm::DapoErpo, Algorithm::Grpo, Algorithm::DapoRa}) {
    auto cfg = base_config();
    cfg.algorithm = algo;
    cfg.steps = 60;
    cfg.checkpoint_every = 30;
    cfg.seed = 11;
    const auto tasks = make_taskset(cfg);
    const auto dir = fs::temp_directory_path() / "erpo_acceptance_resume";
    fs::remove_all(dir);
    const auto a = run(cfg, tasks, RunOptions{dir});
    const auto b = run(cfg, tasks);
    identical = identical && stream_text(a.stream) == stream_text(b.stream);
    const auto ckpt = load_checkpoint(dir / "step_000030");
    const auto tail = resume(ckpt.config, ckpt.tasks, ckpt.state);
    MetricsStream expected;
    for (const auto& e : a.stream.entries) {
      if (std::visit([](const auto& r) { return r.step; }, e) > 30) expected.entries.push_back(e);
    }
    resumed = resumed && stream_text(expected) == stream_text(tail.stream) &&
              tail.state.policy == a.state.policy && tail.state.tracker == a.state.tracker;
    fs::remove_all(dir);
  }
  return {identical && resumed,
          fmt::format("4 algorithms x 60 steps: byte-identical streams={}, midpoint resume exact={}",
                      identical, resumed)};
}

Outcome criterion11() {
  auto rng = RandomStream::derive(111, StreamTag::Test);
  int mean_bad = 0;
  int maj_bad = 0;
  int ties = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(32));
    const int alphabet = 1 + static_cast<int>(rng.below(5));
    std::vector<bool> flags;
    std::vector<std::string> answers;
    for (int i = 0; i < k; ++i) {
      flags.push_back(rng.below(3) != 0);
      answers.push_back(fmt::format("{}:{}", rng.below(3), rng.below(static_cast<std::uint64_t>(alphabet))));
    }
    std::map<std::string, int> counts;
    for (const auto& a : answers) ++counts[a];
    int top = 0;
    int at_top = 0;
    for (const auto& [a, c] : counts) top = std::max(top, c);
    for (const auto& [a, c] : counts) at_top += c == top ? 1 : 0;
    ties += at_top > 1 ? 1 : 0;
    const std::string truth = answers[rng.below(answers.size())];
    mean_bad += mean_at_k(flags) != oracle::fraction_true(flags) ? 1 : 0;
    maj_bad += maj_at_k(answers, truth) != oracle::majority(answers, truth) ? 1 : 0;
  }
  return {mean_bad == 0 && maj_bad == 0 && ties > 0,
          fmt::format("1000 cases ({} with tied modes): {} mean@k and {} maj@k disagreements", ties,
                      mean_bad, maj_bad)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"advantage normalization", criterion1},
      {"reactivated advantage closed form", criterion2},
      {"gradient fidelity", criterion3},
      {"temperature schedule", criterion4},
      {"sampling physics", criterion5},
      {"residual-prompt emergence", criterion6},
      {"temperature-induced reactivation", criterion7},
      {"ERPO mechanism efficacy", criterion8},
      {"temperature trajectories", criterion9},
      {"determinism and resume", criterion10},
      {"evaluation oracle", criterion11},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, fmt::format("exception: {}", e.what())};
    }
    failed += out.pass ? 0 : 1;
    std::printf("criterion %2zu %s  %s: %s\n", i + 1, out.pass ? "PASS" : "FAIL", criteria[i].first,
                out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
