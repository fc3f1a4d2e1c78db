#pragma once

#include <filesystem>
#include <vector>

#include "erpo/config.hpp"
#include "erpo/env.hpp"
#include "erpo/evalreport.hpp"
#include "erpo/objective.hpp"
#include "erpo/policy.hpp"
#include "erpo/scheduler.hpp"

namespace erpo {

/// Adam moments, shaped like the policy. Unused (empty) under SGD.
struct OptimizerState {
  Policy first_moment;
  Policy second_moment;
  long updates = 0;

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

struct TrainState {
  Policy policy;
  Policy old_policy;  // behavior policy of the current rollout step
  Policy ref_policy;  // frozen initial policy
  HistoryTracker tracker;
  int step = 0;       // completed rollout steps
  OptimizerState optimizer;
};

TrainState init_state(const TrainerConfig& cfg, const TaskSet& tasks);

/// Training prompts for rollout step `step` (1-based). Each epoch is a fresh
/// permutation of the training split cut into floor(N / prompt_batch)
/// batches; the remainder of a permutation is not visited that epoch.
std::vector<int> batch_prompts(const TrainerConfig& cfg, int num_train, int step);

struct RolloutOutcome {
  std::vector<RolloutGroup> groups;
  std::vector<std::uint64_t> history_before;  // H_i before this step, per group
};

/// Refreshes the behavior policy, samples G responses per batch prompt at
/// the scheduled temperature (T0 outside DAPO+ERPO), scores them and
/// updates the history tracker once per prompt. Advances `state.tracker`
/// but not `state.step`.
RolloutOutcome rollout_step(TrainState& state, const TaskSet& tasks, const TrainerConfig& cfg);

struct UpdateOutcome {
  int mixed = 0;
  int all_correct = 0;
  int all_incorrect = 0;
  int reactivated = 0;        // all-correct groups given reactivated advantages
  int filtered_correct = 0;   // all-correct groups removed by dynamic filtering
  int filtered_incorrect = 0;
  std::vector<MinibatchRecord> minibatches;
  std::vector<EventRecord> events;
};

/// Assembles advantages for the configured algorithm and performs one
/// gradient-ascent update per minibatch of responses.
UpdateOutcome update_step(TrainState& state, const std::vector<RolloutGroup>& groups,
                          const TrainerConfig& cfg, int step);

struct RunOptions {
  /// When set, checkpoints go to `<dir>/step_NNNNNN` every
  /// `train.checkpoint_every` steps and to `<dir>/final` at the end.
  std::filesystem::path checkpoint_dir;
};

struct RunResult {
  TrainState state;
  MetricsStream stream;
};

/// Executes rollout steps state.step + 1 .. cfg.steps. Throws
/// InvariantViolation (after writing a checkpoint when configured) if a
/// logged quantity breaks a training invariant.
RunResult resume(const TrainerConfig& cfg, const TaskSet& tasks, TrainState state,
                 const RunOptions& options = {});
RunResult run(const TrainerConfig& cfg, const TaskSet& tasks, const RunOptions& options = {});

}  // namespace erpo
