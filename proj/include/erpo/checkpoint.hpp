#pragma once

#include <filesystem>

#include "erpo/config.hpp"
#include "erpo/env.hpp"
#include "erpo/trainer.hpp"

namespace erpo {

struct Checkpoint {
  TrainerConfig config;
  TaskSet tasks;
  TrainState state;
};

/// Directory layout (all text, versioned):
///   VERSION          erpo-checkpoint v1
///   config.cfg       resolved configuration
///   taskset.tsv      prompts
///   policy.txt       current logits
///   old_policy.txt   behavior policy of the last rollout step
///   ref_policy.txt   reference policy
///   tracker.tsv      history tracker snapshot
///   optimizer.txt    optimizer kind, update count and Adam moments
///   rng.txt          seed and rollout-step cursor
void save_checkpoint(const std::filesystem::path& dir, const TrainerConfig& cfg,
                     const TaskSet& tasks, const TrainState& state);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace erpo
