#include "erpo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "erpo/advantage.hpp"
#include "erpo/checkpoint.hpp"
#include "erpo/errors.hpp"

namespace erpo {

namespace {

std::vector<int> epoch_permutation(std::uint64_t seed, int num_train, int epoch) {
  std::vector<int> order(static_cast<std::size_t>(num_train));
  std::iota(order.begin(), order.end(), 0);
  auto rng = RandomStream::derive(seed, StreamTag::EpochShuffle, {static_cast<std::uint64_t>(epoch)});
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  return order;
}

bool erpo_mode(const TrainerConfig& cfg) { return cfg.algorithm == Algorithm::DapoErpo; }

RolloutGroup roll_group(const TrainState& state, const TaskSet& tasks, const TrainerConfig& cfg,
                        int prompt_id, double temperature, int step) {
  SamplingParams params;
  params.temperature = temperature;
  params.top_p = cfg.top_p;
  params.record_at_sampling_temperature = cfg.ratio_under_sampling_temp;
  const auto stream = RandomStream::derive(
      cfg.seed, StreamTag::Rollout,
      {static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(prompt_id)});

  RolloutGroup group;
  group.prompt_id = prompt_id;
  group.temperature_used = temperature;
  group.responses = sample(state.old_policy, prompt_id, params, cfg.group_size, stream);
  const Prompt& prompt = tasks.at(prompt_id);
  for (const auto& r : group.responses) {
    const bool correct = verify(prompt, r, tasks.vocab_size);
    group.rewards.push_back(reward(correct, cfg));
    group.num_correct += correct ? 1 : 0;
  }
  group.all_correct = group.num_correct == group.size();
  group.all_incorrect = group.num_correct == 0;
  return group;
}

// Groups that would carry signal into the update under the configured mode.
bool contributes(const RolloutGroup& g, const TrainerConfig& cfg) {
  if (cfg.algorithm == Algorithm::Grpo) return !g.all_correct && !g.all_incorrect;
  if (cfg.algorithm == Algorithm::DapoRa) return !g.all_incorrect;
  return !g.all_correct && !g.all_incorrect;
}

void apply_gradient(TrainState& state, const PolicyGradient& gradient, double lr,
                    const TrainerConfig& cfg) {
  if (cfg.optimizer == OptimizerKind::Sgd) {
    for (const auto& [id, grad] : gradient) state.policy.logits(id) += lr * grad;
    return;
  }
  auto& opt = state.optimizer;
  ++opt.updates;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(opt.updates));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(opt.updates));
  for (int id = 0; id < state.policy.num_prompts(); ++id) {
    auto& m = opt.first_moment.logits(id);
    auto& v = opt.second_moment.logits(id);
    const auto it = gradient.find(id);
    if (it == gradient.end()) {
      m *= b1;
      v *= b2;
    } else {
      m = b1 * m + (1.0 - b1) * it->second;
      v = b2 * v + (1.0 - b2) * it->second.cwiseAbs2();
    }
    state.policy.logits(id).array() +=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_epsilon);
  }
}

double learning_rate_at(const TrainerConfig& cfg, int step) {
  if (cfg.warmup_steps <= 0) return cfg.learning_rate;
  return cfg.learning_rate * std::min(1.0, static_cast<double>(step) / cfg.warmup_steps);
}

[[noreturn]] void violation(const RunOptions& options, const TrainerConfig& cfg,
                            const TaskSet& tasks, const TrainState& state, int step,
                            const std::string& what) {
  if (!options.checkpoint_dir.empty()) {
    save_checkpoint(options.checkpoint_dir / fmt::format("failed_step_{:06d}", step), cfg, tasks,
                    state);
  }
  throw Error(ErrorKind::InvariantViolation, fmt::format("step {}: {}", step, what));
}

}  // namespace

TrainState init_state(const TrainerConfig& cfg, const TaskSet& tasks) {
  TrainState state;
  state.policy = Policy::random(tasks.size(), tasks.vocab_size, tasks.L_max, cfg.init_scale, cfg.seed);
  state.old_policy = state.policy;
  state.ref_policy = state.policy;
  state.tracker = HistoryTracker(tasks.num_train);
  if (cfg.optimizer == OptimizerKind::Adam) {
    state.optimizer.first_moment = Policy(tasks.size(), tasks.vocab_size, tasks.L_max);
    state.optimizer.second_moment = Policy(tasks.size(), tasks.vocab_size, tasks.L_max);
  }
  return state;
}

std::vector<int> batch_prompts(const TrainerConfig& cfg, int num_train, int step) {
  const int per_epoch = num_train / cfg.prompt_batch;
  if (per_epoch < 1) {
    throw Error(ErrorKind::InvalidConfig,
                fmt::format("prompt_batch {} exceeds training prompts {}", cfg.prompt_batch, num_train));
  }
  const int index = step - 1;
  const auto order = epoch_permutation(cfg.seed, num_train, index / per_epoch);
  const auto first = order.begin() + (index % per_epoch) * cfg.prompt_batch;
  return {first, first + cfg.prompt_batch};
}

RolloutOutcome rollout_step(TrainState& state, const TaskSet& tasks, const TrainerConfig& cfg) {
  const int step = state.step + 1;
  state.old_policy = state.policy;

  RolloutOutcome out;
  auto roll = [&](int prompt_id) {
    const std::uint64_t before = state.tracker.count(prompt_id);
    const double temperature =
        erpo_mode(cfg) ? scheduled_temperature(cfg.T0, cfg.Ts, cfg.Tmax, before) : cfg.T0;
    out.groups.push_back(roll_group(state, tasks, cfg, prompt_id, temperature, step));
    out.history_before.push_back(before);
  };

  const auto batch = batch_prompts(cfg, tasks.num_train, step);
  for (int id : batch) roll(id);

  if (cfg.refill && cfg.algorithm != Algorithm::Grpo) {
    auto useful = static_cast<int>(std::count_if(out.groups.begin(), out.groups.end(),
                                                 [&](const auto& g) { return contributes(g, cfg); }));
    std::vector<char> in_batch(static_cast<std::size_t>(tasks.num_train), 0);
    for (int id : batch) in_batch[static_cast<std::size_t>(id)] = 1;
    std::vector<int> candidates;
    for (int id = 0; id < tasks.num_train; ++id) {
      if (!in_batch[static_cast<std::size_t>(id)]) candidates.push_back(id);
    }
    auto rng = RandomStream::derive(cfg.seed, StreamTag::Refill, {static_cast<std::uint64_t>(step)});
    for (std::size_t i = candidates.size(); i > 1; --i) std::swap(candidates[i - 1], candidates[rng.below(i)]);
    int extra = 0;
    for (int id : candidates) {
      if (useful >= cfg.prompt_batch || extra >= cfg.refill_cap) break;
      roll(id);
      ++extra;
      if (contributes(out.groups.back(), cfg)) ++useful;
    }
  }

  // Tracker updates happen after every group of the step has been sampled.
  for (const auto& g : out.groups) state.tracker.update(g.prompt_id, g.all_correct);
  state.tracker.advance();
  return out;
}

UpdateOutcome update_step(TrainState& state, const std::vector<RolloutGroup>& groups,
                          const TrainerConfig& cfg, int step) {
  UpdateOutcome out;
  std::vector<RolloutGroup> used;
  std::vector<AdvantageSet> advantages;
  for (const auto& g : groups) {
    if (g.all_correct) {
      ++out.all_correct;
    } else if (g.all_incorrect) {
      ++out.all_incorrect;
    } else {
      ++out.mixed;
    }
  }

  switch (cfg.algorithm) {
    case Algorithm::Grpo:
      // Degenerate groups stay in the batch with zero advantage.
      for (const auto& g : groups) {
        used.push_back(g);
        advantages.push_back(group_advantage(g.rewards, g.prompt_id));
      }
      break;
    case Algorithm::Dapo:
    case Algorithm::DapoErpo: {
      auto filtered = dynamic_filter(groups);
      out.filtered_correct = filtered.removed_all_correct;
      out.filtered_incorrect = filtered.removed_all_incorrect;
      used = std::move(filtered.kept);
      for (const auto& g : used) advantages.push_back(group_advantage(g.rewards, g.prompt_id));
      break;
    }
    case Algorithm::DapoRa:
      for (const auto& g : groups) {
        if (g.all_incorrect) {
          ++out.filtered_incorrect;
        } else if (g.all_correct) {
          ++out.reactivated;
          used.push_back(g);
          advantages.push_back(reactivated_advantage(g.rewards, cfg.reward_correct,
                                                     cfg.reward_incorrect, g.prompt_id));
        } else {
          used.push_back(g);
          advantages.push_back(group_advantage(g.rewards, g.prompt_id));
        }
      }
      break;
  }

  auto samples = make_samples(used, advantages, cfg.ratio_under_sampling_temp);
  if (samples.empty()) {
    out.events.push_back(EventRecord{step, "skipped_update", "EmptyBatch: every group was filtered"});
    return out;
  }
  auto rng = RandomStream::derive(cfg.seed, StreamTag::Minibatch, {static_cast<std::uint64_t>(step)});
  for (std::size_t i = samples.size(); i > 1; --i) std::swap(samples[i - 1], samples[rng.below(i)]);

  const double lr = learning_rate_at(cfg, step);
  const auto chunk = static_cast<std::size_t>(cfg.minibatch);
  int index = 0;
  for (std::size_t begin = 0; begin < samples.size(); begin += chunk, ++index) {
    const std::span<const TrainingSample> batch(samples.data() + begin,
                                                std::min(chunk, samples.size() - begin));
    ObjectiveReport report;
    try {
      report = cfg.algorithm == Algorithm::Grpo
                   ? grpo_objective(batch, state.policy, state.ref_policy, cfg)
                   : dapo_objective(batch, state.policy, cfg);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::EmptyBatch) throw;
      out.events.push_back(EventRecord{step, "skipped_update", e.what()});
      continue;
    }
    apply_gradient(state, report.gradient, lr, cfg);
    out.minibatches.push_back(MinibatchRecord{step, index, static_cast<int>(batch.size()),
                                              report.tokens_counted, report.value,
                                              report.clip_fraction, report.kl_value, lr});
  }
  return out;
}

RunResult resume(const TrainerConfig& cfg, const TaskSet& tasks, TrainState state,
                 const RunOptions& options) {
  RunResult result;
  const int num_train = tasks.num_train;
  for (int step = state.step + 1; step <= cfg.steps; ++step) {
    // Scheduled temperatures over the training split before this step.
    double temp_sum = 0.0;
    double temp_max = cfg.T0;
    for (int id = 0; id < num_train; ++id) {
      const double t = erpo_mode(cfg) ? temperature_for(state.tracker, id, cfg) : cfg.T0;
      temp_sum += t;
      temp_max = std::max(temp_max, t);
    }
    const auto counts_before = state.tracker.counts();

    auto rollout = rollout_step(state, tasks, cfg);
    auto update = update_step(state, rollout.groups, cfg, step);
    state.step = step;

    MetricsRecord rec;
    rec.step = step;
    rec.prompts_rolled = static_cast<int>(rollout.groups.size());
    rec.avg_temperature = temp_sum / num_train;
    rec.max_temperature = temp_max;
    long correct = 0;
    long total = 0;
    double reward_sum = 0.0;
    double temp_used = 0.0;
    for (std::size_t i = 0; i < rollout.groups.size(); ++i) {
      const auto& g = rollout.groups[i];
      const double expected =
          erpo_mode(cfg) ? scheduled_temperature(cfg.T0, cfg.Ts, cfg.Tmax, rollout.history_before[i])
                         : cfg.T0;
      if (g.temperature_used != expected ||
          rollout.history_before[i] != counts_before[static_cast<std::size_t>(g.prompt_id)]) {
        violation(options, cfg, tasks, state, step,
                  fmt::format("prompt {} sampled at T={} but the tracker implies T={}", g.prompt_id,
                              g.temperature_used, expected));
      }
      correct += g.num_correct;
      total += g.size();
      reward_sum += std::accumulate(g.rewards.begin(), g.rewards.end(), 0.0);
      temp_used += g.temperature_used;
    }
    if (update.mixed + update.all_correct + update.all_incorrect != rec.prompts_rolled) {
      violation(options, cfg, tasks, state, step, "group accounting does not add up");
    }
    for (int id = 0; id < num_train; ++id) {
      if (state.tracker.count(id) < counts_before[static_cast<std::size_t>(id)]) {
        violation(options, cfg, tasks, state, step, "history tracker decreased");
      }
    }
    rec.mean_reward = total > 0 ? reward_sum / static_cast<double>(total) : 0.0;
    rec.solve_rate = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    rec.batch_temperature = temp_used / static_cast<double>(rollout.groups.size());
    rec.residual_count = update.all_correct;
    rec.all_incorrect_count = update.all_incorrect;
    rec.kept_count = update.mixed;
    rec.reactivated_count = update.reactivated;
    rec.updates = static_cast<int>(update.minibatches.size());
    rec.skipped_updates = static_cast<int>(update.events.size());
    long tokens = 0;
    double clipped = 0.0;
    double objective = 0.0;
    for (const auto& mb : update.minibatches) {
      tokens += mb.tokens;
      clipped += mb.clip_fraction * static_cast<double>(mb.tokens);
      objective += mb.objective_value;
    }
    rec.clip_fraction = tokens > 0 ? clipped / static_cast<double>(tokens) : 0.0;
    rec.objective_value = update.minibatches.empty() ? 0.0 : objective / rec.updates;
    rec.tracked_fraction = state.tracker.fraction_tracked();

    result.stream.entries.emplace_back(rec);
    for (auto& mb : update.minibatches) result.stream.entries.emplace_back(std::move(mb));
    for (auto& ev : update.events) result.stream.entries.emplace_back(std::move(ev));

    if (!options.checkpoint_dir.empty() && cfg.checkpoint_every > 0 &&
        step % cfg.checkpoint_every == 0) {
      save_checkpoint(options.checkpoint_dir / fmt::format("step_{:06d}", step), cfg, tasks, state);
    }
  }
  if (!options.checkpoint_dir.empty()) {
    save_checkpoint(options.checkpoint_dir / "final", cfg, tasks, state);
  }
  result.state = std::move(state);
  return result;
}

RunResult run(const TrainerConfig& cfg, const TaskSet& tasks, const RunOptions& options) {
  return resume(cfg, tasks, init_state(cfg, tasks), options);
}

}  // namespace erpo
