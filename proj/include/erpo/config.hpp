#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace erpo {

enum class Algorithm { Grpo, Dapo, DapoRa, DapoErpo };
enum class OptimizerKind { Sgd, Adam };

std::string_view to_string(Algorithm algo);
/// Accepts the config spellings (grpo, dapo, dapo+ra, dapo+erpo) and the
/// short CLI aliases (ra, erpo).
Algorithm parse_algorithm(std::string_view text);

/// Every hyperparameter of an experiment. Keys in the config file are the
/// dotted names listed in `config.cpp`; defaults are desk-scale.
struct TrainerConfig {
  Algorithm algorithm = Algorithm::Dapo;
  std::uint64_t seed = 0;

  // rollout
  int group_size = 8;
  int prompt_batch = 32;
  double top_p = 1.0;
  bool ratio_under_sampling_temp = false;

  // optimization
  int minibatch = 64;
  int steps = 100;
  double learning_rate = 32.0;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int warmup_steps = 0;
  bool refill = false;
  int refill_cap = 32;
  int checkpoint_every = 0;

  // objective
  double eps = 0.2;
  double eps_low = 0.2;
  double eps_high = 0.28;
  double beta = 0.0;

  // rewards
  double reward_correct = 1.0;
  double reward_incorrect = -1.0;

  // temperature schedule
  double T0 = 1.0;
  double Ts = 0.02;
  double Tmax = 1.2;

  // environment and policy
  int vocab_size = 6;
  int L_max = 4;
  int n_prompts = 256;
  int n_holdout = 64;
  std::vector<double> difficulty_mix = {1.0, 1.0, 1.0};
  double init_scale = 0.0;

  // evaluation
  int eval_k = 32;
  double eval_temperature = 1.0;
  double eval_top_p = 0.7;
};

/// Returns `cfg` unchanged when every invariant holds, otherwise throws an
/// `Error` naming the offending field.
TrainerConfig validate_config(TrainerConfig cfg);

/// Sets one field from its textual value. Unknown keys throw UnknownKey.
void apply_override(TrainerConfig& cfg, std::string_view key, std::string_view value);
/// Parses a `key = value` assignment (used for CLI overrides).
void apply_assignment(TrainerConfig& cfg, std::string_view assignment);

/// Parses the flat key-value format on top of the defaults. Does not validate.
TrainerConfig parse_config(std::string_view text);
TrainerConfig load_config(const std::filesystem::path& path);

/// Writes every field, one `key = value` per line, in a fixed order.
std::string serialize_config(const TrainerConfig& cfg);
void save_config(const TrainerConfig& cfg, const std::filesystem::path& path);

/// FNV-1a over the serialized form.
std::uint64_t config_hash(const TrainerConfig& cfg);

}  // namespace erpo
