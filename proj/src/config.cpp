#include "erpo/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "erpo/errors.hpp"

namespace erpo {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(ErrorKind::InvalidConfig,
              fmt::format("field '{}': cannot parse value '{}'", key, value));
}

void parse_value(std::string_view key, std::string_view text, int& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || ptr != text.data() + text.size()) bad_value(key, text);
}

void parse_value(std::string_view key, std::string_view text, std::uint64_t& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || ptr != text.data() + text.size()) bad_value(key, text);
}

void parse_value(std::string_view key, std::string_view text, double& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || ptr != text.data() + text.size()) bad_value(key, text);
}

void parse_value(std::string_view key, std::string_view text, bool& out) {
  if (text == "true" || text == "1") {
    out = true;
  } else if (text == "false" || text == "0") {
    out = false;
  } else {
    bad_value(key, text);
  }
}

void parse_value(std::string_view key, std::string_view text, Algorithm& out) {
  try {
    out = parse_algorithm(text);
  } catch (const Error&) {
    bad_value(key, text);
  }
}

void parse_value(std::string_view key, std::string_view text, OptimizerKind& out) {
  if (text == "sgd") {
    out = OptimizerKind::Sgd;
  } else if (text == "adam") {
    out = OptimizerKind::Adam;
  } else {
    bad_value(key, text);
  }
}

void parse_value(std::string_view key, std::string_view text, std::vector<double>& out) {
  out.clear();
  while (!text.empty()) {
    const auto comma = text.find(',');
    double v = 0.0;
    parse_value(key, trim(text.substr(0, comma)), v);
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
}

std::string format_value(int v) { return fmt::format("{}", v); }
std::string format_value(std::uint64_t v) { return fmt::format("{}", v); }
std::string format_value(double v) { return fmt::format("{}", v); }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(Algorithm v) { return std::string(to_string(v)); }
std::string format_value(OptimizerKind v) { return v == OptimizerKind::Sgd ? "sgd" : "adam"; }
std::string format_value(const std::vector<double>& v) { return fmt::format("{}", fmt::join(v, ",")); }

// Single source of truth for key names and their order in serialized files.
template <typename Config, typename Visitor>
void visit_fields(Config& c, Visitor&& f) {
  f("algorithm", c.algorithm);
  f("seed", c.seed);
  f("rollout.group_size", c.group_size);
  f("rollout.prompt_batch", c.prompt_batch);
  f("rollout.top_p", c.top_p);
  f("rollout.ratio_under_sampling_temp", c.ratio_under_sampling_temp);
  f("train.minibatch", c.minibatch);
  f("train.steps", c.steps);
  f("train.learning_rate", c.learning_rate);
  f("train.optimizer", c.optimizer);
  f("train.adam_beta1", c.adam_beta1);
  f("train.adam_beta2", c.adam_beta2);
  f("train.adam_epsilon", c.adam_epsilon);
  f("train.warmup_steps", c.warmup_steps);
  f("train.refill", c.refill);
  f("train.refill_cap", c.refill_cap);
  f("train.checkpoint_every", c.checkpoint_every);
  f("clip.eps", c.eps);
  f("clip.eps_low", c.eps_low);
  f("clip.eps_high", c.eps_high);
  f("kl.beta", c.beta);
  f("reward.correct", c.reward_correct);
  f("reward.incorrect", c.reward_incorrect);
  f("temp.T0", c.T0);
  f("temp.Ts", c.Ts);
  f("temp.Tmax", c.Tmax);
  f("env.vocab_size", c.vocab_size);
  f("env.L_max", c.L_max);
  f("env.n_prompts", c.n_prompts);
  f("env.n_holdout", c.n_holdout);
  f("env.difficulty_mix", c.difficulty_mix);
  f("policy.init_scale", c.init_scale);
  f("eval.k", c.eval_k);
  f("eval.temperature", c.eval_temperature);
  f("eval.top_p", c.eval_top_p);
}

[[noreturn]] void reject(ErrorKind kind, std::string_view field, const std::string& why) {
  throw Error(kind, fmt::format("field '{}': {}", field, why));
}

}  // namespace

std::string_view to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::Grpo: return "grpo";
    case Algorithm::Dapo: return "dapo";
    case Algorithm::DapoRa: return "dapo+ra";
    case Algorithm::DapoErpo: return "dapo+erpo";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view text) {
  if (text == "grpo") return Algorithm::Grpo;
  if (text == "dapo") return Algorithm::Dapo;
  if (text == "dapo+ra" || text == "ra") return Algorithm::DapoRa;
  if (text == "dapo+erpo" || text == "erpo") return Algorithm::DapoErpo;
  throw Error(ErrorKind::InvalidConfig, fmt::format("unknown algorithm '{}'", text));
}

TrainerConfig validate_config(TrainerConfig cfg) {
  if (!(cfg.T0 > 0.0)) reject(ErrorKind::TemperatureOrder, "temp.T0", "must be positive");
  if (cfg.T0 > cfg.Tmax) {
    reject(ErrorKind::TemperatureOrder, "temp.T0",
           fmt::format("T0={} exceeds temp.Tmax={}", cfg.T0, cfg.Tmax));
  }
  if (!(cfg.Ts >= 0.0)) reject(ErrorKind::TemperatureOrder, "temp.Ts", "must be nonnegative");
  if (cfg.group_size < 2) {
    reject(ErrorKind::DegenerateGroup, "rollout.group_size",
           fmt::format("G={} but at least 2 responses are needed per group", cfg.group_size));
  }
  if (!(cfg.reward_correct > cfg.reward_incorrect)) {
    reject(ErrorKind::RewardOrder, "reward.correct",
           fmt::format("R+={} must exceed reward.incorrect={}", cfg.reward_correct,
                       cfg.reward_incorrect));
  }
  if (!(cfg.eps_low > 0.0)) reject(ErrorKind::InvalidConfig, "clip.eps_low", "must be positive");
  if (!(cfg.eps_high > 0.0)) reject(ErrorKind::InvalidConfig, "clip.eps_high", "must be positive");
  if (!(cfg.eps > 0.0)) reject(ErrorKind::InvalidConfig, "clip.eps", "must be positive");
  if (!(cfg.beta >= 0.0)) reject(ErrorKind::InvalidConfig, "kl.beta", "must be nonnegative");
  if (cfg.prompt_batch < 1) reject(ErrorKind::InvalidConfig, "rollout.prompt_batch", "must be >= 1");
  if (cfg.minibatch < 1) reject(ErrorKind::InvalidConfig, "train.minibatch", "must be >= 1");
  if (static_cast<long>(cfg.minibatch) >
      static_cast<long>(cfg.prompt_batch) * static_cast<long>(cfg.group_size)) {
    reject(ErrorKind::InvalidConfig, "train.minibatch",
           fmt::format("{} exceeds prompt_batch * group_size = {}", cfg.minibatch,
                       cfg.prompt_batch * cfg.group_size));
  }
  if (cfg.steps < 0) reject(ErrorKind::InvalidConfig, "train.steps", "must be >= 0");
  if (!(cfg.learning_rate >= 0.0)) {
    reject(ErrorKind::InvalidConfig, "train.learning_rate", "must be nonnegative");
  }
  if (cfg.warmup_steps < 0) reject(ErrorKind::InvalidConfig, "train.warmup_steps", "must be >= 0");
  if (cfg.refill_cap < 0) reject(ErrorKind::InvalidConfig, "train.refill_cap", "must be >= 0");
  if (cfg.checkpoint_every < 0) {
    reject(ErrorKind::InvalidConfig, "train.checkpoint_every", "must be >= 0");
  }
  if (!(cfg.top_p > 0.0 && cfg.top_p <= 1.0)) {
    reject(ErrorKind::InvalidConfig, "rollout.top_p", "must lie in (0, 1]");
  }
  if (!(cfg.eval_top_p > 0.0 && cfg.eval_top_p <= 1.0)) {
    reject(ErrorKind::InvalidConfig, "eval.top_p", "must lie in (0, 1]");
  }
  if (!(cfg.eval_temperature > 0.0)) {
    reject(ErrorKind::InvalidConfig, "eval.temperature", "must be positive");
  }
  if (cfg.eval_k < 1) reject(ErrorKind::InvalidConfig, "eval.k", "must be >= 1");
  if (cfg.vocab_size < 2) reject(ErrorKind::InvalidConfig, "env.vocab_size", "must be >= 2");
  if (cfg.L_max < 1) reject(ErrorKind::InvalidConfig, "env.L_max", "must be >= 1");
  if (cfg.n_prompts < 1) reject(ErrorKind::InvalidConfig, "env.n_prompts", "must be >= 1");
  if (cfg.n_holdout < 0) reject(ErrorKind::InvalidConfig, "env.n_holdout", "must be >= 0");
  if (cfg.prompt_batch > cfg.n_prompts) {
    reject(ErrorKind::InvalidConfig, "rollout.prompt_batch",
           fmt::format("{} exceeds env.n_prompts = {}", cfg.prompt_batch, cfg.n_prompts));
  }
  if (!(cfg.init_scale >= 0.0)) {
    reject(ErrorKind::InvalidConfig, "policy.init_scale", "must be nonnegative");
  }
  if (!(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0 && cfg.adam_beta2 >= 0.0 &&
        cfg.adam_beta2 < 1.0 && cfg.adam_epsilon > 0.0)) {
    reject(ErrorKind::InvalidConfig, "train.adam_beta1", "adam moments must lie in [0, 1)");
  }
  return cfg;
}

void apply_override(TrainerConfig& cfg, std::string_view key, std::string_view value) {
  bool found = false;
  visit_fields(cfg, [&](std::string_view name, auto& field) {
    if (name == key) {
      parse_value(name, trim(value), field);
      found = true;
    }
  });
  if (!found) throw Error(ErrorKind::UnknownKey, fmt::format("unknown config key '{}'", key));
}

void apply_assignment(TrainerConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorKind::InvalidConfig,
                fmt::format("expected key=value, got '{}'", assignment));
  }
  apply_override(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

TrainerConfig parse_config(std::string_view text) {
  TrainerConfig cfg;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    try {
      apply_assignment(cfg, line);
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("line {}: {}", line_no, e.what()));
    }
  }
  return cfg;
}

TrainerConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, fmt::format("cannot open '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string serialize_config(const TrainerConfig& cfg) {
  std::string out;
  visit_fields(cfg, [&](std::string_view name, const auto& field) {
    out += fmt::format("{} = {}\n", name, format_value(field));
  });
  return out;
}

void save_config(const TrainerConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoFailure, fmt::format("cannot write '{}'", path.string()));
  out << serialize_config(cfg);
}

std::uint64_t config_hash(const TrainerConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_config(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace erpo
