#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "erpo/rng.hpp"
#include "erpo/types.hpp"

namespace erpo {

/// Logits for one prompt: row = position, column = token.
using LogitTable = Eigen::MatrixXd;

/// Sparse gradient over the policy: only prompts that received signal.
using PolicyGradient = std::map<int, LogitTable>;

/// Tabular autoregressive policy. Each prompt owns an L_max x V logit table;
/// the token distribution at a position depends on the prompt and position.
class Policy {
 public:
  Policy() = default;
  Policy(int num_prompts, int vocab_size, int L_max);

  /// Logits drawn i.i.d. from N(0, scale^2); scale 0 gives the uniform policy.
  static Policy random(int num_prompts, int vocab_size, int L_max, double scale, std::uint64_t seed);

  int num_prompts() const { return static_cast<int>(tables_.size()); }
  int vocab_size() const { return vocab_size_; }
  int L_max() const { return L_max_; }
  Token stop_token() const { return kStopToken; }

  const LogitTable& logits(int prompt_id) const;
  LogitTable& logits(int prompt_id);

  friend bool operator==(const Policy& a, const Policy& b);

 private:
  std::vector<LogitTable> tables_;
  int vocab_size_ = 0;
  int L_max_ = 0;
};

/// softmax(logits / temperature) followed by nucleus truncation. Throws
/// NonpositiveTemperature for temperature <= 0.
Eigen::VectorXd token_distribution(const Policy& policy, int prompt_id, int position,
                                   double temperature, double top_p);

struct SamplingParams {
  double temperature = 1.0;
  double top_p = 1.0;
  /// Argmax decoding; stands in for the temperature -> 0 limit.
  bool greedy = false;
  /// Record behavior log-probs under softmax(z / temperature) instead of the
  /// temperature-1 policy. Never truncated by top_p either way.
  bool record_at_sampling_temperature = false;
};

/// Draws `n` responses token by token until the stop token or L_max.
/// Response i uses `stream.child(i)`, so results depend only on the stream key.
std::vector<Response> sample(const Policy& policy, int prompt_id, const SamplingParams& params,
                             int n, const RandomStream& stream);

/// Sum over positions of log pi(o_t | q, o_<t) under softmax(z / temperature),
/// untruncated. Empty responses give 0.
double sequence_log_prob(const Policy& policy, int prompt_id, std::span<const Token> tokens,
                         double temperature = 1.0);

/// d sequence_log_prob / d logits(prompt_id): (onehot - p) / temperature on
/// each generated position, zero elsewhere.
LogitTable logprob_grad(const Policy& policy, int prompt_id, std::span<const Token> tokens,
                        double temperature = 1.0);

/// Line-delimited dump, one row per (prompt, position). Values are written in
/// shortest round-trip form so a reload reproduces the table bit for bit.
void write_policy(const Policy& policy, std::ostream& out);
Policy read_policy(std::istream& in);

}  // namespace erpo
