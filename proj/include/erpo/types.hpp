#pragma once

#include <vector>

namespace erpo {

using Token = int;

/// Token 0 terminates a response and carries value 0 in every sum.
inline constexpr Token kStopToken = 0;

/// Modular target-sum rule: a response is accepted when it has exactly
/// `length` content tokens whose sum modulo the vocabulary size is one of
/// `targets`.
struct VerifierSpec {
  int length = 1;
  std::vector<int> targets;  // sorted, distinct

  friend bool operator==(const VerifierSpec&, const VerifierSpec&) = default;
};

struct Prompt {
  int id = 0;
  VerifierSpec spec;
  int answer = 0;  // canonical accepted sum (smallest target)
  int difficulty = 1;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

/// One sampled response. `tokens` includes the stop token when one was
/// emitted; behavior-policy log-probs are per emitted token.
struct Response {
  std::vector<Token> tokens;
  double logprob_old = 0.0;
  std::vector<double> token_logprobs_old;

  int length() const { return static_cast<int>(tokens.size()); }
};

struct RolloutGroup {
  int prompt_id = 0;
  std::vector<Response> responses;
  std::vector<double> rewards;
  double temperature_used = 1.0;
  int num_correct = 0;
  bool all_correct = false;
  bool all_incorrect = false;

  int size() const { return static_cast<int>(responses.size()); }
};

}  // namespace erpo
