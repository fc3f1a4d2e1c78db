#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "erpo/config.hpp"
#include "erpo/types.hpp"

namespace erpo {

/// Prompts with dense ids in [0, size). Ids below `num_train` form the
/// training split; the rest are held out for evaluation.
struct TaskSet {
  std::vector<Prompt> prompts;
  int vocab_size = 0;
  int L_max = 0;
  int num_train = 0;

  int size() const { return static_cast<int>(prompts.size()); }
  const Prompt& at(int id) const;

  friend bool operator==(const TaskSet&, const TaskSet&) = default;
};

/// Relative weights for difficulty levels 1, 2, 3, ...
struct DifficultyMix {
  std::vector<double> weights;
};

/// Required content length for a difficulty level: min(difficulty, L_max).
int content_length_for(int difficulty, int L_max);
/// Number of admissible sums: max(1, ceil((V-1) / 2^difficulty)), capped by
/// the number of reachable residues.
int target_count_for(int difficulty, int vocab_size, int L_max);
/// Residues mod V reachable by exactly `length` tokens drawn from 1..V-1.
std::vector<int> reachable_sums(int length, int vocab_size);

/// Deterministic in `seed`. Throws EmptyMix when the mix has no positive
/// mass and InvalidArgument for n_prompts < 1.
TaskSet make_taskset(std::uint64_t seed, int n_prompts, const DifficultyMix& mix,
                     int vocab_size, int L_max);
/// Training prompts followed by held-out prompts, as configured.
TaskSet make_taskset(const TrainerConfig& cfg);

/// Content tokens of a response: everything before the first stop token.
/// Returns false in `well_formed` if tokens follow a stop token.
std::span<const Token> content_tokens(std::span<const Token> tokens, bool* well_formed = nullptr);

/// True iff the response satisfies the prompt's acceptance rule. Throws
/// TokenOutOfRange for tokens outside [0, vocab_size).
bool verify(const Prompt& prompt, std::span<const Token> tokens, int vocab_size);
bool verify(const Prompt& prompt, const Response& response, int vocab_size);

/// R+ if correct, R- otherwise.
double reward(bool correct, const TrainerConfig& cfg);

/// Answer-equivalence class of a response: every accepted response maps to
/// the prompt's ground truth; rejected ones map to "<length>:<sum mod V>".
std::string canonical_answer(const Prompt& prompt, std::span<const Token> tokens, int vocab_size);
std::string ground_truth(const Prompt& prompt);

/// One prompt per line: id, difficulty, length, targets, answer (TAB separated),
/// preceded by a header line carrying vocab_size, L_max and num_train.
void write_taskset(const TaskSet& tasks, std::ostream& out);
TaskSet read_taskset(std::istream& in);

}  // namespace erpo
