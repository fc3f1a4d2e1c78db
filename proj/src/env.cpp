#include "erpo/env.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "erpo/errors.hpp"
#include "erpo/rng.hpp"

namespace erpo {

const Prompt& TaskSet::at(int id) const {
  if (id < 0 || id >= size()) {
    throw Error(ErrorKind::UnknownPrompt, fmt::format("prompt id {} not in taskset", id));
  }
  return prompts[static_cast<std::size_t>(id)];
}

int content_length_for(int difficulty, int L_max) { return std::min(difficulty, L_max); }

std::vector<int> reachable_sums(int length, int vocab_size) {
  std::vector<char> reach(static_cast<std::size_t>(vocab_size), 0);
  reach[0] = 1;
  for (int step = 0; step < length; ++step) {
    std::vector<char> next(reach.size(), 0);
    for (int r = 0; r < vocab_size; ++r) {
      if (!reach[static_cast<std::size_t>(r)]) continue;
      for (int tok = 1; tok < vocab_size; ++tok) {
        next[static_cast<std::size_t>((r + tok) % vocab_size)] = 1;
      }
    }
    reach = std::move(next);
  }
  std::vector<int> out;
  for (int r = 0; r < vocab_size; ++r) {
    if (reach[static_cast<std::size_t>(r)]) out.push_back(r);
  }
  return out;
}

int target_count_for(int difficulty, int vocab_size, int L_max) {
  const int content = vocab_size - 1;
  const int divisor = 1 << std::min(difficulty, 20);
  const int wanted = std::max(1, (content + divisor - 1) / divisor);
  const auto reachable = reachable_sums(content_length_for(difficulty, L_max), vocab_size);
  return std::min<int>(wanted, static_cast<int>(reachable.size()));
}

TaskSet make_taskset(std::uint64_t seed, int n_prompts, const DifficultyMix& mix, int vocab_size,
                     int L_max) {
  if (n_prompts < 1) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("n_prompts must be >= 1, got {}", n_prompts));
  }
  if (vocab_size < 2 || L_max < 1) {
    throw Error(ErrorKind::InvalidArgument, "vocab_size must be >= 2 and L_max >= 1");
  }
  double total = 0.0;
  for (double w : mix.weights) {
    if (w < 0.0) throw Error(ErrorKind::EmptyMix, "difficulty weights must be nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::EmptyMix, "difficulty mix has zero mass");

  TaskSet tasks;
  tasks.vocab_size = vocab_size;
  tasks.L_max = L_max;
  tasks.num_train = n_prompts;
  tasks.prompts.reserve(static_cast<std::size_t>(n_prompts));
  for (int id = 0; id < n_prompts; ++id) {
    auto rng = RandomStream::derive(seed, StreamTag::Taskset, {static_cast<std::uint64_t>(id)});
    double pick = rng.uniform() * total;
    int difficulty = static_cast<int>(mix.weights.size());
    for (std::size_t level = 0; level < mix.weights.size(); ++level) {
      if (mix.weights[level] <= 0.0) continue;
      if (pick < mix.weights[level]) {
        difficulty = static_cast<int>(level) + 1;
        break;
      }
      pick -= mix.weights[level];
    }
    while (mix.weights[static_cast<std::size_t>(difficulty - 1)] <= 0.0) --difficulty;

    Prompt p;
    p.id = id;
    p.difficulty = difficulty;
    p.spec.length = content_length_for(difficulty, L_max);
    auto pool = reachable_sums(p.spec.length, vocab_size);
    const int count = target_count_for(difficulty, vocab_size, L_max);
    // Partial Fisher-Yates draws `count` distinct residues.
    for (int i = 0; i < count; ++i) {
      const auto j = static_cast<std::size_t>(i) + rng.below(pool.size() - static_cast<std::size_t>(i));
      std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    }
    p.spec.targets.assign(pool.begin(), pool.begin() + count);
    std::sort(p.spec.targets.begin(), p.spec.targets.end());
    p.answer = p.spec.targets.front();
    tasks.prompts.push_back(std::move(p));
  }
  return tasks;
}

TaskSet make_taskset(const TrainerConfig& cfg) {
  const int total = cfg.n_prompts + cfg.n_holdout;
  TaskSet tasks = make_taskset(cfg.seed, total, DifficultyMix{cfg.difficulty_mix}, cfg.vocab_size,
                               cfg.L_max);
  tasks.num_train = cfg.n_prompts;
  return tasks;
}

std::span<const Token> content_tokens(std::span<const Token> tokens, bool* well_formed) {
  const auto stop = std::find(tokens.begin(), tokens.end(), kStopToken);
  if (well_formed) *well_formed = stop == tokens.end() || stop + 1 == tokens.end();
  return tokens.first(static_cast<std::size_t>(stop - tokens.begin()));
}

namespace {

void check_range(std::span<const Token> tokens, int vocab_size) {
  for (Token t : tokens) {
    if (t < 0 || t >= vocab_size) {
      throw Error(ErrorKind::TokenOutOfRange,
                  fmt::format("token {} outside vocabulary of size {}", t, vocab_size));
    }
  }
}

int modular_sum(std::span<const Token> content, int vocab_size) {
  return std::accumulate(content.begin(), content.end(), 0) % vocab_size;
}

}  // namespace

bool verify(const Prompt& prompt, std::span<const Token> tokens, int vocab_size) {
  check_range(tokens, vocab_size);
  bool well_formed = true;
  const auto content = content_tokens(tokens, &well_formed);
  if (!well_formed) return false;
  if (static_cast<int>(content.size()) != prompt.spec.length) return false;
  return std::binary_search(prompt.spec.targets.begin(), prompt.spec.targets.end(),
                            modular_sum(content, vocab_size));
}

bool verify(const Prompt& prompt, const Response& response, int vocab_size) {
  return verify(prompt, std::span<const Token>(response.tokens), vocab_size);
}

double reward(bool correct, const TrainerConfig& cfg) {
  return correct ? cfg.reward_correct : cfg.reward_incorrect;
}

std::string ground_truth(const Prompt& prompt) {
  return fmt::format("{}:{}", prompt.spec.length, prompt.answer);
}

std::string canonical_answer(const Prompt& prompt, std::span<const Token> tokens, int vocab_size) {
  if (verify(prompt, tokens, vocab_size)) return ground_truth(prompt);
  const auto content = content_tokens(tokens);
  return fmt::format("{}:{}", content.size(), modular_sum(content, vocab_size));
}

void write_taskset(const TaskSet& tasks, std::ostream& out) {
  out << fmt::format("# erpo-taskset v1 vocab_size={} L_max={} num_train={} size={}\n",
                     tasks.vocab_size, tasks.L_max, tasks.num_train, tasks.size());
  for (const Prompt& p : tasks.prompts) {
    out << fmt::format("{}\t{}\t{}\t{}\t{}\n", p.id, p.difficulty, p.spec.length,
                       fmt::join(p.spec.targets, ","), p.answer);
  }
}

TaskSet read_taskset(std::istream& in) {
  auto corrupt = [](int line_no, std::string_view why) -> Error {
    return Error(ErrorKind::CorruptSnapshot, fmt::format("taskset line {}: {}", line_no, why));
  };
  std::string line;
  int line_no = 1;
  if (!std::getline(in, line)) throw corrupt(line_no, "missing header");
  TaskSet tasks;
  int size = 0;
  if (std::sscanf(line.c_str(), "# erpo-taskset v1 vocab_size=%d L_max=%d num_train=%d size=%d",
                  &tasks.vocab_size, &tasks.L_max, &tasks.num_train, &size) != 4) {
    throw corrupt(line_no, "bad header");
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    Prompt p;
    std::string targets;
    if (!(fields >> p.id >> p.difficulty >> p.spec.length >> targets >> p.answer)) {
      throw corrupt(line_no, "expected 5 fields");
    }
    std::istringstream ts(targets);
    for (std::string item; std::getline(ts, item, ',');) p.spec.targets.push_back(std::stoi(item));
    if (p.id != tasks.size()) throw corrupt(line_no, "ids must be dense and ordered");
    if (p.spec.targets.empty()) throw corrupt(line_no, "empty target set");
    tasks.prompts.push_back(std::move(p));
  }
  if (tasks.size() != size) throw corrupt(line_no, "truncated taskset");
  return tasks;
}

}  // namespace erpo
