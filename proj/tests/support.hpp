#pragma once

#include <vector>

#include "erpo/env.hpp"
#include "erpo/policy.hpp"
#include "oracles.hpp"

inline oracle::Table to_table(const erpo::LogitTable& z) {
  oracle::Table t(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) t[static_cast<std::size_t>(r)].push_back(z(r, c));
  }
  return t;
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline erpo::Policy single_row_policy(std::vector<double> logits) {
  erpo::Policy p(1, static_cast<int>(logits.size()), 1);
  for (std::size_t i = 0; i < logits.size(); ++i) p.logits(0)(0, static_cast<Eigen::Index>(i)) = logits[i];
  return p;
}

// First accepted content sequence in lexicographic order (exhaustive search).
inline std::vector<int> accepted_sequence(const erpo::Prompt& prompt, int V) {
  std::vector<int> seq(static_cast<std::size_t>(prompt.spec.length), 1);
  for (;;) {
    int sum = 0;
    for (int t : seq) sum += t;
    for (int target : prompt.spec.targets) {
      if (sum % V == target) return seq;
    }
    std::size_t i = 0;
    while (i < seq.size() && seq[i] == V - 1) seq[i++] = 1;
    if (i == seq.size()) return {};
    ++seq[i];
  }
}

// Puts `weight` on an accepted sequence (and the stop after it) for every
// prompt with id < saturated; the others stop at once.
inline erpo::Policy split_policy(const erpo::TaskSet& tasks, int saturated, double weight = 80.0) {
  erpo::Policy p(tasks.size(), tasks.vocab_size, tasks.L_max);
  for (const auto& prompt : tasks.prompts) {
    auto& z = p.logits(prompt.id);
    if (prompt.id >= saturated) {
      z(0, erpo::kStopToken) = weight;
      continue;
    }
    const auto seq = accepted_sequence(prompt, tasks.vocab_size);
    for (std::size_t t = 0; t < seq.size(); ++t) z(static_cast<Eigen::Index>(t), seq[t]) = weight;
    if (static_cast<int>(seq.size()) < tasks.L_max) z(static_cast<Eigen::Index>(seq.size()), erpo::kStopToken) = weight;
  }
  return p;
}
