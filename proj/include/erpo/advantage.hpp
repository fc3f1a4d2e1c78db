#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "erpo/distribution.hpp"
#include "erpo/types.hpp"

namespace erpo {

enum class AdvantageSource { Standard, Reactivated };

struct AdvantageSet {
  int prompt_id = -1;
  Eigen::VectorXd advantages;
  bool degenerate = false;
  AdvantageSource source = AdvantageSource::Standard;
};

/// (x - mean) / popstd over the entries of `values`. Centering is done
/// relative to the first entry so nearly-equal values do not cancel.
/// Returns zeros when every entry is identical.
template <typename Derived>
Vector<typename Derived::Scalar> standardize(const Eigen::MatrixBase<Derived>& values,
                                             bool* degenerate = nullptr) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = values.size();
  const bool constant = values.maxCoeff() == values.minCoeff();
  if (degenerate) *degenerate = constant;
  if (constant) return Vector<Scalar>::Zero(n);
  const Vector<Scalar> shifted = values.array() - values(0);
  const Scalar mean = shifted.mean();
  const Vector<Scalar> centered = shifted.array() - mean;
  const Scalar popstd = std::sqrt(centered.squaredNorm() / Scalar(n));
  return centered / popstd;
}

/// Group-normalized advantages with population std. Throws GroupTooSmall
/// for fewer than two rewards.
AdvantageSet group_advantage(std::span<const double> rewards, int prompt_id = -1);

/// Advantages for an all-correct group after appending a single pseudo
/// negative reward to the reward multiset. Every entry equals 1/sqrt(G).
/// Throws NotAllCorrect if any reward differs from `reward_correct`.
AdvantageSet reactivated_advantage(std::span<const double> rewards, double reward_correct,
                                   double reward_incorrect, int prompt_id = -1);

struct FilterResult {
  std::vector<RolloutGroup> kept;
  int removed_all_correct = 0;
  int removed_all_incorrect = 0;
};

/// Keeps groups whose correct count lies strictly between 0 and G.
FilterResult dynamic_filter(std::vector<RolloutGroup> groups);

}  // namespace erpo
