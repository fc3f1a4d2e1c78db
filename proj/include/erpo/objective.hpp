#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "erpo/advantage.hpp"
#include "erpo/config.hpp"
#include "erpo/policy.hpp"

namespace erpo {

/// exp(logprob_new - logprob_old). Throws UndefinedRatio when the old
/// probability is zero.
double importance_ratio(double logprob_new, double logprob_old);

template <typename Scalar>
struct ClippedTerm {
  Scalar value;
  bool clipped;  // the clipped branch is strictly smaller than ratio * advantage
};

/// min(ratio * A, clip(ratio, 1 - eps_low, 1 + eps_high) * A).
template <typename Scalar>
ClippedTerm<Scalar> clipped_term(Scalar ratio, Scalar advantage, Scalar eps_low, Scalar eps_high) {
  const Scalar bounded = std::clamp(ratio, Scalar(1) - eps_low, Scalar(1) + eps_high);
  const Scalar plain = ratio * advantage;
  const Scalar clipped = bounded * advantage;
  return clipped < plain ? ClippedTerm<Scalar>{clipped, true} : ClippedTerm<Scalar>{plain, false};
}

/// Exact KL(policy || ref) at each position in `positions` of one prompt,
/// averaged over the positions. Empty `positions` gives 0.
double kl_penalty(const Policy& policy, const Policy& ref, int prompt_id,
                  std::span<const int> positions);

/// One response scored for the surrogate: its advantage and the temperature
/// under which both the new and the recorded old log-probs are evaluated.
struct TrainingSample {
  int prompt_id = 0;
  const Response* response = nullptr;
  double advantage = 0.0;
  double ratio_temperature = 1.0;
};

struct ObjectiveReport {
  double value = 0.0;
  PolicyGradient gradient;
  double clip_fraction = 0.0;
  double kl_value = 0.0;
  long tokens_counted = 0;
};

struct ClipRange {
  double low = 0.2;
  double high = 0.2;
};

/// Flattens groups and their advantage sets into samples (same order).
std::vector<TrainingSample> make_samples(std::span<const RolloutGroup> groups,
                                         std::span<const AdvantageSet> advantages,
                                         bool ratio_under_sampling_temp);

/// Per-response token mean of the clipped terms, averaged over responses,
/// minus beta times the per-token KL to `ref`. With equal group sizes the
/// response average equals the average over groups of the in-group mean.
ObjectiveReport grpo_objective(std::span<const TrainingSample> samples, const Policy& policy,
                               const Policy& ref, double eps, double beta);
ObjectiveReport grpo_objective(std::span<const TrainingSample> samples, const Policy& policy,
                               const Policy& ref, const TrainerConfig& cfg);

/// Sum of clipped terms over every token of every sample divided by the
/// total token count, with decoupled clip bounds. Throws EmptyBatch when no
/// sample contributes a token.
ObjectiveReport dapo_objective(std::span<const TrainingSample> samples, const Policy& policy,
                               ClipRange clip);
ObjectiveReport dapo_objective(std::span<const TrainingSample> samples, const Policy& policy,
                               const TrainerConfig& cfg);

enum class ObjectiveKind { Grpo, Dapo };

/// A self-contained random objective instance for gradient checking.
struct GradientCheckInstance {
  ObjectiveKind kind = ObjectiveKind::Dapo;
  Policy policy;
  Policy ref;
  std::vector<Response> responses;
  std::vector<TrainingSample> samples;  // point into `responses`
  double eps = 0.2;
  ClipRange clip{0.2, 0.28};
  double beta = 0.0;

  GradientCheckInstance() = default;
  GradientCheckInstance(const GradientCheckInstance& other);
  GradientCheckInstance& operator=(const GradientCheckInstance& other);
  GradientCheckInstance(GradientCheckInstance&&) = default;
  GradientCheckInstance& operator=(GradientCheckInstance&&) = default;
};

/// Random small instance (2 groups, G=2, L_max=2) whose token ratios all sit
/// farther than `10 h` from the clip boundaries.
GradientCheckInstance random_gradient_check_instance(ObjectiveKind kind, std::uint64_t seed,
                                                     double h = 1e-5);

double evaluate_objective(const GradientCheckInstance& instance, const Policy& policy);
ObjectiveReport evaluate_report(const GradientCheckInstance& instance, const Policy& policy);

/// Max over logits of |analytic - fd| / max(|analytic|, |fd|, 1e-6), using
/// central differences with step h.
double objective_gradient_check(const GradientCheckInstance& instance, double h);

}  // namespace erpo
