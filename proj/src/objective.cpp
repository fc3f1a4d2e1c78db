#include "erpo/objective.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

#include "erpo/distribution.hpp"
#include "erpo/errors.hpp"

namespace erpo {

double importance_ratio(double logprob_new, double logprob_old) {
  if (std::isinf(logprob_old) && logprob_old < 0.0) {
    throw Error(ErrorKind::UndefinedRatio, "behavior probability is zero");
  }
  return std::exp(logprob_new - logprob_old);
}

double kl_penalty(const Policy& policy, const Policy& ref, int prompt_id,
                  std::span<const int> positions) {
  if (positions.empty()) return 0.0;
  const auto& p_table = policy.logits(prompt_id);
  const auto& q_table = ref.logits(prompt_id);
  double total = 0.0;
  for (int pos : positions) {
    total += kl_divergence(softmax(Eigen::VectorXd(p_table.row(pos).transpose())),
                           softmax(Eigen::VectorXd(q_table.row(pos).transpose())));
  }
  return total / static_cast<double>(positions.size());
}

std::vector<TrainingSample> make_samples(std::span<const RolloutGroup> groups,
                                         std::span<const AdvantageSet> advantages,
                                         bool ratio_under_sampling_temp) {
  if (groups.size() != advantages.size()) {
    throw Error(ErrorKind::InvalidArgument, "one advantage set is required per group");
  }
  std::vector<TrainingSample> samples;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    const auto& adv = advantages[g];
    if (adv.advantages.size() != group.size()) {
      throw Error(ErrorKind::InvalidArgument, "advantage count differs from group size");
    }
    for (int i = 0; i < group.size(); ++i) {
      samples.push_back(TrainingSample{
          group.prompt_id, &group.responses[static_cast<std::size_t>(i)], adv.advantages(i),
          ratio_under_sampling_temp ? group.temperature_used : 1.0});
    }
  }
  return samples;
}

namespace {

// Neumaier summation keeps the objective value independent of term order
// to well below 1e-12.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct Accumulator {
  CompensatedSum value;
  CompensatedSum kl;
  PolicyGradient gradient;
  long tokens = 0;
  long clipped = 0;

  LogitTable& grad_for(const Policy& policy, int prompt_id) {
    auto it = gradient.find(prompt_id);
    if (it == gradient.end()) {
      it = gradient.emplace(prompt_id, LogitTable::Zero(policy.L_max(), policy.vocab_size())).first;
    }
    return it->second;
  }
};

// Adds weight * sum_t clipped_term for one response, plus the analytic
// gradient of that quantity.
void accumulate_surrogate(Accumulator& acc, const Policy& policy, const TrainingSample& s,
                          double weight, double eps_low, double eps_high) {
  const auto& table = policy.logits(s.prompt_id);
  const auto& tokens = s.response->tokens;
  const auto& old_lp = s.response->token_logprobs_old;
  if (old_lp.size() != tokens.size()) {
    throw Error(ErrorKind::InvalidArgument, "response is missing behavior log-probs");
  }
  LogitTable* grad = nullptr;
  const double tau = s.ratio_temperature;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    const Eigen::VectorXd z = table.row(row).transpose();
    const Eigen::VectorXd logp = log_softmax(z, tau);
    const double ratio = importance_ratio(logp(tokens[t]), old_lp[t]);
    const auto term = clipped_term(ratio, s.advantage, eps_low, eps_high);
    acc.value.add(weight * term.value);
    ++acc.tokens;
    if (term.clipped) {
      ++acc.clipped;
      continue;
    }
    if (s.advantage == 0.0) continue;
    if (!grad) grad = &acc.grad_for(policy, s.prompt_id);
    // d ratio / d z = ratio * (onehot - p_tau) / tau
    const double scale = weight * s.advantage * ratio / tau;
    grad->row(row) -= scale * logp.array().exp().matrix().transpose();
    (*grad)(row, tokens[t]) += scale;
  }
}

// Subtracts beta * weight * sum_t KL_t and its gradient.
void accumulate_kl(Accumulator& acc, const Policy& policy, const Policy& ref,
                   const TrainingSample& s, double weight, double beta) {
  const auto& table = policy.logits(s.prompt_id);
  const auto& ref_table = ref.logits(s.prompt_id);
  LogitTable* grad = nullptr;
  for (std::size_t t = 0; t < s.response->tokens.size(); ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    const Eigen::VectorXd p = softmax(Eigen::VectorXd(table.row(row).transpose()));
    const Eigen::VectorXd q = softmax(Eigen::VectorXd(ref_table.row(row).transpose()));
    const double kl = kl_divergence(p, q);
    acc.kl.add(weight * kl);
    acc.value.add(-beta * weight * kl);
    if (beta == 0.0) continue;
    if (!grad) grad = &acc.grad_for(policy, s.prompt_id);
    // d KL / d z_k = p_k (ln(p_k / q_k) - KL)
    const Eigen::VectorXd dkl =
        (p.array() * ((p.array() / q.array()).log() - kl)).matrix();
    grad->row(row) -= beta * weight * dkl.transpose();
  }
}

ObjectiveReport finish(Accumulator&& acc) {
  ObjectiveReport report;
  report.value = acc.value.value();
  report.kl_value = acc.kl.value();
  report.gradient = std::move(acc.gradient);
  report.tokens_counted = acc.tokens;
  report.clip_fraction =
      acc.tokens > 0 ? static_cast<double>(acc.clipped) / static_cast<double>(acc.tokens) : 0.0;
  return report;
}

}  // namespace

ObjectiveReport grpo_objective(std::span<const TrainingSample> samples, const Policy& policy,
                               const Policy& ref, double eps, double beta) {
  Accumulator acc;
  if (samples.empty()) return finish(std::move(acc));
  const double per_response = 1.0 / static_cast<double>(samples.size());
  for (const auto& s : samples) {
    const auto length = s.response->tokens.size();
    if (length == 0) continue;
    const double weight = per_response / static_cast<double>(length);
    accumulate_surrogate(acc, policy, s, weight, eps, eps);
    accumulate_kl(acc, policy, ref, s, weight, beta);
  }
  return finish(std::move(acc));
}

ObjectiveReport grpo_objective(std::span<const TrainingSample> samples, const Policy& policy,
                               const Policy& ref, const TrainerConfig& cfg) {
  return grpo_objective(samples, policy, ref, cfg.eps, cfg.beta);
}

ObjectiveReport dapo_objective(std::span<const TrainingSample> samples, const Policy& policy,
                               ClipRange clip) {
  long total_tokens = 0;
  for (const auto& s : samples) total_tokens += static_cast<long>(s.response->tokens.size());
  if (total_tokens == 0) {
    throw Error(ErrorKind::EmptyBatch, "no tokens remain after dynamic filtering");
  }
  Accumulator acc;
  const double weight = 1.0 / static_cast<double>(total_tokens);
  for (const auto& s : samples) accumulate_surrogate(acc, policy, s, weight, clip.low, clip.high);
  return finish(std::move(acc));
}

ObjectiveReport dapo_objective(std::span<const TrainingSample> samples, const Policy& policy,
                               const TrainerConfig& cfg) {
  return dapo_objective(samples, policy, ClipRange{cfg.eps_low, cfg.eps_high});
}

// --- gradient checking -----------------------------------------------------

GradientCheckInstance::GradientCheckInstance(const GradientCheckInstance& other)
    : kind(other.kind),
      policy(other.policy),
      ref(other.ref),
      responses(other.responses),
      samples(other.samples),
      eps(other.eps),
      clip(other.clip),
      beta(other.beta) {
  for (auto& s : samples) s.response = responses.data() + (s.response - other.responses.data());
}

GradientCheckInstance& GradientCheckInstance::operator=(const GradientCheckInstance& other) {
  if (this != &other) {
    GradientCheckInstance copy(other);
    *this = std::move(copy);  // vector moves keep the response buffer in place
  }
  return *this;
}

namespace {

bool near_kink(double ratio, double lo, double hi, double margin) {
  return std::abs(ratio - lo) <= margin || std::abs(ratio - hi) <= margin;
}

}  // namespace

GradientCheckInstance random_gradient_check_instance(ObjectiveKind kind, std::uint64_t seed,
                                                     double h) {
  constexpr int kGroups = 2;
  constexpr int kGroupSize = 2;
  constexpr int kVocab = 3;
  constexpr int kLength = 2;
  for (std::uint64_t attempt = 0;; ++attempt) {
    auto rng = RandomStream::derive(seed, StreamTag::Test, {attempt});
    GradientCheckInstance inst;
    inst.kind = kind;
    inst.eps = 0.2;
    inst.clip = ClipRange{0.2, 0.28};
    inst.beta = kind == ObjectiveKind::Grpo ? 0.1 : 0.0;
    inst.policy = Policy::random(kGroups, kVocab, kLength, 1.0, rng());
    inst.ref = Policy::random(kGroups, kVocab, kLength, 1.0, rng());
    // The behavior policy is a perturbation of the current one so that some
    // ratios leave the clip band.
    Policy old = inst.policy;
    for (int id = 0; id < kGroups; ++id) {
      old.logits(id) += LogitTable::NullaryExpr(kLength, kVocab, [&] { return 0.4 * rng.normal(); });
    }
    const bool tempered = rng.uniform() < 0.5;
    const double temperature = tempered ? rng.uniform(1.0, 1.4) : 1.0;
    SamplingParams params{temperature, 1.0, false, tempered};
    inst.responses.reserve(kGroups * kGroupSize);
    std::vector<double> advantages;
    std::vector<int> prompt_of;
    for (int id = 0; id < kGroups; ++id) {
      for (auto& r : sample(old, id, params, kGroupSize, rng.child(static_cast<std::uint64_t>(id)))) {
        inst.responses.push_back(std::move(r));
        advantages.push_back(rng.normal());
        prompt_of.push_back(id);
      }
    }
    for (std::size_t i = 0; i < inst.responses.size(); ++i) {
      inst.samples.push_back(TrainingSample{prompt_of[i], &inst.responses[i], advantages[i],
                                            temperature});
    }
    const double lo = 1.0 - (kind == ObjectiveKind::Grpo ? inst.eps : inst.clip.low);
    const double hi = 1.0 + (kind == ObjectiveKind::Grpo ? inst.eps : inst.clip.high);
    bool ok = true;
    for (const auto& s : inst.samples) {
      const auto& table = inst.policy.logits(s.prompt_id);
      for (std::size_t t = 0; t < s.response->tokens.size() && ok; ++t) {
        const auto row = static_cast<Eigen::Index>(t);
        const double lp =
            log_softmax(Eigen::VectorXd(table.row(row).transpose()), s.ratio_temperature)(
                s.response->tokens[t]);
        const double ratio = std::exp(lp - s.response->token_logprobs_old[t]);
        // The ratio moves by at most |d ratio/d z| * h under a perturbation.
        ok = !near_kink(ratio, lo, hi, 10.0 * h * std::max(1.0, ratio));
      }
      if (!ok) break;
    }
    if (ok) return inst;
  }
}

ObjectiveReport evaluate_report(const GradientCheckInstance& instance, const Policy& policy) {
  if (instance.kind == ObjectiveKind::Grpo) {
    return grpo_objective(instance.samples, policy, instance.ref, instance.eps, instance.beta);
  }
  return dapo_objective(instance.samples, policy, instance.clip);
}

double evaluate_objective(const GradientCheckInstance& instance, const Policy& policy) {
  return evaluate_report(instance, policy).value;
}

double objective_gradient_check(const GradientCheckInstance& instance, double h) {
  const ObjectiveReport analytic = evaluate_report(instance, instance.policy);
  Policy probe = instance.policy;
  double worst = 0.0;
  for (int id = 0; id < probe.num_prompts(); ++id) {
    auto& table = probe.logits(id);
    const auto it = analytic.gradient.find(id);
    for (Eigen::Index r = 0; r < table.rows(); ++r) {
      for (Eigen::Index c = 0; c < table.cols(); ++c) {
        const double saved = table(r, c);
        table(r, c) = saved + h;
        const double up = evaluate_objective(instance, probe);
        table(r, c) = saved - h;
        const double down = evaluate_objective(instance, probe);
        table(r, c) = saved;
        const double fd = (up - down) / (2.0 * h);
        const double an = it == analytic.gradient.end() ? 0.0 : it->second(r, c);
        const double denom = std::max({std::abs(an), std::abs(fd), 1e-6});
        worst = std::max(worst, std::abs(an - fd) / denom);
      }
    }
  }
  return worst;
}

}  // namespace erpo
