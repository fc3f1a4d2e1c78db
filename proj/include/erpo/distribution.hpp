#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Core>

namespace erpo {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// softmax(z / temperature), shifted by the max logit for stability.
template <typename Derived>
Vector<typename Derived::Scalar> tempered_softmax(const Eigen::MatrixBase<Derived>& logits,
                                                  typename Derived::Scalar temperature) {
  using Scalar = typename Derived::Scalar;
  const Vector<Scalar> scaled = logits / temperature;
  Vector<Scalar> p = (scaled.array() - scaled.maxCoeff()).exp();
  return p / p.sum();
}

template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  return tempered_softmax(logits, typename Derived::Scalar(1));
}

template <typename Derived>
Vector<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& logits,
                                             typename Derived::Scalar temperature = 1) {
  using Scalar = typename Derived::Scalar;
  const Vector<Scalar> scaled = logits / temperature;
  const Scalar shift = scaled.maxCoeff();
  const Scalar lse = shift + std::log((scaled.array() - shift).exp().sum());
  return scaled.array() - lse;
}

/// Keeps the smallest probability-sorted prefix whose mass reaches `top_p`
/// and renormalizes. Ties in probability keep the lower token index first.
/// `top_p >= 1` returns the input unchanged.
template <typename Derived>
Vector<typename Derived::Scalar> nucleus(const Eigen::MatrixBase<Derived>& probs,
                                         typename Derived::Scalar top_p) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> out = probs;
  if (top_p >= Scalar(1)) return out;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(probs.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return probs(a) > probs(b); });
  Scalar mass = 0;
  std::size_t keep = 0;
  while (keep < order.size()) {
    mass += probs(order[keep]);
    ++keep;
    if (mass >= top_p) break;
  }
  out.setZero();
  Scalar kept_mass = 0;
  for (std::size_t i = 0; i < keep; ++i) kept_mass += probs(order[i]);
  for (std::size_t i = 0; i < keep; ++i) out(order[i]) = probs(order[i]) / kept_mass;
  return out;
}

/// Shannon entropy in nats; zero-probability entries contribute nothing.
template <typename Derived>
typename Derived::Scalar entropy(const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  Scalar h = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > Scalar(0)) h -= p(i) * std::log(p(i));
  }
  return h;
}

/// KL(p || q) = sum_v p(v) ln(p(v) / q(v)).
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar kl_divergence(const Eigen::MatrixBase<DerivedP>& p,
                                        const Eigen::MatrixBase<DerivedQ>& q) {
  using Scalar = typename DerivedP::Scalar;
  Scalar kl = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > Scalar(0)) kl += p(i) * std::log(p(i) / q(i));
  }
  return kl;
}

}  // namespace erpo
