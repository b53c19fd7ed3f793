#pragma once

// Smoothness regularization: each frame distribution is pulled toward its
// temporally smoothed version,
//
//   L' = L_ctc + beta * sum_t KL(sg(zs_t) || z_t),  zs = smooth(z, K).

#include <array>
#include <optional>

#include "crctc/consistency.hpp"

namespace crctc {

struct SrConfig {
  std::array<double, 3> kernel{0.25, 0.5, 0.25};
  double beta = 0.2;

  void validate() const {
    double sum = 0;
    for (double k : kernel) {
      if (!(k >= 0)) throw InvalidInput("sr.kernel weights must be >= 0");
      sum += k;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw InvalidInput("sr.kernel must sum to 1");
    if (!(beta >= 0)) throw InvalidInput("sr.beta must be >= 0");
  }
};

// zs_t = sum_j K_j z_{t+j-1}. At the sequence ends the kernel is truncated and
// renormalized, so every row stays a distribution.
template <typename Scalar>
DistributionLattice<Scalar> smooth_lattice(const DistributionLattice<Scalar>& z,
                                           const SrConfig& cfg) {
  cfg.validate();
  const int T = z.frames();
  Lattice<Scalar> out = Lattice<Scalar>::Zero(T, z.classes());
  for (int t = 0; t < T; ++t) {
    Scalar norm = 0;
    for (int j = 0; j < 3; ++j) {
      const int src = t + j - 1;
      if (src < 0 || src >= T) continue;
      const Scalar k(cfg.kernel[j]);
      out.row(t) += k * z.probs().row(src);
      norm += k;
    }
    out.row(t) /= norm;
  }
  // The linear form is already normalized up to rounding.
  Lattice<Scalar> logp = out.array().log().matrix();
  for (int t = 0; t < T; ++t) logp.row(t).array() -= log_sum_exp(logp.row(t));
  return DistributionLattice<Scalar>::from_normalized_log(std::move(logp));
}

template <typename Scalar>
struct SrBundle {
  Scalar loss = 0;
  Scalar ctc = 0;
  Scalar sr = 0;
  Lattice<Scalar> grad;
};

// sum_t KL(sg(zs_t) || z_t) with its gradient w.r.t. the logits of z.
template <typename Scalar>
DivergenceTerm<Scalar> sr_penalty(const DistributionLattice<Scalar>& z,
                                  const SrConfig& cfg) {
  const auto zs = smooth_lattice(z, cfg);
  const FrameWeights<Scalar> ones = FrameWeights<Scalar>::Ones(z.frames());
  return kl_term(zs, z, ones, TargetMode::kStopGradient);
}

template <typename Scalar>
std::optional<SrBundle<Scalar>> sr_total_loss(const LogitLattice<Scalar>& logits,
                                              const LabelSequence& y,
                                              const Vocabulary& vocab,
                                              const SrConfig& cfg) {
  cfg.validate();
  const auto z = softmax_rows(logits);
  const auto r = ctc_loss(z, y, vocab);
  if (!r.feasible) return std::nullopt;
  SrBundle<Scalar> out;
  out.ctc = r.loss;
  out.grad = z.probs() - ctc_occupancy(z, y, vocab, r.table);
  out.loss = r.loss;
  if (cfg.beta > 0) {
    const auto pen = sr_penalty(z, cfg);
    const Scalar beta(cfg.beta);
    out.sr = pen.loss;
    out.loss += beta * pen.loss;
    out.grad += beta * pen.grad_pred;
  }
  return out;
}

template <typename Scalar, typename Features, typename Forward>
std::optional<SrBundle<Scalar>> sr_total_loss(const Features& x,
                                              const LabelSequence& y,
                                              const Vocabulary& vocab,
                                              Forward&& forward,
                                              const SrConfig& cfg) {
  const LogitLattice<Scalar> logits = forward(x);
  return sr_total_loss(logits, y, vocab, cfg);
}

}  // namespace crctc
