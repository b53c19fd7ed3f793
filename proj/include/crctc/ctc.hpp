#pragma once

// CTC negative log-likelihood by log-space forward-backward over the
// blank-interleaved target, the gradient w.r.t. logits, and an exhaustive
// path-enumeration oracle for tiny instances.

#include "crctc/lattice.hpp"

namespace crctc {

// (blank, y1, blank, y2, ..., blank) in V' indices.
inline std::vector<int> extended_targets(const LabelSequence& y,
                                         const Vocabulary& vocab) {
  std::vector<int> ext;
  ext.reserve(2 * y.labels.size() + 1);
  ext.push_back(vocab.blank_index());
  for (int l : y.labels) {
    ext.push_back(vocab.extended(l));
    ext.push_back(vocab.blank_index());
  }
  return ext;
}

template <typename Scalar>
struct ForwardBackwardTable {
  // T x (2U+1). alpha(t, s): log-prob of frames 0..t ending in state s.
  // beta(t, s): log-prob of frames t..T-1 starting in state s, emission at t
  // included.
  Lattice<Scalar> alpha;
  Lattice<Scalar> beta;
  Scalar log_likelihood = log_zero<Scalar>();

  Scalar log_likelihood_from_alpha() const {
    const Eigen::Index last = alpha.rows() - 1, S = alpha.cols();
    return S == 1 ? alpha(last, 0) : log_add(alpha(last, S - 1), alpha(last, S - 2));
  }
  Scalar log_likelihood_from_beta() const {
    return beta.cols() == 1 ? beta(0, 0) : log_add(beta(0, 0), beta(0, 1));
  }
};

template <typename Scalar>
struct CtcResult {
  bool feasible = false;
  // +inf when infeasible.
  Scalar loss = std::numeric_limits<Scalar>::infinity();
  ForwardBackwardTable<Scalar> table;
};

namespace detail {

inline void check_ctc_inputs(int classes, const LabelSequence& y,
                             const Vocabulary& vocab) {
  if (classes != vocab.extended_size()) {
    throw InvalidInput("lattice has " + std::to_string(classes) +
                       " classes, vocabulary expects " +
                       std::to_string(vocab.extended_size()));
  }
  y.validate(vocab);
}

}  // namespace detail

template <typename Scalar>
CtcResult<Scalar> ctc_loss(const DistributionLattice<Scalar>& dist,
                           const LabelSequence& y, const Vocabulary& vocab) {
  detail::check_ctc_inputs(dist.classes(), y, vocab);
  CtcResult<Scalar> result;
  const int T = dist.frames();
  if (T < y.min_frames()) return result;

  const std::vector<int> ext = extended_targets(y, vocab);
  const int S = static_cast<int>(ext.size());
  const Lattice<Scalar>& lp = dist.log_probs();
  constexpr Scalar kZero = log_zero<Scalar>();

  // Skip transition s-2 -> s allowed into a non-blank that differs from the
  // previous non-blank.
  std::vector<char> can_skip(S, 0);
  for (int s = 2; s < S; ++s) can_skip[s] = ext[s] != ext[s - 2];

  auto& alpha = result.table.alpha;
  alpha.setConstant(T, S, kZero);
  alpha(0, 0) = lp(0, ext[0]);
  if (S > 1) alpha(0, 1) = lp(0, ext[1]);
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      Scalar a = alpha(t - 1, s);
      if (s >= 1) a = log_add(a, alpha(t - 1, s - 1));
      if (can_skip[s]) a = log_add(a, alpha(t - 1, s - 2));
      alpha(t, s) = a == kZero ? kZero : a + lp(t, ext[s]);
    }
  }

  auto& beta = result.table.beta;
  beta.setConstant(T, S, kZero);
  beta(T - 1, S - 1) = lp(T - 1, ext[S - 1]);
  if (S > 1) beta(T - 1, S - 2) = lp(T - 1, ext[S - 2]);
  for (int t = T - 2; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      Scalar b = beta(t + 1, s);
      if (s + 1 < S) b = log_add(b, beta(t + 1, s + 1));
      if (s + 2 < S && can_skip[s + 2]) b = log_add(b, beta(t + 1, s + 2));
      beta(t, s) = b == kZero ? kZero : b + lp(t, ext[s]);
    }
  }

  result.table.log_likelihood = result.table.log_likelihood_from_alpha();
  if (result.table.log_likelihood == kZero) return result;
  result.feasible = true;
  result.loss = -result.table.log_likelihood;
  return result;
}

// Literal sum over all |V'|^T paths of prod_t z(t, path_t).
template <typename Scalar>
Scalar ctc_loss_oracle(const DistributionLattice<Scalar>& dist,
                       const LabelSequence& y, const Vocabulary& vocab,
                       EnumerationCap cap = {}) {
  detail::check_ctc_inputs(dist.classes(), y, vocab);
  cap.check(dist.frames(), dist.classes());
  Scalar total = 0;
  for_each_path(dist.frames(), dist.classes(), [&](const Alignment& a) {
    if (collapse(a, vocab) != y) return;
    Scalar p = 1;
    for (int t = 0; t < a.size(); ++t) p *= dist.probs()(t, a.path[t]);
    total += p;
  });
  return -std::log(total);
}

template <typename Scalar>
struct LossBundle {
  Scalar loss = 0;
  // d loss / d logits, same shape as the logit lattice.
  Lattice<Scalar> grad;
};

// Posterior occupancy p(path_t = k | y, x) for every frame and class.
template <typename Scalar>
Lattice<Scalar> ctc_occupancy(const DistributionLattice<Scalar>& dist,
                              const LabelSequence& y, const Vocabulary& vocab,
                              const ForwardBackwardTable<Scalar>& table) {
  const std::vector<int> ext = extended_targets(y, vocab);
  const Lattice<Scalar>& lp = dist.log_probs();
  Lattice<Scalar> occ = Lattice<Scalar>::Zero(dist.frames(), dist.classes());
  for (int t = 0; t < dist.frames(); ++t) {
    for (int s = 0; s < static_cast<int>(ext.size()); ++s) {
      const Scalar a = table.alpha(t, s), b = table.beta(t, s);
      if (a == log_zero<Scalar>() || b == log_zero<Scalar>()) continue;
      occ(t, ext[s]) += std::exp(a + b - lp(t, ext[s]) - table.log_likelihood);
    }
  }
  return occ;
}

template <typename Scalar>
LossBundle<Scalar> ctc_grad(const LogitLattice<Scalar>& logits,
                            const LabelSequence& y, const Vocabulary& vocab) {
  const auto dist = softmax_rows(logits);
  auto res = ctc_loss(dist, y, vocab);
  if (!res.feasible) {
    throw InfeasibleTarget("target of length " + std::to_string(y.size()) +
                           " has no alignment in " +
                           std::to_string(logits.frames()) + " frames");
  }
  LossBundle<Scalar> out;
  out.loss = res.loss;
  out.grad = dist.probs() - ctc_occupancy(dist, y, vocab, res.table);
  return out;
}

}  // namespace crctc
