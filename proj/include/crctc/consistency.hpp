#pragma once

// Consistency regularization between two CTC branches fed with different
// augmented views, and the combined two-branch objective
//
//   L = 1/2 (L_ctc(a) + L_ctc(b)) + alpha * L_cr(a, b)
//   L_cr = 1/2 sum_t [ KL(sg(zb_t) || za_t) + KL(sg(za_t) || zb_t) ]
//
// Frame terms are summed, not averaged, unless normalize_by_frames is set;
// longer sequences therefore weigh the consistency term more heavily.

#include <optional>
#include <string_view>

#include "crctc/ctc.hpp"

namespace crctc {

enum class TargetMode { kStopGradient, kFlowGradient };
enum class Distance { kBidirectionalKl, kHardLabelCe };
enum class FrameFilter { kAll, kExcludeSelfMasked, kExcludeSelfUnmasked };

struct CrConfig {
  double alpha = 0.2;
  TargetMode target_mode = TargetMode::kStopGradient;
  Distance distance = Distance::kBidirectionalKl;
  FrameFilter frame_filter = FrameFilter::kAll;
  bool normalize_by_frames = false;

  void validate() const {
    if (!(alpha >= 0)) throw InvalidInput("cr.alpha must be >= 0");
  }
};

std::string_view to_string(TargetMode m);
std::string_view to_string(Distance d);
std::string_view to_string(FrameFilter f);
TargetMode parse_target_mode(std::string_view s);
Distance parse_distance(std::string_view s);
FrameFilter parse_frame_filter(std::string_view s);

// Does a frame with the given self-mask state enter its own branch's term?
inline bool passes(FrameFilter f, bool self_masked) {
  switch (f) {
    case FrameFilter::kAll: return true;
    case FrameFilter::kExcludeSelfMasked: return !self_masked;
    case FrameFilter::kExcludeSelfUnmasked: return self_masked;
  }
  return true;
}

// One directed divergence term sum_t w_t * D(target_t, pred_t) together with
// its gradients w.r.t. the logits of both sides. grad_target stays exactly
// zero under stop-gradient.
template <typename Scalar>
struct DivergenceTerm {
  Scalar loss = 0;
  Lattice<Scalar> grad_pred;
  Lattice<Scalar> grad_target;
};

template <typename Scalar>
using FrameWeights = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Per-frame D_KL(target || pred); zero-probability target entries contribute 0.
template <typename Scalar>
Scalar frame_kl(const DistributionLattice<Scalar>& target,
                const DistributionLattice<Scalar>& pred, int t) {
  Scalar kl = 0;
  for (int k = 0; k < target.classes(); ++k) {
    const Scalar p = target.probs()(t, k);
    if (p == Scalar(0)) continue;
    kl += p * (target.log_probs()(t, k) - pred.log_probs()(t, k));
  }
  return kl;
}

template <typename Scalar>
DivergenceTerm<Scalar> kl_term(const DistributionLattice<Scalar>& target,
                               const DistributionLattice<Scalar>& pred,
                               const FrameWeights<Scalar>& weights,
                               TargetMode mode) {
  const int T = pred.frames(), K = pred.classes();
  DivergenceTerm<Scalar> out;
  out.grad_pred = Lattice<Scalar>::Zero(T, K);
  out.grad_target = Lattice<Scalar>::Zero(T, K);
  for (int t = 0; t < T; ++t) {
    const Scalar w = weights(t);
    if (w == Scalar(0)) continue;
    const Scalar kl = frame_kl(target, pred, t);
    out.loss += w * kl;
    out.grad_pred.row(t) = w * (pred.probs().row(t) - target.probs().row(t));
    if (mode == TargetMode::kFlowGradient) {
      for (int k = 0; k < K; ++k) {
        const Scalar p = target.probs()(t, k);
        if (p == Scalar(0)) continue;
        const Scalar ratio = target.log_probs()(t, k) - pred.log_probs()(t, k);
        out.grad_target(t, k) = w * p * (ratio - kl);
      }
    }
  }
  return out;
}

// Cross-entropy against the other branch's per-frame argmax (lowest index on
// ties). Targets are indices, so no gradient reaches the target side.
template <typename Scalar>
DivergenceTerm<Scalar> hard_label_term(const DistributionLattice<Scalar>& target,
                                       const DistributionLattice<Scalar>& pred,
                                       const FrameWeights<Scalar>& weights) {
  const int T = pred.frames(), K = pred.classes();
  DivergenceTerm<Scalar> out;
  out.grad_pred = Lattice<Scalar>::Zero(T, K);
  out.grad_target = Lattice<Scalar>::Zero(T, K);
  for (int t = 0; t < T; ++t) {
    const Scalar w = weights(t);
    if (w == Scalar(0)) continue;
    Eigen::Index best = 0;
    target.probs().row(t).maxCoeff(&best);  // first maximum wins
    out.loss += -w * pred.log_probs()(t, best);
    out.grad_pred.row(t) = w * pred.probs().row(t);
    out.grad_pred(t, best) -= w;
  }
  return out;
}

template <typename Scalar>
struct CrResult {
  Scalar loss = 0;
  Lattice<Scalar> grad_a;
  Lattice<Scalar> grad_b;
};

template <typename Scalar>
FrameWeights<Scalar> branch_weights(const FrameMask& self_mask,
                                    const CrConfig& cfg, int frames) {
  const Scalar scale =
      Scalar(0.5) / (cfg.normalize_by_frames ? Scalar(frames) : Scalar(1));
  FrameWeights<Scalar> w(frames);
  for (int t = 0; t < frames; ++t) {
    w(t) = passes(cfg.frame_filter, self_mask[t]) ? scale : Scalar(0);
  }
  return w;
}

template <typename Scalar>
CrResult<Scalar> cr_loss(const DistributionLattice<Scalar>& za,
                         const DistributionLattice<Scalar>& zb,
                         const FrameMask& masks_a, const FrameMask& masks_b,
                         const CrConfig& cfg) {
  cfg.validate();
  if (za.frames() != zb.frames() || za.classes() != zb.classes()) {
    throw InvalidInput("branch lattices differ in shape");
  }
  const int T = za.frames();
  if (static_cast<int>(masks_a.size()) != T ||
      static_cast<int>(masks_b.size()) != T) {
    throw InvalidInput("mask length does not match frame count");
  }
  const auto wa = branch_weights<Scalar>(masks_a, cfg, T);
  const auto wb = branch_weights<Scalar>(masks_b, cfg, T);

  // term_a predicts za from zb; term_b predicts zb from za.
  DivergenceTerm<Scalar> term_a, term_b;
  if (cfg.distance == Distance::kHardLabelCe) {
    term_a = hard_label_term(zb, za, wa);
    term_b = hard_label_term(za, zb, wb);
  } else {
    term_a = kl_term(zb, za, wa, cfg.target_mode);
    term_b = kl_term(za, zb, wb, cfg.target_mode);
  }

  CrResult<Scalar> out;
  out.loss = term_a.loss + term_b.loss;
  out.grad_a = term_a.grad_pred;
  out.grad_b = term_b.grad_pred;
  if (cfg.target_mode == TargetMode::kFlowGradient &&
      cfg.distance == Distance::kBidirectionalKl) {
    out.grad_a += term_b.grad_target;
    out.grad_b += term_a.grad_target;
  }
  return out;
}

// Hard-label CE variant regardless of cfg.distance.
template <typename Scalar>
CrResult<Scalar> hard_label_cr(const DistributionLattice<Scalar>& za,
                               const DistributionLattice<Scalar>& zb,
                               const FrameMask& masks_a,
                               const FrameMask& masks_b, CrConfig cfg) {
  cfg.distance = Distance::kHardLabelCe;
  cfg.target_mode = TargetMode::kStopGradient;
  return cr_loss(za, zb, masks_a, masks_b, cfg);
}

template <typename Scalar>
struct CrBundle {
  Scalar loss = 0;
  Scalar ctc_a = 0;
  Scalar ctc_b = 0;
  Scalar cr = 0;
  Lattice<Scalar> grad_a;  // d loss / d logits of branch a
  Lattice<Scalar> grad_b;
};

// Combined two-branch objective on already-computed logits. Returns nullopt
// when either branch's CTC target is infeasible.
template <typename Scalar>
std::optional<CrBundle<Scalar>> total_loss(const LogitLattice<Scalar>& logits_a,
                                           const LogitLattice<Scalar>& logits_b,
                                           const FrameMask& masks_a,
                                           const FrameMask& masks_b,
                                           const LabelSequence& y,
                                           const Vocabulary& vocab,
                                           const CrConfig& cfg) {
  if (logits_a.frames() != logits_b.frames()) {
    throw InvalidInput("branches produced different frame counts");
  }
  const auto za = softmax_rows(logits_a);
  const auto zb = softmax_rows(logits_b);
  const auto ra = ctc_loss(za, y, vocab);
  const auto rb = ctc_loss(zb, y, vocab);
  if (!ra.feasible || !rb.feasible) return std::nullopt;

  CrBundle<Scalar> out;
  out.ctc_a = ra.loss;
  out.ctc_b = rb.loss;
  const Scalar half(0.5);
  out.grad_a = half * (za.probs() - ctc_occupancy(za, y, vocab, ra.table));
  out.grad_b = half * (zb.probs() - ctc_occupancy(zb, y, vocab, rb.table));
  out.loss = half * (ra.loss + rb.loss);
  if (cfg.alpha > 0) {
    const auto cr = cr_loss(za, zb, masks_a, masks_b, cfg);
    const Scalar alpha(cfg.alpha);
    out.cr = cr.loss;
    out.loss += alpha * cr.loss;
    out.grad_a += alpha * cr.grad_a;
    out.grad_b += alpha * cr.grad_b;
  }
  return out;
}

// Same objective with the encoder in the loop: forward_a / forward_b map each
// view to logits (they may sample different sub-models).
template <typename Scalar, typename View, typename ForwardA, typename ForwardB>
std::optional<CrBundle<Scalar>> total_loss(const View& xa, const View& xb,
                                           const LabelSequence& y,
                                           const Vocabulary& vocab,
                                           ForwardA&& forward_a,
                                           ForwardB&& forward_b,
                                           const CrConfig& cfg) {
  const LogitLattice<Scalar> la = forward_a(xa);
  const LogitLattice<Scalar> lb = forward_b(xb);
  return total_loss(la, lb, xa.time_masked, xb.time_masked, y, vocab, cfg);
}

}  // namespace crctc
