#include "crctc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "crctc/dataset.hpp"
#include "crctc/model.hpp"
#include "crctc/smooth.hpp"

namespace crctc {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

namespace {

struct Instance {
  Lattice<double> logits;
  LabelSequence labels;
  Vocabulary vocab;
};

Instance random_instance(Rng& rng, int frames, int vocab_size, int tokens) {
  std::normal_distribution<double> normal(0.0, 1.5);
  std::uniform_int_distribution<int> token(0, vocab_size - 1);
  Instance in{Lattice<double>(frames, vocab_size + 1), {}, Vocabulary(vocab_size)};
  for (Eigen::Index i = 0; i < in.logits.size(); ++i) in.logits.data()[i] = normal(rng);
  for (int u = 0; u < tokens; ++u) in.labels.labels.push_back(token(rng));
  return in;
}

FrameMask random_mask(Rng& rng, int frames) {
  std::bernoulli_distribution coin(0.3);
  FrameMask m(frames);
  for (int t = 0; t < frames; ++t) m[t] = coin(rng);
  return m;
}

// Compares analytic[i] against the central difference of f over `x` at
// randomly chosen flat coordinates.
template <typename Matrix, typename Analytic>
void probe(GradCheckReport& report, Matrix& x, const Analytic& analytic, const std::function<double()>& f,
           int coordinates, double h, Rng& rng) {
  std::uniform_int_distribution<Eigen::Index> row(0, x.rows() - 1), col(0, x.cols() - 1);
  for (int c = 0; c < coordinates; ++c) {
    const Eigen::Index r = row(rng), k = col(rng);
    const double saved = x(r, k);
    x(r, k) = saved + h;
    const double up = f();
    x(r, k) = saved - h;
    const double down = f();
    x(r, k) = saved;
    const double numeric = (up - down) / (2 * h);
    report.max_rel_error = std::max(report.max_rel_error, relative_error(analytic(r, k), numeric));
    report.max_abs_error = std::max(report.max_abs_error, std::abs(analytic(r, k) - numeric));
    ++report.coordinates;
  }
}

}  // namespace

GradCheckReport check_ctc_grad(const GradCheckOptions& opt) {
  Rng rng(derive_seed(opt.seed, 101));
  Instance in = random_instance(rng, 9, 4, 3);
  const auto analytic = ctc_grad(LogitLattice<double>(in.logits), in.labels, in.vocab);
  GradCheckReport report{"ctc_grad"};
  probe(report, in.logits, analytic.grad,
        [&] { return ctc_loss(softmax_rows(LogitLattice<double>(in.logits)), in.labels, in.vocab).loss; },
        opt.coordinates, opt.step, rng);
  return report;
}

GradCheckReport check_cr_loss(TargetMode mode, const GradCheckOptions& opt) {
  Rng rng(derive_seed(opt.seed, 102, static_cast<std::uint64_t>(mode)));
  Instance a = random_instance(rng, 8, 4, 0);
  Instance b = random_instance(rng, 8, 4, 0);
  const FrameMask ma = random_mask(rng, 8), mb = random_mask(rng, 8);
  CrConfig cfg;
  cfg.target_mode = mode;
  const auto za0 = softmax_rows(LogitLattice<double>(a.logits));
  const auto zb0 = softmax_rows(LogitLattice<double>(b.logits));
  const auto analytic = cr_loss(za0, zb0, ma, mb, cfg);

  const auto wa = branch_weights<double>(ma, cfg, 8);
  const auto wb = branch_weights<double>(mb, cfg, 8);
  auto loss = [&] {
    const auto za = softmax_rows(LogitLattice<double>(a.logits));
    const auto zb = softmax_rows(LogitLattice<double>(b.logits));
    if (mode == TargetMode::kFlowGradient) return cr_loss(za, zb, ma, mb, cfg).loss;
    return kl_term(zb0, za, wa, mode).loss + kl_term(za0, zb, wb, mode).loss;
  };
  GradCheckReport report{mode == TargetMode::kStopGradient ? "cr_loss/stop_gradient"
                                                           : "cr_loss/flow_gradient"};
  probe(report, a.logits, analytic.grad_a, loss, opt.coordinates, opt.step, rng);
  probe(report, b.logits, analytic.grad_b, loss, opt.coordinates, opt.step, rng);
  return report;
}

GradCheckReport check_sr_total_loss(const GradCheckOptions& opt) {
  Rng rng(derive_seed(opt.seed, 103));
  Instance in = random_instance(rng, 9, 4, 3);
  const SrConfig cfg;
  const auto analytic = sr_total_loss(LogitLattice<double>(in.logits), in.labels, in.vocab, cfg);
  const auto zs0 = smooth_lattice(softmax_rows(LogitLattice<double>(in.logits)), cfg);
  const FrameWeights<double> ones = FrameWeights<double>::Ones(in.logits.rows());
  auto loss = [&] {
    const auto z = softmax_rows(LogitLattice<double>(in.logits));
    return ctc_loss(z, in.labels, in.vocab).loss +
           cfg.beta * kl_term(zs0, z, ones, TargetMode::kStopGradient).loss;
  };
  GradCheckReport report{"sr_total_loss"};
  probe(report, in.logits, analytic->grad, loss, opt.coordinates, opt.step, rng);
  return report;
}

GradCheckReport check_model_backward(const GradCheckOptions& opt) {
  Rng rng(derive_seed(opt.seed, 104));
  EncoderConfig enc;
  enc.input_dim = 5;
  enc.num_classes = 4;
  enc.layers = 3;
  enc.hidden_dim = 6;
  enc.context_radius = 1;
  enc.dropout_prob = 0.2;
  enc.layer_drop_prob = 0.3;
  enc.downsample_factor = 2;
  ParameterSet params = init_parameters(enc, derive_seed(opt.seed, 105));

  std::normal_distribution<double> normal(0.0, 1.0);
  FeatureMatrix xa(12, enc.input_dim), xb(12, enc.input_dim);
  for (Eigen::Index i = 0; i < xa.size(); ++i) {
    xa.data()[i] = normal(rng);
    xb.data()[i] = normal(rng);
  }
  const Vocabulary vocab(enc.num_classes - 1);
  const LabelSequence y{0, 2};
  const int T = enc.output_frames(12);
  const FrameMask ma = random_mask(rng, T), mb = random_mask(rng, T);
  CrConfig cfg;
  cfg.target_mode = TargetMode::kFlowGradient;
  const std::uint64_t seed_a = derive_seed(opt.seed, 106), seed_b = derive_seed(opt.seed, 107);

  const ForwardPass fa = forward(enc, params, xa, Mode::kTrain, seed_a);
  const ForwardPass fb = forward(enc, params, xb, Mode::kTrain, seed_b);
  const auto bundle = total_loss(fa.logits, fb.logits, ma, mb, y, vocab, cfg);
  ParameterSet grads = backward(enc, params, fa.tape, bundle->grad_a);
  grads += backward(enc, params, fb.tape, bundle->grad_b);

  auto loss = [&] {
    const auto la = forward(enc, params, xa, Mode::kTrain, seed_a).logits;
    const auto lb = forward(enc, params, xb, Mode::kTrain, seed_b).logits;
    return total_loss(la, lb, ma, mb, y, vocab, cfg)->loss;
  };
  GradCheckReport report{"model_backward"};
  // Spread the probes over every tensor so each layer is exercised.
  const int per_tensor = std::max(1, opt.coordinates / static_cast<int>(params.size()) + 1);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& tensor = params.tensors()[i];
    probe(report, tensor.value, grads.tensors()[i].value, loss, per_tensor, opt.step, rng);
  }
  return report;
}

std::vector<GradCheckReport> run_gradchecks(const GradCheckOptions& opt) {
  return {check_ctc_grad(opt), check_cr_loss(TargetMode::kStopGradient, opt),
          check_cr_loss(TargetMode::kFlowGradient, opt), check_sr_total_loss(opt),
          check_model_backward(opt)};
}

}  // namespace crctc
