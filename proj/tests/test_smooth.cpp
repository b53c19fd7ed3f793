#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "crctc/smooth.hpp"

using namespace crctc;

TEST_SUITE("smooth") {

TEST_CASE("middle row of a three-frame lattice") {
  std::mt19937_64 rng(1);
  const auto z = test::random_dist(rng, 3, 4);
  const auto s = smooth_lattice(z, SrConfig{});
  const Eigen::RowVectorXd expected =
      0.25 * z.probs().row(0) + 0.5 * z.probs().row(1) + 0.25 * z.probs().row(2);
  CHECK((s.probs().row(1) - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("boundary rows renormalize the truncated kernel") {
  std::mt19937_64 rng(2);
  const auto z = test::random_dist(rng, 4, 3);
  const auto s = smooth_lattice(z, SrConfig{});
  const Eigen::RowVectorXd first = (0.5 * z.probs().row(0) + 0.25 * z.probs().row(1)) / 0.75;
  CHECK((s.probs().row(0) - first).cwiseAbs().maxCoeff() < 1e-15);
  for (int t = 0; t < 4; ++t) CHECK(std::abs(s.probs().row(t).sum() - 1) < 1e-14);
}

TEST_CASE("single frame is unchanged") {
  std::mt19937_64 rng(3);
  const auto z = test::random_dist(rng, 1, 5);
  CHECK(smooth_lattice(z, SrConfig{}).probs().isApprox(z.probs(), 1e-15));
}

TEST_CASE("constant-in-time lattice is unchanged and costs nothing") {
  std::mt19937_64 rng(4);
  Lattice<double> logits(6, 4);
  const Eigen::RowVectorXd r = test::random_logits(rng, 1, 4).row(0);
  for (int t = 0; t < 6; ++t) logits.row(t) = r;
  const auto z = softmax_rows(LogitLattice<double>(logits));
  CHECK(smooth_lattice(z, SrConfig{}).probs().isApprox(z.probs(), 1e-14));
  const auto b = sr_total_loss(LogitLattice<double>(logits), LabelSequence{1}, Vocabulary(3),
                               SrConfig{});
  REQUIRE(b.has_value());
  CHECK(std::abs(b->sr) < 1e-14);
  CHECK(std::abs(b->loss - b->ctc) < 1e-14);
}

TEST_CASE("beta zero is plain CTC") {
  std::mt19937_64 rng(5);
  const auto logits = LogitLattice<double>(test::random_logits(rng, 7, 4));
  SrConfig cfg;
  cfg.beta = 0;
  const LabelSequence y{0, 2};
  const auto b = sr_total_loss(logits, y, Vocabulary(3), cfg);
  const auto c = ctc_grad(logits, y, Vocabulary(3));
  CHECK(b->loss == c.loss);
  CHECK(b->grad.isApprox(c.grad, 1e-15));
}

TEST_CASE("gradient matches central differences with the smoothed target frozen") {
  std::mt19937_64 rng(6);
  Lattice<double> logits = test::random_logits(rng, 5, 3);
  const LabelSequence y{0, 1};
  const Vocabulary v(2);
  const SrConfig cfg;
  const auto b = sr_total_loss(LogitLattice<double>(logits), y, v, cfg);
  const auto zs = smooth_lattice(softmax_rows(LogitLattice<double>(logits)), cfg);
  const FrameWeights<double> ones = FrameWeights<double>::Ones(5);
  auto loss = [&] {
    const auto z = softmax_rows(LogitLattice<double>(logits));
    return ctc_loss(z, y, v).loss + cfg.beta * kl_term(zs, z, ones, TargetMode::kStopGradient).loss;
  };
  const double h = 1e-5;
  double worst = 0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double keep = logits.data()[i];
    logits.data()[i] = keep + h;
    const double up = loss();
    logits.data()[i] = keep - h;
    const double down = loss();
    logits.data()[i] = keep;
    const double n = (up - down) / (2 * h), a = b->grad.data()[i];
    worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("kernel is validated") {
  SrConfig cfg;
  cfg.kernel = {0.5, -0.1, 0.6};
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg.kernel = {0.25, 0.5, 0.25};
  cfg.beta = -1;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}

}
