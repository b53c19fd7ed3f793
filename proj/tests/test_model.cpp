#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "crctc/gradcheck.hpp"
#include "crctc/model.hpp"

using namespace crctc;

namespace {

EncoderConfig small() {
  EncoderConfig c;
  c.input_dim = 4;
  c.num_classes = 3;
  c.layers = 2;
  c.hidden_dim = 5;
  c.context_radius = 1;
  return c;
}

FeatureMatrix features(int T, int F, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return test::random_logits(rng, T, F, 1.0);
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("parameter layout") {
  const auto c = small();
  const auto p = init_parameters(c, 1);
  CHECK(p.size() == 2 + 2 * 2 + 2);
  CHECK(p["input.weight"].rows() == 4);
  CHECK(p["input.weight"].cols() == 5);
  CHECK(p["layer0.weight"].rows() == 15);
  CHECK(p["output.weight"].cols() == 3);
  CHECK_NOTHROW(check_parameters(c, p));
  auto other = c;
  other.hidden_dim = 6;
  CHECK_THROWS_AS(check_parameters(other, p), InvalidInput);
}

TEST_CASE("eval mode is deterministic") {
  const auto c = small();
  const auto p = init_parameters(c, 2);
  const auto x = features(9, 4, 3);
  const auto a = forward(c, p, x, Mode::kEval, 1).logits.values();
  const auto b = forward(c, p, x, Mode::kEval, 99).logits.values();
  CHECK(a == b);
}

TEST_CASE("train mode without dropout equals eval mode") {
  auto c = small();
  c.dropout_prob = 0;
  c.layer_drop_prob = 0;
  const auto p = init_parameters(c, 2);
  const auto x = features(9, 4, 3);
  CHECK(forward(c, p, x, Mode::kTrain, 5).logits.values() ==
        forward(c, p, x, Mode::kEval).logits.values());
}

TEST_CASE("train mode samples different sub-models per seed") {
  auto c = small();
  c.dropout_prob = 0.3;
  const auto p = init_parameters(c, 2);
  const auto x = features(9, 4, 3);
  CHECK(forward(c, p, x, Mode::kTrain, 5).logits.values() ==
        forward(c, p, x, Mode::kTrain, 5).logits.values());
  CHECK(forward(c, p, x, Mode::kTrain, 5).logits.values() !=
        forward(c, p, x, Mode::kTrain, 6).logits.values());
}

TEST_CASE("downsampling by four gives ceil(T / 4) frames") {
  auto c = small();
  c.downsample_factor = 4;
  const auto p = init_parameters(c, 1);
  for (int T : {1, 4, 5, 11, 16}) {
    CHECK(forward(c, p, features(T, 4, T), Mode::kEval).logits.frames() == (T + 3) / 4);
  }
  CHECK(downsample_mask({false, true, false, false, false}, 4) == FrameMask{true, false});
}

TEST_CASE("zero upstream gradient gives zero parameter gradient") {
  const auto c = small();
  const auto p = init_parameters(c, 3);
  const auto fp = forward(c, p, features(7, 4, 1), Mode::kTrain, 2);
  const auto g = backward(c, p, fp.tape, Lattice<double>::Zero(7, 3));
  CHECK(g.squared_norm() == 0.0);
}

TEST_CASE("dropped layers receive no gradient") {
  auto c = small();
  c.layers = 4;
  c.layer_drop_prob = 0.5;
  const auto p = init_parameters(c, 4);
  const auto x = features(8, 4, 2);
  std::mt19937_64 rng(1);
  int dropped_seen = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto fp = forward(c, p, x, Mode::kTrain, seed);
    const auto g = backward(c, p, fp.tape, test::random_logits(rng, 8, 3));
    for (int l = 0; l < c.layers; ++l) {
      if (fp.tape.layers[l].kept) continue;
      ++dropped_seen;
      CHECK(g["layer" + std::to_string(l) + ".weight"].squaredNorm() == 0.0);
      CHECK(g["layer" + std::to_string(l) + ".bias"].squaredNorm() == 0.0);
    }
  }
  CHECK(dropped_seen > 0);
}

TEST_CASE("backward matches central differences") {
  for (std::uint64_t seed : {1, 2, 3}) {
    GradCheckOptions opt;
    opt.seed = seed;
    const auto r = check_model_backward(opt);
    CHECK(r.coordinates >= 10);
    CHECK(r.max_rel_error <= 1e-4);
  }
}

TEST_CASE("input validation") {
  const auto c = small();
  const auto p = init_parameters(c, 1);
  CHECK_THROWS_AS(forward(c, p, features(5, 3, 1), Mode::kEval), InvalidInput);
  auto bad = c;
  bad.dropout_prob = 1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("checkpoint round trip is bit exact") {
  auto c = small();
  c.downsample_factor = 2;
  c.dropout_prob = 0.123456789;
  const auto p = init_parameters(c, 8);
  std::stringstream ss;
  save_checkpoint(ss, c, p);
  const auto [c2, p2] = load_checkpoint(ss);
  CHECK(c2.hidden_dim == c.hidden_dim);
  CHECK(c2.downsample_factor == 2);
  CHECK(c2.dropout_prob == c.dropout_prob);
  CHECK(p2 == p);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto c = small();
  std::stringstream ss;
  save_checkpoint(ss, c, init_parameters(c, 8));
  std::string bytes = ss.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(load_checkpoint(truncated), InvalidInput);
  bytes[0] = 'X';
  std::stringstream bad_magic(bytes);
  CHECK_THROWS_AS(load_checkpoint(bad_magic), InvalidInput);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const auto c = small();
  auto p = init_parameters(c, 1);
  const auto before = p;
  auto g = p.zeros_like();
  for (auto& t : g.tensors()) t.value.setOnes();
  AdamState state;
  adam_step(p, g, AdamHyper{0.0}, state);
  CHECK(p == before);
  sgd_step(p, g, 0.0);
  CHECK(p == before);
}

TEST_CASE("first Adam step moves each coordinate by about lr") {
  ParameterSet p;
  p.add("w", Eigen::MatrixXd::Zero(2, 2));
  ParameterSet g;
  g.add("w", Eigen::MatrixXd::Ones(2, 2));
  AdamState state;
  adam_step(p, g, AdamHyper{0.01}, state);
  CHECK((p["w"].array() + 0.01).abs().maxCoeff() < 1e-8);
}

TEST_CASE("Adam converges on a quadratic bowl") {
  ParameterSet p;
  p.add("w", Eigen::MatrixXd::Constant(1, 1, 5.0));
  AdamState state;
  const double target = -1.25;
  for (int step = 0; step < 1000; ++step) {
    ParameterSet g;
    g.add("w", 2.0 * (p["w"].array() - target).matrix());
    adam_step(p, g, AdamHyper{0.05}, state);
  }
  CHECK(std::abs(p["w"](0, 0) - target) < 1e-2);
}

TEST_CASE("SGD takes a plain gradient step") {
  ParameterSet p;
  p.add("w", Eigen::MatrixXd::Constant(1, 2, 1.0));
  ParameterSet g;
  g.add("w", Eigen::MatrixXd::Constant(1, 2, 2.0));
  sgd_step(p, g, 0.25);
  CHECK((p["w"].array() == 0.5).all());
}

}
