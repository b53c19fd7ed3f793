#include "doctest.h"
#include "helpers.hpp"
#include "crctc/decode.hpp"

using namespace crctc;

TEST_SUITE("decode") {

TEST_CASE("greedy on a one-hot lattice") {
  const auto z = test::one_hot({1, 1, 0, 2}, 3);
  const auto g = greedy_decode(z, Vocabulary(2));
  CHECK(g.labels == LabelSequence{0, 1});
  CHECK(g.path == Alignment{1, 1, 0, 2});
}

TEST_CASE("greedy on a uniform lattice picks blank") {
  const auto z = DistributionLattice<double>::from_probs(Lattice<double>::Constant(4, 3, 1.0 / 3));
  const auto g = greedy_decode(z, Vocabulary(2));
  CHECK(g.labels.empty());
  CHECK(g.path == Alignment{0, 0, 0, 0});
}

TEST_CASE("blank-dominant lattice decodes to nothing") {
  Lattice<double> p(4, 3);
  for (int t = 0; t < 4; ++t) p.row(t) << 0.9, 0.05, 0.05;
  const auto z = DistributionLattice<double>::from_probs(p);
  const Vocabulary v(2);
  CHECK(greedy_decode(z, v).labels.empty());
  CHECK(prefix_beam_decode(z, v, 1000).empty());
  CHECK(decode_oracle(z, v).empty());
}

TEST_CASE("all decoders agree on one-hot lattices") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> cls(0, 2);
  const Vocabulary v(2);
  for (int i = 0; i < 50; ++i) {
    std::vector<int> path(5);
    for (int& k : path) k = cls(rng);
    const auto z = test::one_hot(path, 3);
    const auto g = greedy_decode(z, v).labels;
    CHECK(prefix_beam_decode(z, v, 4) == g);
    CHECK(prefix_beam_decode(z, v, 1000) == g);
    CHECK(decode_oracle(z, v) == g);
  }
}

TEST_CASE("saturating prefix search equals the exhaustive oracle") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> frames(1, 5), vocab(1, 2);
  for (int i = 0; i < 200; ++i) {
    const int T = frames(rng), V = vocab(rng);
    const auto z = test::random_dist(rng, T, V + 1, 2.0);
    const Vocabulary v(V);
    CHECK(prefix_beam_decode(z, v, 1000) == decode_oracle(z, v));
  }
}

TEST_CASE("seeded 3x3 lattice") {
  std::mt19937_64 rng(33);
  const auto z = test::random_dist(rng, 3, 3);
  const Vocabulary v(2);
  CHECK(decode_oracle(z, v) == prefix_beam_decode(z, v, 1000));
}

TEST_CASE("prefix search result is at least as probable as greedy") {
  std::mt19937_64 rng(5);
  const Vocabulary v(3);
  for (int i = 0; i < 100; ++i) {
    const auto z = test::random_dist(rng, 8, 4, 1.0);
    const auto g = greedy_decode(z, v).labels;
    const auto p = prefix_beam_decode(z, v, 64);
    CHECK(sequence_log_posterior(z, p, v) >= sequence_log_posterior(z, g, v) - 1e-12);
  }
}

TEST_CASE("beam of one returns a valid sequence") {
  std::mt19937_64 rng(6);
  const Vocabulary v(3);
  for (int i = 0; i < 20; ++i) {
    const auto z = test::random_dist(rng, 6, 4);
    const auto y = prefix_beam_decode(z, v, 1);
    CHECK_NOTHROW(y.validate(v));
    CHECK(y.size() <= 6);
  }
}

TEST_CASE("wider beams never find a less probable best sequence than saturating") {
  std::mt19937_64 rng(7);
  const Vocabulary v(2);
  for (int i = 0; i < 100; ++i) {
    const auto z = test::random_dist(rng, 5, 3, 1.0);
    const double best = sequence_log_posterior(z, prefix_beam_decode(z, v, 1000), v);
    for (int beam : {1, 2, 4, 8}) {
      CHECK(sequence_log_posterior(z, prefix_beam_decode(z, v, beam), v) <= best + 1e-12);
    }
  }
}

TEST_CASE("decoder arguments are validated") {
  std::mt19937_64 rng(8);
  const auto z = test::random_dist(rng, 6, 4);
  CHECK_THROWS_AS(prefix_beam_decode(z, Vocabulary(3), 0), InvalidInput);
  CHECK_THROWS_AS(greedy_decode(z, Vocabulary(2)), InvalidInput);
  CHECK_THROWS_AS(decode_oracle(z, Vocabulary(3)), CapacityError);
}

}
