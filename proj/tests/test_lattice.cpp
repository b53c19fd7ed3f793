#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "crctc/lattice_io.hpp"

#include <sstream>

using namespace crctc;

TEST_SUITE("lattice") {

TEST_CASE("softmax of equal logits is uniform") {
  Lattice<double> m(1, 2);
  m << 0, 0;
  const auto z = softmax_rows(LogitLattice<double>(m));
  CHECK(z.probs()(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(z.probs()(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("softmax of (ln 3, 0)") {
  Lattice<double> m(1, 2);
  m << std::log(3.0), 0;
  const auto z = softmax_rows(LogitLattice<double>(m));
  CHECK(std::abs(z.probs()(0, 0) - 0.75) < 1e-15);
  CHECK(std::abs(z.probs()(0, 1) - 0.25) < 1e-15);
}

TEST_CASE("softmax survives huge logits") {
  Lattice<double> m(1, 3);
  m << 1000, 1000, 1000;
  const auto z = softmax_rows(LogitLattice<double>(m));
  for (int k = 0; k < 3; ++k) CHECK(std::abs(z.probs()(0, k) - 1.0 / 3) < 1e-15);
  CHECK(z.log_probs().allFinite());
}

TEST_CASE("softmax rows are distributions") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const auto z = test::random_dist(rng, 6, 5, 10.0);
    for (int t = 0; t < 6; ++t) CHECK(std::abs(z.probs().row(t).sum() - 1.0) < 1e-12);
    CHECK((z.probs().array() >= 0).all());
  }
}

TEST_CASE("logit lattice rejects non-finite values") {
  Lattice<double> m(1, 2);
  m << 0, std::nan("");
  CHECK_THROWS_AS(LogitLattice<double>{m}, InvalidInput);
  m << 0, std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(LogitLattice<double>{m}, InvalidInput);
  CHECK_THROWS_AS(LogitLattice<double>(Lattice<double>(0, 2)), InvalidInput);
}

TEST_CASE("distribution lattice validates rows") {
  Lattice<double> p(1, 2);
  p << 0.6, 0.6;
  CHECK_THROWS_AS(DistributionLattice<double>::from_probs(p), InvalidInput);
  p << -0.1, 1.1;
  CHECK_THROWS_AS(DistributionLattice<double>::from_probs(p), InvalidInput);
  p << 0.0, 1.0;
  const auto z = DistributionLattice<double>::from_probs(p);
  CHECK(z.log_probs()(0, 0) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("collapse") {
  const Vocabulary v(2);  // a=1, b=2 in V'
  CHECK(collapse(Alignment{1, 1, 0, 1}, v) == LabelSequence{0, 0});
  CHECK(collapse(Alignment{0, 0, 0}, v).empty());
  CHECK(collapse(Alignment{1, 0, 1, 2, 2}, v) == LabelSequence{0, 0, 1});
  CHECK_THROWS_AS(collapse(Alignment{3}, v), InvalidInput);
}

TEST_CASE("inverse collapse counts by enumeration") {
  const Vocabulary a(1);
  CHECK(inverse_collapse_count(2, LabelSequence{0}, a) == 3);
  CHECK(inverse_collapse_count(1, LabelSequence{}, a) == 1);
  CHECK(inverse_collapse_count(2, LabelSequence{0, 0}, a) == 0);
  CHECK_THROWS_AS(inverse_collapse_count(9, LabelSequence{0}, a), CapacityError);
}

TEST_CASE("minimum frames accounts for repeats") {
  CHECK(LabelSequence{0, 0, 1}.min_frames() == 4);
  CHECK(LabelSequence{0, 1, 0}.min_frames() == 3);
  CHECK(LabelSequence{}.min_frames() == 0);
}

TEST_CASE("vocabulary layout puts blank first") {
  const Vocabulary v(3);
  CHECK(v.extended_size() == 4);
  CHECK(v.is_blank(0));
  CHECK(v.extended(0) == 1);
  CHECK(v.token_of(3) == 2);
  CHECK(v.name(0) == "a");
  CHECK_THROWS_AS(Vocabulary(std::vector<std::string>{"x", "x"}), InvalidInput);
}

TEST_CASE("log_add saturates at log zero") {
  const double z = log_zero<double>();
  CHECK(log_add(z, z) == z);
  CHECK(log_add(z, 1.5) == 1.5);
  CHECK(std::abs(log_add(std::log(0.25), std::log(0.5)) - std::log(0.75)) < 1e-15);
}

TEST_CASE("lattice text round trip") {
  std::mt19937_64 rng(3);
  const auto z = test::random_dist(rng, 4, 3);
  std::stringstream ss;
  write_lattice(ss, z);
  const auto back = read_lattice(ss);
  CHECK(back.log_probs().isApprox(z.log_probs(), 1e-15));
}

TEST_CASE("lattice reader accepts -inf and rejects junk") {
  std::stringstream ok("2 2\n0 -inf\n-0.6931471805599453 -0.6931471805599453\n");
  const auto z = read_lattice(ok);
  CHECK(z.probs()(0, 0) == 1.0);
  std::stringstream bad("1 2\n0 zero\n");
  CHECK_THROWS_AS(read_lattice(bad), InvalidInput);
  std::stringstream short_row("2 2\n0 -inf\n");
  CHECK_THROWS_AS(read_lattice(short_row), InvalidInput);
  std::stringstream unnormalized("1 2\n0 0\n");
  CHECK_THROWS_AS(read_lattice(unnormalized), InvalidInput);
}

}
