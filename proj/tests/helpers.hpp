#pragma once

#include <cmath>
#include <random>

#include "crctc/lattice.hpp"

namespace crctc::test {

inline Lattice<double> random_logits(std::mt19937_64& rng, int frames, int classes,
                                     double scale = 1.5) {
  std::normal_distribution<double> normal(0.0, scale);
  Lattice<double> m(frames, classes);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

inline DistributionLattice<double> random_dist(std::mt19937_64& rng, int frames,
                                               int classes, double scale = 1.5) {
  return softmax_rows(LogitLattice<double>(random_logits(rng, frames, classes, scale)));
}

inline LabelSequence random_labels(std::mt19937_64& rng, int max_len, int vocab) {
  std::uniform_int_distribution<int> len(0, max_len), tok(0, vocab - 1);
  LabelSequence y;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) y.labels.push_back(tok(rng));
  return y;
}

// One-hot (up to a tiny floor) lattice following a V' path.
inline DistributionLattice<double> one_hot(const std::vector<int>& path, int classes) {
  Lattice<double> p = Lattice<double>::Zero(static_cast<int>(path.size()), classes);
  for (std::size_t t = 0; t < path.size(); ++t) p(static_cast<int>(t), path[t]) = 1.0;
  return DistributionLattice<double>::from_probs(p);
}

}  // namespace crctc::test
