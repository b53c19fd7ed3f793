#pragma once

// Plain-text lattice format:
//
//   T K
//   <K log-probabilities of frame 0>
//   ...
//   <K log-probabilities of frame T-1>
//
// K = |V'| with the blank in column 0. Values are decimal, whitespace
// separated; "-inf" denotes a zero probability. Rows must be normalized to
// within 1e-6 and are renormalized exactly on load.

#include <iosfwd>
#include <string>

#include "crctc/lattice.hpp"

namespace crctc {

void write_lattice(std::ostream& os, const DistributionLattice<double>& z);
DistributionLattice<double> read_lattice(std::istream& is);

void save_lattice(const std::string& path, const DistributionLattice<double>& z);
DistributionLattice<double> load_lattice(const std::string& path);

}  // namespace crctc
