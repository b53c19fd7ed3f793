#include "crctc/lattice_io.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>

namespace crctc {

namespace {

double parse_value(const std::string& tok) {
  if (tok == "-inf" || tok == "-Inf" || tok == "-INF") {
    return -std::numeric_limits<double>::infinity();
  }
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw InvalidInput("malformed lattice value '" + tok + "'");
  }
  if (used != tok.size()) throw InvalidInput("malformed lattice value '" + tok + "'");
  return v;
}

}  // namespace

void write_lattice(std::ostream& os, const DistributionLattice<double>& z) {
  const auto& lp = z.log_probs();
  os << lp.rows() << ' ' << lp.cols() << '\n';
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index t = 0; t < lp.rows(); ++t) {
    for (Eigen::Index k = 0; k < lp.cols(); ++k) {
      if (k) os << ' ';
      if (std::isinf(lp(t, k))) {
        os << "-inf";
      } else {
        os << lp(t, k);
      }
    }
    os << '\n';
  }
}

DistributionLattice<double> read_lattice(std::istream& is) {
  long long T = 0, K = 0;
  if (!(is >> T >> K) || T < 1 || K < 1) {
    throw InvalidInput("lattice header must be 'T K' with T, K >= 1");
  }
  Lattice<double> lp(T, K);
  std::string tok;
  for (long long t = 0; t < T; ++t) {
    for (long long k = 0; k < K; ++k) {
      if (!(is >> tok)) {
        throw InvalidInput("lattice truncated at frame " + std::to_string(t));
      }
      lp(t, k) = parse_value(tok);
    }
  }
  if (is >> tok) throw InvalidInput("trailing data after lattice");
  return DistributionLattice<double>::from_log(std::move(lp), 1e-6);
}

void save_lattice(const std::string& path, const DistributionLattice<double>& z) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot open " + path + " for writing");
  write_lattice(os, z);
}

DistributionLattice<double> load_lattice(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot open " + path);
  return read_lattice(is);
}

}  // namespace crctc
