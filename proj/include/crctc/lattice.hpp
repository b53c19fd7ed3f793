#pragma once

// Core lattice types: vocabularies, label sequences, alignments, logit and
// distribution lattices, and the CTC collapse map.
//
// Layout convention: a lattice is a T x |V'| row-major matrix, one row per
// frame. Column 0 is always the blank token; token u of the base vocabulary
// lives in column u + 1.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace crctc {

class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised by enumeration oracles when an instance exceeds their size cap.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Raised where a gradient is requested for a target with no valid alignment.
class InfeasibleTarget : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

template <typename Scalar>
using Lattice =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using FrameMask = std::vector<bool>;

template <typename Scalar>
constexpr Scalar log_zero() {
  return -std::numeric_limits<Scalar>::infinity();
}

// log(exp(a) + exp(b)), saturating at log_zero.
template <typename Scalar>
inline Scalar log_add(Scalar a, Scalar b) {
  if (a < b) std::swap(a, b);
  if (b == log_zero<Scalar>()) return a;
  return a + std::log1p(std::exp(b - a));
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = v.maxCoeff();
  if (m == log_zero<Scalar>()) return m;
  return m + std::log((v.derived().array() - m).exp().sum());
}

class Vocabulary {
 public:
  static constexpr int kBlank = 0;

  explicit Vocabulary(int size) : size_(size) {
    if (size < 0) throw InvalidInput("vocabulary size must be non-negative");
    names_.reserve(size);
    for (int u = 0; u < size; ++u) names_.push_back(default_name(u));
  }

  explicit Vocabulary(std::vector<std::string> names)
      : size_(static_cast<int>(names.size())), names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i].empty()) throw InvalidInput("empty token name");
      for (std::size_t j = 0; j < i; ++j) {
        if (names_[i] == names_[j]) {
          throw InvalidInput("duplicate token name '" + names_[i] + "'");
        }
      }
    }
  }

  // |V|
  int size() const { return size_; }
  // |V'| = |V| + 1
  int extended_size() const { return size_ + 1; }
  int blank_index() const { return kBlank; }

  int extended(int token) const { return token + 1; }
  int token_of(int extended_index) const { return extended_index - 1; }
  bool is_blank(int extended_index) const { return extended_index == kBlank; }

  const std::string& name(int token) const { return names_.at(token); }

  // Default names: a, b, ..., z, then t26, t27, ...
  static std::string default_name(int u) {
    if (u < 26) return std::string(1, static_cast<char>('a' + u));
    return "t" + std::to_string(u);
  }

 private:
  int size_;
  std::vector<std::string> names_;
};

struct LabelSequence {
  std::vector<int> labels;

  LabelSequence() = default;
  LabelSequence(std::initializer_list<int> l) : labels(l) {}
  explicit LabelSequence(std::vector<int> l) : labels(std::move(l)) {}

  int size() const { return static_cast<int>(labels.size()); }
  bool empty() const { return labels.empty(); }
  int operator[](int i) const { return labels[i]; }

  // Number of positions u with labels[u] == labels[u - 1].
  int adjacent_repeats() const {
    int n = 0;
    for (std::size_t u = 1; u < labels.size(); ++u) {
      n += labels[u] == labels[u - 1];
    }
    return n;
  }
  // Shortest frame count admitting at least one alignment.
  int min_frames() const { return size() + adjacent_repeats(); }

  void validate(const Vocabulary& vocab) const {
    for (int l : labels) {
      if (l < 0 || l >= vocab.size()) {
        throw InvalidInput("label index " + std::to_string(l) +
                           " outside vocabulary of size " +
                           std::to_string(vocab.size()));
      }
    }
  }

  friend bool operator==(const LabelSequence&, const LabelSequence&) = default;
  friend auto operator<=>(const LabelSequence& a, const LabelSequence& b) {
    return a.labels <=> b.labels;
  }
};

// Indices into V'.
struct Alignment {
  std::vector<int> path;

  Alignment() = default;
  Alignment(std::initializer_list<int> p) : path(p) {}
  explicit Alignment(std::vector<int> p) : path(std::move(p)) {}

  int size() const { return static_cast<int>(path.size()); }
  friend bool operator==(const Alignment&, const Alignment&) = default;
};

// Unnormalized per-frame scores over V'.
template <typename Scalar>
class LogitLattice {
 public:
  using Matrix = Lattice<Scalar>;

  explicit LogitLattice(Matrix values) : values_(std::move(values)) {
    if (values_.rows() < 1) throw InvalidInput("logit lattice needs T >= 1");
    if (values_.cols() < 1) throw InvalidInput("logit lattice needs |V'| >= 1");
    if (!values_.allFinite()) throw InvalidInput("non-finite logit");
  }

  int frames() const { return static_cast<int>(values_.rows()); }
  int classes() const { return static_cast<int>(values_.cols()); }
  const Matrix& values() const { return values_; }

 private:
  Matrix values_;
};

// Per-frame distributions over V', held in both log and linear form.
template <typename Scalar>
class DistributionLattice {
 public:
  using Matrix = Lattice<Scalar>;

  static constexpr Scalar kRowSumTolerance = Scalar(1e-9);

  // Trusts that every row of log_probs is already normalized; used by
  // softmax_rows and smoothing, which normalize by construction.
  static DistributionLattice from_normalized_log(Matrix log_probs) {
    DistributionLattice d;
    d.probs_ = log_probs.array().exp().matrix();
    d.log_probs_ = std::move(log_probs);
    return d;
  }

  // Validating constructor for lattices from outside (files, tests).
  // Rows must sum to one within tol; they are then renormalized exactly.
  static DistributionLattice from_log(Matrix log_probs,
                                      Scalar tol = kRowSumTolerance) {
    check_shape(log_probs);
    for (Eigen::Index t = 0; t < log_probs.rows(); ++t) {
      for (Eigen::Index k = 0; k < log_probs.cols(); ++k) {
        const Scalar v = log_probs(t, k);
        if (std::isnan(v) || v > tol || v == std::numeric_limits<Scalar>::infinity()) {
          throw InvalidInput("invalid log-probability at frame " +
                             std::to_string(t));
        }
      }
      const Scalar lse = log_sum_exp(log_probs.row(t));
      if (!(std::abs(lse) <= tol)) {
        throw InvalidInput("row " + std::to_string(t) +
                           " is not a normalized distribution");
      }
      log_probs.row(t).array() -= lse;
    }
    return from_normalized_log(std::move(log_probs));
  }

  static DistributionLattice from_probs(const Matrix& probs,
                                        Scalar tol = kRowSumTolerance) {
    check_shape(probs);
    if ((probs.array() < Scalar(0)).any() || !probs.allFinite()) {
      throw InvalidInput("probabilities must be finite and non-negative");
    }
    return from_log(probs.array().log().matrix(), tol);
  }

  int frames() const { return static_cast<int>(probs_.rows()); }
  int classes() const { return static_cast<int>(probs_.cols()); }
  const Matrix& probs() const { return probs_; }
  const Matrix& log_probs() const { return log_probs_; }

 private:
  DistributionLattice() = default;

  static void check_shape(const Matrix& m) {
    if (m.rows() < 1) throw InvalidInput("distribution lattice needs T >= 1");
    if (m.cols() < 1) throw InvalidInput("distribution lattice needs |V'| >= 1");
  }

  Matrix probs_;
  Matrix log_probs_;
};

// Row-wise softmax with max subtraction.
template <typename Scalar>
DistributionLattice<Scalar> softmax_rows(const LogitLattice<Scalar>& logits) {
  Lattice<Scalar> logp = logits.values();
  for (Eigen::Index t = 0; t < logp.rows(); ++t) {
    const Scalar m = logp.row(t).maxCoeff();
    logp.row(t).array() -= m;
    logp.row(t).array() -= std::log(logp.row(t).array().exp().sum());
  }
  return DistributionLattice<Scalar>::from_normalized_log(std::move(logp));
}

// B: merge consecutive duplicates, then drop blanks.
inline LabelSequence collapse(const Alignment& path, const Vocabulary& vocab) {
  LabelSequence out;
  int prev = -1;
  for (int k : path.path) {
    if (k < 0 || k >= vocab.extended_size()) {
      throw InvalidInput("alignment index " + std::to_string(k) +
                         " outside extended vocabulary");
    }
    if (k != prev && !vocab.is_blank(k)) out.labels.push_back(vocab.token_of(k));
    prev = k;
  }
  return out;
}

// Calls visit(path) for every length-T path over V', in lexicographic order.
template <typename Visitor>
void for_each_path(int frames, int classes, Visitor&& visit) {
  Alignment a(std::vector<int>(frames, 0));
  while (true) {
    visit(static_cast<const Alignment&>(a));
    int t = frames - 1;
    while (t >= 0 && a.path[t] == classes - 1) a.path[t--] = 0;
    if (t < 0) return;
    ++a.path[t];
  }
}

struct EnumerationCap {
  int max_frames = 8;
  int max_classes = 4;

  void check(int frames, int classes) const {
    if (frames > max_frames || classes > max_classes) {
      throw CapacityError("enumeration limited to T <= " +
                          std::to_string(max_frames) + ", |V'| <= " +
                          std::to_string(max_classes));
    }
  }
};

// |B^-1(y)| among length-T paths, by brute-force enumeration.
inline std::uint64_t inverse_collapse_count(int frames, const LabelSequence& y,
                                            const Vocabulary& vocab,
                                            EnumerationCap cap = {}) {
  if (frames < 1) throw InvalidInput("frame count must be >= 1");
  y.validate(vocab);
  cap.check(frames, vocab.extended_size());
  std::uint64_t count = 0;
  for_each_path(frames, vocab.extended_size(), [&](const Alignment& a) {
    count += collapse(a, vocab) == y;
  });
  return count;
}

}  // namespace crctc
