#pragma once

// Greedy and prefix beam search decoding for CTC lattices, plus an exhaustive
// maximum-posterior oracle for tiny lattices. Ties always resolve toward the
// lowest token index / lexicographically smallest label sequence.

#include <algorithm>
#include <map>

#include "crctc/ctc.hpp"

namespace crctc {

struct GreedyResult {
  LabelSequence labels;
  Alignment path;
};

template <typename Scalar>
GreedyResult greedy_decode(const DistributionLattice<Scalar>& z,
                           const Vocabulary& vocab) {
  if (z.classes() != vocab.extended_size()) {
    throw InvalidInput("lattice width does not match vocabulary");
  }
  GreedyResult out;
  out.path.path.resize(z.frames());
  for (int t = 0; t < z.frames(); ++t) {
    Eigen::Index best = 0;
    z.probs().row(t).maxCoeff(&best);
    out.path.path[t] = static_cast<int>(best);
  }
  out.labels = collapse(out.path, vocab);
  return out;
}

template <typename Scalar>
LabelSequence prefix_beam_decode(const DistributionLattice<Scalar>& z,
                                 const Vocabulary& vocab, int beam = 4) {
  if (beam < 1) throw InvalidInput("beam must be >= 1");
  if (z.classes() != vocab.extended_size()) {
    throw InvalidInput("lattice width does not match vocabulary");
  }
  constexpr Scalar kZero = log_zero<Scalar>();
  struct Score {
    Scalar blank = log_zero<Scalar>();     // prefix ending in blank
    Scalar non_blank = log_zero<Scalar>(); // prefix ending in its last token
    Scalar total() const { return log_add(blank, non_blank); }
  };
  using Beam = std::map<std::vector<int>, Score>;
  const auto& lp = z.log_probs();

  auto prune = [beam](Beam& candidates) {
    std::vector<std::pair<std::vector<int>, Score>> v(candidates.begin(),
                                                      candidates.end());
    // Stable on the map's lexicographic order, so equal totals keep the
    // smaller prefix first.
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
      return a.second.total() > b.second.total();
    });
    if (static_cast<int>(v.size()) > beam) v.resize(beam);
    return v;
  };

  Beam current;
  current[{}].blank = 0;
  for (int t = 0; t < z.frames(); ++t) {
    Beam next;
    for (const auto& [prefix, score] : prune(current)) {
      const Scalar total = score.total();
      // Blank keeps the prefix.
      auto& same = next[prefix];
      same.blank = log_add(same.blank, total + lp(t, vocab.blank_index()));
      // Repeating the last token without an intervening blank keeps it too.
      if (!prefix.empty()) {
        const int last = vocab.extended(prefix.back());
        same.non_blank = log_add(same.non_blank, score.non_blank + lp(t, last));
      }
      for (int u = 0; u < vocab.size(); ++u) {
        const Scalar emit = lp(t, vocab.extended(u));
        if (emit == kZero) continue;
        std::vector<int> grown = prefix;
        grown.push_back(u);
        auto& ext = next[grown];
        const Scalar from = (!prefix.empty() && prefix.back() == u)
                                ? score.blank
                                : total;
        ext.non_blank = log_add(ext.non_blank, from + emit);
      }
    }
    current = std::move(next);
  }
  return LabelSequence(prune(current).front().first);
}

// log p(y | x) under the lattice; log_zero when y has no alignment.
template <typename Scalar>
Scalar sequence_log_posterior(const DistributionLattice<Scalar>& z,
                              const LabelSequence& y, const Vocabulary& vocab) {
  const auto r = ctc_loss(z, y, vocab);
  return r.feasible ? -r.loss : log_zero<Scalar>();
}

struct DecodeOracleCap {
  int max_frames = 5;
  int max_tokens = 2;
};

// argmax_y p(y | x) over every label sequence of length <= T.
template <typename Scalar>
LabelSequence decode_oracle(const DistributionLattice<Scalar>& z,
                            const Vocabulary& vocab, DecodeOracleCap cap = {}) {
  if (z.frames() > cap.max_frames || vocab.size() > cap.max_tokens) {
    throw CapacityError("decode oracle limited to T <= " +
                        std::to_string(cap.max_frames) + ", |V| <= " +
                        std::to_string(cap.max_tokens));
  }
  if (z.classes() != vocab.extended_size()) {
    throw InvalidInput("lattice width does not match vocabulary");
  }
  std::vector<LabelSequence> candidates{LabelSequence{}};
  std::vector<LabelSequence> frontier{LabelSequence{}};
  for (int len = 1; len <= z.frames(); ++len) {
    std::vector<LabelSequence> grown;
    for (const auto& y : frontier) {
      for (int u = 0; u < vocab.size(); ++u) {
        LabelSequence g = y;
        g.labels.push_back(u);
        grown.push_back(std::move(g));
      }
    }
    candidates.insert(candidates.end(), grown.begin(), grown.end());
    frontier = std::move(grown);
  }
  std::sort(candidates.begin(), candidates.end());

  LabelSequence best;
  Scalar best_score = log_zero<Scalar>();
  for (const auto& y : candidates) {
    const Scalar s = sequence_log_posterior(z, y, vocab);
    if (s > best_score) {
      best_score = s;
      best = y;
    }
  }
  return best;
}

}  // namespace crctc
