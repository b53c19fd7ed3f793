#pragma once

// Peakedness statistics along the greedy alignment: how long non-blank tokens
// last and how confidently blank / non-blank frames are emitted.
//
// Emit probability of a frame is the probability of its argmax token;
// averages are per frame. Consecutive identical non-blank frames form one
// emission; the same token after a blank starts a new one.

#include <ostream>

#include "crctc/decode.hpp"

namespace crctc {

struct PeakStats {
  double nonblank_frames = 0;
  double nonblank_emissions = 0;
  double blank_frames = 0;
  double blank_prob_sum = 0;
  double nonblank_prob_sum = 0;

  // 0 when nothing non-blank was emitted.
  double mean_nonblank_duration() const {
    return nonblank_emissions > 0 ? nonblank_frames / nonblank_emissions : 0.0;
  }
  double mean_blank_emit_prob() const {
    return blank_frames > 0 ? blank_prob_sum / blank_frames : 0.0;
  }
  double mean_nonblank_emit_prob() const {
    return nonblank_frames > 0 ? nonblank_prob_sum / nonblank_frames : 0.0;
  }

  // Pools counts, e.g. across a test set.
  PeakStats& operator+=(const PeakStats& o) {
    nonblank_frames += o.nonblank_frames;
    nonblank_emissions += o.nonblank_emissions;
    blank_frames += o.blank_frames;
    blank_prob_sum += o.blank_prob_sum;
    nonblank_prob_sum += o.nonblank_prob_sum;
    return *this;
  }
};

template <typename Scalar>
PeakStats peak_stats(const DistributionLattice<Scalar>& z,
                     const Vocabulary& vocab) {
  const auto greedy = greedy_decode(z, vocab);
  PeakStats s;
  int prev = vocab.blank_index();
  for (int t = 0; t < z.frames(); ++t) {
    const int k = greedy.path.path[t];
    const double p = static_cast<double>(z.probs()(t, k));
    if (vocab.is_blank(k)) {
      s.blank_frames += 1;
      s.blank_prob_sum += p;
    } else {
      s.nonblank_frames += 1;
      s.nonblank_prob_sum += p;
      if (k != prev) s.nonblank_emissions += 1;
    }
    prev = k;
  }
  return s;
}

inline const char* peak_stats_csv_header() {
  return "mean_nonblank_duration,mean_blank_emit_prob,mean_nonblank_emit_prob,"
         "nonblank_emissions,nonblank_frames,blank_frames";
}

void write_peak_stats_csv_row(std::ostream& os, const PeakStats& s);

// Figure-style series: one line per frame with the argmax token and its
// probability. Blank frames carry kind "blank" and token name "<blank>".
//
//   frame,token_index,token,kind,prob
template <typename Scalar>
void emit_plot_data(std::ostream& os, const DistributionLattice<Scalar>& z,
                    const Vocabulary& vocab) {
  const auto greedy = greedy_decode(z, vocab);
  const auto old_precision = os.precision(10);
  os << "frame,token_index,token,kind,prob\n";
  for (int t = 0; t < z.frames(); ++t) {
    const int k = greedy.path.path[t];
    const bool blank = vocab.is_blank(k);
    os << t << ',' << k << ',' << (blank ? "<blank>" : vocab.name(vocab.token_of(k)))
       << ',' << (blank ? "blank" : "token") << ','
       << static_cast<double>(z.probs()(t, k)) << '\n';
  }
  os.precision(old_precision);
}

}  // namespace crctc
