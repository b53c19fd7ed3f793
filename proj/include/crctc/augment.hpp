#pragma once

// SpecAugment and paired-view construction. The time warp is drawn once and
// shared by both views; frequency and time masks are then drawn independently
// for each copy.

#include <random>
#include <utility>

#include "crctc/lattice.hpp"

namespace crctc {

// T x F, one row per frame.
using FeatureMatrix = Lattice<double>;
using Rng = std::mt19937_64;

struct SpecAugmentConfig {
  int warp_factor = 80;
  int num_freq_masks = 2;
  int max_freq_mask_width = 27;
  int num_time_masks = 10;
  int max_time_mask_width = 100;
  double max_time_mask_fraction = 0.15;
  // Scales the number of time masks and the masked fraction cap (2.5 for the
  // consistency-regularized recipe, 1.0 for the baseline).
  double time_scale_ratio = 1.0;
  // Scales the number of frequency masks (larger-frequency-masking ablation).
  double freq_scale_ratio = 1.0;
  double mask_value = 0.0;

  static SpecAugmentConfig baseline() { return {}; }
  static SpecAugmentConfig consistency() {
    SpecAugmentConfig c;
    c.time_scale_ratio = 2.5;
    return c;
  }

  int effective_num_time_masks() const;
  double effective_max_time_fraction() const;
  int effective_num_freq_masks() const;
  // Upper bound on time-masked frames for a T-frame input.
  int max_masked_frames(int frames) const;

  void validate() const;
};

struct AugmentedView {
  FeatureMatrix features;
  FrameMask time_masked;

  int frames() const { return static_cast<int>(features.rows()); }
  int masked_frame_count() const;
};

// Pivot c ~ U[w, T-w), displaced by d ~ U[-w, w]; [0, c) is resampled onto
// [0, c + d) and [c, T) onto [c + d, T) by linear interpolation along time.
// Identity when w == 0 or T <= 2w.
FeatureMatrix time_warp(const FeatureMatrix& x, int warp_factor, Rng& rng);

// In place; masked cells are set to cfg.mask_value.
void apply_freq_masks(FeatureMatrix& x, const SpecAugmentConfig& cfg, Rng& rng);
// Time masks with a running cap on total masked width; fills time_masked.
void apply_time_masks(AugmentedView& view, const SpecAugmentConfig& cfg,
                      Rng& rng);

AugmentedView augment_single(const FeatureMatrix& x,
                             const SpecAugmentConfig& cfg, Rng& rng);

std::pair<AugmentedView, AugmentedView> make_views(const FeatureMatrix& x,
                                                   const SpecAugmentConfig& cfg,
                                                   Rng& rng);

}  // namespace crctc
