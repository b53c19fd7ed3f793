#include "crctc/augment.hpp"

#include <algorithm>
#include <cmath>

namespace crctc {

namespace {

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Resamples `rows` frames of src starting at `begin` onto `out_rows` frames of
// dst starting at `out_begin`, half-pixel aligned.
void resample_segment(const FeatureMatrix& src, int begin, int rows,
                      FeatureMatrix& dst, int out_begin, int out_rows) {
  const double scale = static_cast<double>(rows) / out_rows;
  for (int i = 0; i < out_rows; ++i) {
    double pos = (i + 0.5) * scale - 0.5;
    pos = std::clamp(pos, 0.0, static_cast<double>(rows - 1));
    const int lo = static_cast<int>(std::floor(pos));
    const int hi = std::min(lo + 1, rows - 1);
    const double frac = pos - lo;
    dst.row(out_begin + i) = (1.0 - frac) * src.row(begin + lo) +
                             frac * src.row(begin + hi);
  }
}

}  // namespace

int SpecAugmentConfig::effective_num_time_masks() const {
  return static_cast<int>(std::lround(num_time_masks * time_scale_ratio));
}

double SpecAugmentConfig::effective_max_time_fraction() const {
  return std::min(1.0, max_time_mask_fraction * time_scale_ratio);
}

int SpecAugmentConfig::effective_num_freq_masks() const {
  return static_cast<int>(std::lround(num_freq_masks * freq_scale_ratio));
}

int SpecAugmentConfig::max_masked_frames(int frames) const {
  // The epsilon keeps e.g. 0.375 * 1000 from flooring to 374.
  return static_cast<int>(
      std::floor(effective_max_time_fraction() * frames + 1e-9));
}

void SpecAugmentConfig::validate() const {
  if (warp_factor < 0 || num_freq_masks < 0 || max_freq_mask_width < 0 ||
      num_time_masks < 0 || max_time_mask_width < 0) {
    throw InvalidInput("SpecAugment counts and widths must be >= 0");
  }
  if (!(max_time_mask_fraction >= 0 && max_time_mask_fraction <= 1)) {
    throw InvalidInput("max_time_mask_fraction must lie in [0, 1]");
  }
  if (!(time_scale_ratio >= 0) || !(freq_scale_ratio >= 0)) {
    throw InvalidInput("masking scale ratios must be >= 0");
  }
}

int AugmentedView::masked_frame_count() const {
  return static_cast<int>(
      std::count(time_masked.begin(), time_masked.end(), true));
}

FeatureMatrix time_warp(const FeatureMatrix& x, int warp_factor, Rng& rng) {
  const int T = static_cast<int>(x.rows());
  const int w = warp_factor;
  if (w <= 0 || T <= 2 * w) return x;
  const int center = uniform_int(rng, w, T - w - 1);
  const int shift = uniform_int(rng, -w, w);
  const int warped = std::clamp(center + shift, 1, T - 1);
  FeatureMatrix out(x.rows(), x.cols());
  resample_segment(x, 0, center, out, 0, warped);
  resample_segment(x, center, T - center, out, warped, T - warped);
  return out;
}

void apply_freq_masks(FeatureMatrix& x, const SpecAugmentConfig& cfg,
                      Rng& rng) {
  const int F = static_cast<int>(x.cols());
  const int max_width = std::min(cfg.max_freq_mask_width, F);
  for (int i = 0; i < cfg.effective_num_freq_masks(); ++i) {
    const int width = uniform_int(rng, 0, max_width);
    const int start = uniform_int(rng, 0, F - width);
    x.middleCols(start, width).setConstant(cfg.mask_value);
  }
}

void apply_time_masks(AugmentedView& view, const SpecAugmentConfig& cfg,
                      Rng& rng) {
  const int T = view.frames();
  view.time_masked.assign(T, false);
  const int cap = cfg.max_masked_frames(T);
  const int max_width = std::min(cfg.max_time_mask_width, T);
  int used = 0;
  for (int i = 0; i < cfg.effective_num_time_masks() && used < cap; ++i) {
    int width = uniform_int(rng, 0, max_width);
    width = std::min(width, cap - used);
    const int start = uniform_int(rng, 0, T - width);
    view.features.middleRows(start, width).setConstant(cfg.mask_value);
    std::fill_n(view.time_masked.begin() + start, width, true);
    used += width;
  }
}

AugmentedView augment_single(const FeatureMatrix& x,
                             const SpecAugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  AugmentedView v{time_warp(x, cfg.warp_factor, rng), {}};
  apply_freq_masks(v.features, cfg, rng);
  apply_time_masks(v, cfg, rng);
  return v;
}

std::pair<AugmentedView, AugmentedView> make_views(const FeatureMatrix& x,
                                                   const SpecAugmentConfig& cfg,
                                                   Rng& rng) {
  cfg.validate();
  if (x.rows() < 1) throw InvalidInput("features need T >= 1");
  const FeatureMatrix warped = time_warp(x, cfg.warp_factor, rng);
  AugmentedView a{warped, {}};
  AugmentedView b{warped, {}};
  apply_freq_masks(a.features, cfg, rng);
  apply_time_masks(a, cfg, rng);
  apply_freq_masks(b.features, cfg, rng);
  apply_time_masks(b, cfg, rng);
  return {std::move(a), std::move(b)};
}

}  // namespace crctc
