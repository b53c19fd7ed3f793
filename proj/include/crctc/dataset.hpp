#pragma once

// Synthetic speech-like sequence task. Every token owns a start and an end
// prototype vector; an occurrence of the token is rendered as the linear
// trajectory between them over a random duration. With a prototype pool the
// endpoints are drawn from a small shared set, so a single frame no longer
// identifies its token; only the whole trajectory does. Optional silence gaps
// (zero vectors) separate tokens. Each utterance also gets
// its own constant offset (a crude speaker effect), and every frame receives
// i.i.d. Gaussian noise.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "crctc/augment.hpp"
#include "crctc/config.hpp"

namespace crctc {

struct SyntheticTaskConfig {
  int vocab_size = 8;
  int min_frames_per_token = 4;
  int max_frames_per_token = 8;
  int min_tokens = 3;
  int max_tokens = 10;
  int feature_dim = 16;
  double noise_std = 0.3;
  double prototype_scale = 1.0;
  double utterance_offset_std = 0.0;
  // Silence (all-zero prototype) frames before each token and after the last
  // one, uniform in [0, max_gap_frames].
  int max_gap_frames = 0;
  // 0: every token has its own endpoints. P >= 2: token u uses a distinct
  // ordered pair of P shared vectors (needs P * (P - 1) >= vocab_size).
  int prototype_pool = 0;
  int train_samples = 200;
  int dev_samples = 100;
  int test_samples = 200;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Sample {
  FeatureMatrix features;
  LabelSequence labels;
};

struct Dataset {
  int vocab_size = 0;
  int feature_dim = 0;
  std::vector<Sample> train;
  std::vector<Sample> dev;
  std::vector<Sample> test;
};

// Token prototypes: rows 2u and 2u + 1 hold token u's start and end vectors.
Eigen::MatrixXd token_prototypes(const SyntheticTaskConfig& cfg);

Dataset generate_dataset(const SyntheticTaskConfig& cfg);

// Text format, one value per token, full double precision:
//
//   crctc-dataset 1
//   vocab_size <V> feature_dim <F>
//   split <train|dev|test> <count>
//   sample <U> <T>
//   labels <y_1> ... <y_U>
//   <T rows of F values>
//   ...
void write_dataset(std::ostream& os, const Dataset& d);
Dataset read_dataset(std::istream& is);
void save_dataset(const std::string& path, const Dataset& d);
Dataset load_dataset(const std::string& path);

// Levenshtein distance between label sequences.
int edit_distance(const LabelSequence& a, const LabelSequence& b);

// edit_distance(hyp, ref) / max(1, |ref|).
double token_error_rate(const LabelSequence& hyp, const LabelSequence& ref);

// Mixes a base seed with stream indices into an independent 64-bit seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

}  // namespace crctc
