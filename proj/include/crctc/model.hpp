#pragma once

// A small residual temporal-convolution encoder with hand-written reverse
// mode gradients.
//
//   h0      = tanh(x W_in + b_in)                      (then average-pooled
//                                                       by downsample_factor)
//   h_{l+1} = h_l + keep_l / (1 - p_layer) * tanh(conv_l(drop(h_l)))
//   logits  = drop(h_L) W_out + b_out
//
// conv_l sees frames t - r .. t + r (zero padded). In training mode dropout
// masks (inverted scaling) and layer keep flags are sampled from an explicit
// seed and recorded on the tape; evaluation mode uses no masks, which matches
// the training-mode expectation.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "crctc/augment.hpp"

namespace crctc {

struct EncoderConfig {
  int input_dim = 16;
  int num_classes = 9;  // |V'|
  int layers = 3;
  int hidden_dim = 64;
  int context_radius = 2;
  double dropout_prob = 0.1;
  double layer_drop_prob = 0.1;
  int downsample_factor = 1;

  void validate() const;
  int output_frames(int input_frames) const;
};

struct NamedTensor {
  std::string name;
  Eigen::MatrixXd value;
};

class ParameterSet {
 public:
  ParameterSet() = default;

  void add(std::string name, Eigen::MatrixXd value);
  Eigen::MatrixXd& operator[](const std::string& name);
  const Eigen::MatrixXd& operator[](const std::string& name) const;

  std::vector<NamedTensor>& tensors() { return tensors_; }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }
  std::size_t size() const { return tensors_.size(); }
  Eigen::Index scalar_count() const;

  // Same names and shapes, all zeros.
  ParameterSet zeros_like() const;
  ParameterSet& operator+=(const ParameterSet& other);
  ParameterSet& operator*=(double s);
  bool all_finite() const;
  double squared_norm() const;

  friend bool operator==(const ParameterSet& a, const ParameterSet& b);

 private:
  const NamedTensor* find(const std::string& name) const;
  std::vector<NamedTensor> tensors_;
};

ParameterSet init_parameters(const EncoderConfig& cfg, std::uint64_t seed);
// Throws InvalidInput when names or shapes disagree with cfg.
void check_parameters(const EncoderConfig& cfg, const ParameterSet& params);

enum class Mode { kTrain, kEval };

struct LayerTape {
  bool kept = true;
  Eigen::MatrixXd dropout_mask;  // scaled keep mask on the layer input
  Eigen::MatrixXd columns;       // unfolded (dropped) input, T x (2r+1)H
  Eigen::MatrixXd activation;    // tanh output, T x H
};

struct Tape {
  Eigen::MatrixXd input;          // T_in x F
  Eigen::MatrixXd input_hidden;   // tanh(x W_in + b), T_in x H
  std::vector<LayerTape> layers;
  double depth_scale = 1.0;       // residual branch scale for kept layers
  Eigen::MatrixXd output_mask;    // scaled keep mask before the projection
  Eigen::MatrixXd output_input;   // dropped h_L, T x H
};

struct ForwardPass {
  LogitLattice<double> logits;
  Tape tape;
};

ForwardPass forward(const EncoderConfig& cfg, const ParameterSet& params,
                    const FeatureMatrix& x, Mode mode, std::uint64_t seed = 0);

// Gradient w.r.t. every parameter for the sub-model recorded on the tape.
ParameterSet backward(const EncoderConfig& cfg, const ParameterSet& params,
                      const Tape& tape, const Lattice<double>& grad_logits);

// Downsamples a per-frame mask to encoder output rate: an output frame is
// masked if any frame of its group is.
FrameMask downsample_mask(const FrameMask& mask, int factor);

// Binary checkpoint: magic "CRCTCPRM", u32 version, u32 config length + the
// config as key=value text, u32 tensor count, then per tensor u32 name
// length, name bytes, u32 rows, u32 cols and rows*cols little-endian f64 in
// row-major order.
void save_checkpoint(std::ostream& os, const EncoderConfig& cfg,
                     const ParameterSet& params);
std::pair<EncoderConfig, ParameterSet> load_checkpoint(std::istream& is);
void save_checkpoint(const std::string& path, const EncoderConfig& cfg,
                     const ParameterSet& params);
std::pair<EncoderConfig, ParameterSet> load_checkpoint(const std::string& path);

// Optimizers -----------------------------------------------------------------

void sgd_step(ParameterSet& params, const ParameterSet& grads, double lr);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  long long step = 0;
  ParameterSet first_moment;
  ParameterSet second_moment;
};

void adam_step(ParameterSet& params, const ParameterSet& grads,
               const AdamHyper& hyper, AdamState& state);

}  // namespace crctc
