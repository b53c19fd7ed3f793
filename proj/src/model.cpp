#include "crctc/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "crctc/config.hpp"

namespace crctc {

void EncoderConfig::validate() const {
  if (input_dim < 1 || num_classes < 1 || hidden_dim < 1) {
    throw InvalidInput("encoder dimensions must be >= 1");
  }
  if (layers < 0 || context_radius < 0) {
    throw InvalidInput("encoder layers and context radius must be >= 0");
  }
  if (downsample_factor < 1) throw InvalidInput("downsample_factor must be >= 1");
  if (!(dropout_prob >= 0 && dropout_prob < 1) ||
      !(layer_drop_prob >= 0 && layer_drop_prob < 1)) {
    throw InvalidInput("drop probabilities must lie in [0, 1)");
  }
}

int EncoderConfig::output_frames(int input_frames) const {
  return (input_frames + downsample_factor - 1) / downsample_factor;
}

// ParameterSet ---------------------------------------------------------------

void ParameterSet::add(std::string name, Eigen::MatrixXd value) {
  if (find(name)) throw InvalidInput("duplicate parameter " + name);
  tensors_.push_back({std::move(name), std::move(value)});
}

const NamedTensor* ParameterSet::find(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

Eigen::MatrixXd& ParameterSet::operator[](const std::string& name) {
  return const_cast<Eigen::MatrixXd&>(std::as_const(*this)[name]);
}

const Eigen::MatrixXd& ParameterSet::operator[](const std::string& name) const {
  const NamedTensor* t = find(name);
  if (!t) throw InvalidInput("unknown parameter " + name);
  return t->value;
}

Eigen::Index ParameterSet::scalar_count() const {
  Eigen::Index n = 0;
  for (const auto& t : tensors_) n += t.value.size();
  return n;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const auto& t : tensors_) {
    out.add(t.name, Eigen::MatrixXd::Zero(t.value.rows(), t.value.cols()));
  }
  return out;
}

ParameterSet& ParameterSet::operator+=(const ParameterSet& other) {
  if (other.tensors_.size() != tensors_.size()) {
    throw InvalidInput("parameter sets differ in size");
  }
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    tensors_[i].value += other.tensors_[i].value;
  }
  return *this;
}

ParameterSet& ParameterSet::operator*=(double s) {
  for (auto& t : tensors_) t.value *= s;
  return *this;
}

bool ParameterSet::all_finite() const {
  for (const auto& t : tensors_) {
    if (!t.value.allFinite()) return false;
  }
  return true;
}

double ParameterSet::squared_norm() const {
  double s = 0;
  for (const auto& t : tensors_) s += t.value.squaredNorm();
  return s;
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
  if (a.tensors_.size() != b.tensors_.size()) return false;
  for (std::size_t i = 0; i < a.tensors_.size(); ++i) {
    const auto& x = a.tensors_[i];
    const auto& y = b.tensors_[i];
    if (x.name != y.name || x.value.rows() != y.value.rows() ||
        x.value.cols() != y.value.cols() || x.value != y.value) {
      return false;
    }
  }
  return true;
}

// Initialization -------------------------------------------------------------

namespace {

std::string layer_name(int l, const char* what) {
  return "layer" + std::to_string(l) + "." + what;
}

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, double stddev,
                         Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

int kernel_width(const EncoderConfig& cfg) { return 2 * cfg.context_radius + 1; }

}  // namespace

ParameterSet init_parameters(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const int H = cfg.hidden_dim;
  ParameterSet p;
  p.add("input.weight", gaussian(cfg.input_dim, H, 1.0 / std::sqrt(cfg.input_dim), rng));
  p.add("input.bias", Eigen::MatrixXd::Zero(1, H));
  const int fan_in = kernel_width(cfg) * H;
  for (int l = 0; l < cfg.layers; ++l) {
    p.add(layer_name(l, "weight"), gaussian(fan_in, H, 1.0 / std::sqrt(fan_in), rng));
    p.add(layer_name(l, "bias"), Eigen::MatrixXd::Zero(1, H));
  }
  p.add("output.weight", gaussian(H, cfg.num_classes, 1.0 / std::sqrt(H), rng));
  p.add("output.bias", Eigen::MatrixXd::Zero(1, cfg.num_classes));
  return p;
}

void check_parameters(const EncoderConfig& cfg, const ParameterSet& params) {
  const ParameterSet expected = init_parameters(cfg, 0);
  if (expected.size() != params.size()) {
    throw InvalidInput("parameter set has " + std::to_string(params.size()) +
                       " tensors, config expects " +
                       std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = expected.tensors()[i];
    const auto& g = params.tensors()[i];
    if (e.name != g.name || e.value.rows() != g.value.rows() ||
        e.value.cols() != g.value.cols()) {
      throw InvalidInput("parameter " + g.name + " does not match config");
    }
    if (!g.value.allFinite()) throw InvalidInput("parameter " + g.name + " is not finite");
  }
}

// Forward / backward ---------------------------------------------------------

namespace {

// T x H -> T x (2r+1)H; block j holds frame t + j - r (zero outside).
Eigen::MatrixXd unfold(const Eigen::MatrixXd& h, int radius) {
  const Eigen::Index T = h.rows(), H = h.cols();
  const int width = 2 * radius + 1;
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(T, width * H);
  for (int j = 0; j < width; ++j) {
    const Eigen::Index shift = j - radius;
    const Eigen::Index dst_begin = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index dst_end = std::min<Eigen::Index>(T, T - shift);
    if (dst_end <= dst_begin) continue;
    cols.block(dst_begin, j * H, dst_end - dst_begin, H) =
        h.middleRows(dst_begin + shift, dst_end - dst_begin);
  }
  return cols;
}

// Adjoint of unfold.
Eigen::MatrixXd fold(const Eigen::MatrixXd& cols, int radius, Eigen::Index H) {
  const Eigen::Index T = cols.rows();
  const int width = 2 * radius + 1;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(T, H);
  for (int j = 0; j < width; ++j) {
    const Eigen::Index shift = j - radius;
    const Eigen::Index dst_begin = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index dst_end = std::min<Eigen::Index>(T, T - shift);
    if (dst_end <= dst_begin) continue;
    h.middleRows(dst_begin + shift, dst_end - dst_begin) +=
        cols.block(dst_begin, j * H, dst_end - dst_begin, H);
  }
  return h;
}

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p,
                             Rng& rng) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Ones(rows, cols);
  if (p <= 0) return m;
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng) ? scale : 0.0;
  return m;
}

Eigen::MatrixXd average_pool(const Eigen::MatrixXd& h, int factor) {
  if (factor == 1) return h;
  const Eigen::Index T = h.rows();
  const Eigen::Index out_rows = (T + factor - 1) / factor;
  Eigen::MatrixXd out(out_rows, h.cols());
  for (Eigen::Index i = 0; i < out_rows; ++i) {
    const Eigen::Index begin = i * factor;
    const Eigen::Index n = std::min<Eigen::Index>(factor, T - begin);
    out.row(i) = h.middleRows(begin, n).colwise().mean();
  }
  return out;
}

Eigen::MatrixXd average_pool_adjoint(const Eigen::MatrixXd& g, int factor,
                                     Eigen::Index input_rows) {
  if (factor == 1) return g;
  Eigen::MatrixXd out(input_rows, g.cols());
  for (Eigen::Index t = 0; t < input_rows; ++t) {
    const Eigen::Index group = t / factor;
    const Eigen::Index n =
        std::min<Eigen::Index>(factor, input_rows - group * factor);
    out.row(t) = g.row(group) / static_cast<double>(n);
  }
  return out;
}

}  // namespace

ForwardPass forward(const EncoderConfig& cfg, const ParameterSet& params,
                    const FeatureMatrix& x, Mode mode, std::uint64_t seed) {
  cfg.validate();
  if (x.cols() != cfg.input_dim) {
    throw InvalidInput("feature dimension " + std::to_string(x.cols()) +
                       " does not match encoder input_dim " +
                       std::to_string(cfg.input_dim));
  }
  if (x.rows() < 1) throw InvalidInput("input needs at least one frame");
  if (!x.allFinite()) throw InvalidInput("non-finite input feature");

  const bool train = mode == Mode::kTrain;
  Rng rng(seed);
  Tape tape;
  tape.input = x;
  tape.input_hidden =
      ((x * params["input.weight"]).rowwise() +
       params["input.bias"].row(0)).array().tanh().matrix();
  Eigen::MatrixXd h = average_pool(tape.input_hidden, cfg.downsample_factor);

  tape.depth_scale = train ? 1.0 / (1.0 - cfg.layer_drop_prob) : 1.0;
  std::bernoulli_distribution keep_layer(1.0 - cfg.layer_drop_prob);
  tape.layers.resize(cfg.layers);
  for (int l = 0; l < cfg.layers; ++l) {
    LayerTape& lt = tape.layers[l];
    lt.kept = !train || cfg.layer_drop_prob <= 0 || keep_layer(rng);
    lt.dropout_mask = train ? dropout_mask(h.rows(), h.cols(), cfg.dropout_prob, rng)
                            : Eigen::MatrixXd::Ones(h.rows(), h.cols());
    if (!lt.kept) continue;
    lt.columns = unfold(h.cwiseProduct(lt.dropout_mask), cfg.context_radius);
    lt.activation = ((lt.columns * params[layer_name(l, "weight")]).rowwise() +
                     params[layer_name(l, "bias")].row(0))
                        .array()
                        .tanh()
                        .matrix();
    h += tape.depth_scale * lt.activation;
  }

  tape.output_mask = train ? dropout_mask(h.rows(), h.cols(), cfg.dropout_prob, rng)
                           : Eigen::MatrixXd::Ones(h.rows(), h.cols());
  tape.output_input = h.cwiseProduct(tape.output_mask);
  Lattice<double> logits = (tape.output_input * params["output.weight"]).rowwise() +
                           params["output.bias"].row(0);
  return {LogitLattice<double>(std::move(logits)), std::move(tape)};
}

ParameterSet backward(const EncoderConfig& cfg, const ParameterSet& params,
                      const Tape& tape, const Lattice<double>& grad_logits) {
  ParameterSet grads = params.zeros_like();
  const Eigen::MatrixXd g = grad_logits;
  if (g.rows() != tape.output_input.rows() || g.cols() != cfg.num_classes) {
    throw InvalidInput("upstream gradient shape does not match tape");
  }
  grads["output.weight"] = tape.output_input.transpose() * g;
  grads["output.bias"] = g.colwise().sum();
  Eigen::MatrixXd dh =
      (g * params["output.weight"].transpose()).cwiseProduct(tape.output_mask);

  for (int l = cfg.layers - 1; l >= 0; --l) {
    const LayerTape& lt = tape.layers[l];
    if (!lt.kept) continue;
    const Eigen::MatrixXd da =
        (tape.depth_scale * dh).cwiseProduct(
            (1.0 - lt.activation.array().square()).matrix());
    grads[layer_name(l, "weight")] = lt.columns.transpose() * da;
    grads[layer_name(l, "bias")] = da.colwise().sum();
    const Eigen::MatrixXd dcols = da * params[layer_name(l, "weight")].transpose();
    dh += fold(dcols, cfg.context_radius, cfg.hidden_dim).cwiseProduct(lt.dropout_mask);
  }

  const Eigen::MatrixXd dhidden =
      average_pool_adjoint(dh, cfg.downsample_factor, tape.input_hidden.rows());
  const Eigen::MatrixXd dpre = dhidden.cwiseProduct(
      (1.0 - tape.input_hidden.array().square()).matrix());
  grads["input.weight"] = tape.input.transpose() * dpre;
  grads["input.bias"] = dpre.colwise().sum();
  return grads;
}

FrameMask downsample_mask(const FrameMask& mask, int factor) {
  if (factor <= 1) return mask;
  FrameMask out((mask.size() + factor - 1) / factor, false);
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (mask[t]) out[t / factor] = true;
  }
  return out;
}

// Checkpoints ----------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'C', 'R', 'C', 'T', 'C', 'P', 'R', 'M'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw InvalidInput("truncated checkpoint");
  }
  return v;
}

std::string read_bytes(std::istream& is, std::uint32_t n) {
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw InvalidInput("truncated checkpoint");
  return s;
}

std::string encoder_config_text(const EncoderConfig& c) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "input_dim = " << c.input_dim << '\n'
     << "num_classes = " << c.num_classes << '\n'
     << "layers = " << c.layers << '\n'
     << "hidden_dim = " << c.hidden_dim << '\n'
     << "context_radius = " << c.context_radius << '\n'
     << "dropout_prob = " << c.dropout_prob << '\n'
     << "layer_drop_prob = " << c.layer_drop_prob << '\n'
     << "downsample_factor = " << c.downsample_factor << '\n';
  return os.str();
}

EncoderConfig encoder_config_from_text(const std::string& text) {
  const auto kv = KeyValueConfig::parse_string(text);
  EncoderConfig c;
  c.input_dim = static_cast<int>(kv.get_int("input_dim", c.input_dim));
  c.num_classes = static_cast<int>(kv.get_int("num_classes", c.num_classes));
  c.layers = static_cast<int>(kv.get_int("layers", c.layers));
  c.hidden_dim = static_cast<int>(kv.get_int("hidden_dim", c.hidden_dim));
  c.context_radius = static_cast<int>(kv.get_int("context_radius", c.context_radius));
  c.dropout_prob = kv.get_double("dropout_prob", c.dropout_prob);
  c.layer_drop_prob = kv.get_double("layer_drop_prob", c.layer_drop_prob);
  c.downsample_factor =
      static_cast<int>(kv.get_int("downsample_factor", c.downsample_factor));
  c.validate();
  return c;
}

}  // namespace

void save_checkpoint(std::ostream& os, const EncoderConfig& cfg,
                     const ParameterSet& params) {
  check_parameters(cfg, params);
  os.write(kMagic, sizeof kMagic);
  write_u32(os, kVersion);
  const std::string text = encoder_config_text(cfg);
  write_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& t : params.tensors()) {
    write_u32(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_u32(os, static_cast<std::uint32_t>(t.value.rows()));
    write_u32(os, static_cast<std::uint32_t>(t.value.cols()));
    for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) {
        const double v = t.value(r, c);
        os.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
    }
  }
  if (!os) throw InvalidInput("failed writing checkpoint");
}

std::pair<EncoderConfig, ParameterSet> load_checkpoint(std::istream& is) {
  char magic[sizeof kMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic)) {
    throw InvalidInput("not a checkpoint (bad magic)");
  }
  if (const auto v = read_u32(is); v != kVersion) {
    throw InvalidInput("unsupported checkpoint version " + std::to_string(v));
  }
  const EncoderConfig cfg = encoder_config_from_text(read_bytes(is, read_u32(is)));
  const std::uint32_t count = read_u32(is);
  ParameterSet params;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = read_bytes(is, read_u32(is));
    const std::uint32_t rows = read_u32(is), cols = read_u32(is);
    Eigen::MatrixXd m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) {
        double v = 0;
        if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
          throw InvalidInput("truncated checkpoint");
        }
        m(r, c) = v;
      }
    }
    params.add(std::move(name), std::move(m));
  }
  check_parameters(cfg, params);
  return {cfg, std::move(params)};
}

void save_checkpoint(const std::string& path, const EncoderConfig& cfg,
                     const ParameterSet& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("cannot open " + path + " for writing");
  save_checkpoint(os, cfg, params);
}

std::pair<EncoderConfig, ParameterSet> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("cannot open checkpoint " + path);
  return load_checkpoint(is);
}

// Optimizers -----------------------------------------------------------------

void sgd_step(ParameterSet& params, const ParameterSet& grads, double lr) {
  if (grads.size() != params.size()) throw InvalidInput("gradient set mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    params.tensors()[i].value -= lr * grads.tensors()[i].value;
  }
}

void adam_step(ParameterSet& params, const ParameterSet& grads,
               const AdamHyper& hyper, AdamState& state) {
  if (grads.size() != params.size()) throw InvalidInput("gradient set mismatch");
  if (state.step == 0) {
    state.first_moment = params.zeros_like();
    state.second_moment = params.zeros_like();
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Eigen::MatrixXd& g = grads.tensors()[i].value;
    Eigen::MatrixXd& m = state.first_moment.tensors()[i].value;
    Eigen::MatrixXd& v = state.second_moment.tensors()[i].value;
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * g;
    v = hyper.beta2 * v + (1.0 - hyper.beta2) * g.cwiseAbs2();
    params.tensors()[i].value.array() -=
        hyper.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + hyper.eps);
  }
}

}  // namespace crctc
