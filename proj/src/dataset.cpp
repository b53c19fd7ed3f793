#include "crctc/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <utility>

namespace crctc {

void SyntheticTaskConfig::validate() const {
  if (vocab_size < 1 || feature_dim < 1) {
    throw InvalidInput("vocab_size and feature_dim must be >= 1");
  }
  if (min_frames_per_token < 1 || max_frames_per_token < min_frames_per_token) {
    throw InvalidInput("frames_per_token range must be positive and ordered");
  }
  if (min_tokens < 1 || max_tokens < min_tokens) {
    throw InvalidInput("token count range must be positive and ordered");
  }
  if (train_samples < 1 || dev_samples < 1 || test_samples < 1) {
    throw InvalidInput("sample counts must be >= 1");
  }
  if (prototype_pool < 0 || prototype_pool == 1 ||
      (prototype_pool > 1 && prototype_pool * (prototype_pool - 1) < vocab_size)) {
    throw InvalidInput("prototype_pool must be 0 or P >= 2 with P * (P - 1) >= vocab_size");
  }
  if (max_gap_frames < 0) throw InvalidInput("max_gap_frames must be >= 0");
  if (!(noise_std >= 0) || !(prototype_scale > 0) || !(utterance_offset_std >= 0)) {
    throw InvalidInput("noise and scale parameters must be non-negative");
  }
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c) {
  // splitmix64 finalizer over a running combination.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  h = mix(h ^ a);
  h = mix(h ^ b);
  return mix(h ^ c);
}

Eigen::MatrixXd token_prototypes(const SyntheticTaskConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, 0xC0FFEE));
  std::normal_distribution<double> normal(0.0, cfg.prototype_scale);
  const int pool = cfg.prototype_pool;
  Eigen::MatrixXd protos(pool > 0 ? pool : 2 * cfg.vocab_size, cfg.feature_dim);
  for (Eigen::Index i = 0; i < protos.size(); ++i) protos.data()[i] = normal(rng);
  if (pool == 0) return protos;

  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < pool; ++a) {
    for (int b = 0; b < pool; ++b) {
      if (a != b) pairs.emplace_back(a, b);
    }
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  Eigen::MatrixXd out(2 * cfg.vocab_size, cfg.feature_dim);
  for (int u = 0; u < cfg.vocab_size; ++u) {
    out.row(2 * u) = protos.row(pairs[u].first);
    out.row(2 * u + 1) = protos.row(pairs[u].second);
  }
  return out;
}

namespace {

Sample render_sample(const SyntheticTaskConfig& cfg,
                     const Eigen::MatrixXd& protos, Rng& rng) {
  std::uniform_int_distribution<int> length(cfg.min_tokens, cfg.max_tokens);
  std::uniform_int_distribution<int> token(0, cfg.vocab_size - 1);
  std::uniform_int_distribution<int> duration(cfg.min_frames_per_token,
                                              cfg.max_frames_per_token);
  std::uniform_int_distribution<int> gap(0, cfg.max_gap_frames);
  std::normal_distribution<double> noise(0.0, 1.0);

  Sample s;
  const int U = length(rng);
  std::vector<int> durations(U);
  std::vector<int> gaps(U + 1, 0);
  int T = 0;
  for (int u = 0; u < U; ++u) {
    s.labels.labels.push_back(token(rng));
    durations[u] = duration(rng);
    T += durations[u];
  }
  if (cfg.max_gap_frames > 0) {
    for (int& g : gaps) {
      g = gap(rng);
      T += g;
    }
  }
  // Feasibility needs T >= U + repeats and the trainer assumes T >= 2U + 1;
  // pad the last token if short durations ever violate that.
  if (T < 2 * U + 1) {
    durations.back() += 2 * U + 1 - T;
    T = 2 * U + 1;
  }

  Eigen::RowVectorXd offset(cfg.feature_dim);
  for (int f = 0; f < cfg.feature_dim; ++f) {
    offset(f) = cfg.utterance_offset_std * noise(rng);
  }

  s.features.setZero(T, cfg.feature_dim);
  int t = 0;
  for (int u = 0; u < U; ++u) {
    t += gaps[u];
    const int k = s.labels[u];
    for (int i = 0; i < durations[u]; ++i, ++t) {
      const double w = durations[u] == 1 ? 0.0
                                         : static_cast<double>(i) / (durations[u] - 1);
      s.features.row(t) = (1.0 - w) * protos.row(2 * k) + w * protos.row(2 * k + 1);
    }
  }
  if (cfg.utterance_offset_std > 0) s.features.rowwise() += offset;
  if (cfg.noise_std > 0) {
    for (Eigen::Index i = 0; i < s.features.size(); ++i) {
      s.features.data()[i] += cfg.noise_std * noise(rng);
    }
  }
  return s;
}

std::vector<Sample> render_split(const SyntheticTaskConfig& cfg,
                                 const Eigen::MatrixXd& protos, int split,
                                 int count) {
  std::vector<Sample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(cfg.seed, 1 + split, i));
    out.push_back(render_sample(cfg, protos, rng));
  }
  return out;
}

}  // namespace

Dataset generate_dataset(const SyntheticTaskConfig& cfg) {
  cfg.validate();
  const Eigen::MatrixXd protos = token_prototypes(cfg);
  Dataset d;
  d.vocab_size = cfg.vocab_size;
  d.feature_dim = cfg.feature_dim;
  d.train = render_split(cfg, protos, 0, cfg.train_samples);
  d.dev = render_split(cfg, protos, 1, cfg.dev_samples);
  d.test = render_split(cfg, protos, 2, cfg.test_samples);
  return d;
}

// Serialization --------------------------------------------------------------

namespace {

void write_split(std::ostream& os, const char* name,
                 const std::vector<Sample>& samples) {
  os << "split " << name << ' ' << samples.size() << '\n';
  for (const auto& s : samples) {
    os << "sample " << s.labels.size() << ' ' << s.features.rows() << '\n';
    os << "labels";
    for (int l : s.labels.labels) os << ' ' << l;
    os << '\n';
    for (Eigen::Index t = 0; t < s.features.rows(); ++t) {
      for (Eigen::Index f = 0; f < s.features.cols(); ++f) {
        if (f) os << ' ';
        os << s.features(t, f);
      }
      os << '\n';
    }
  }
}

void expect(std::istream& is, const std::string& word) {
  std::string got;
  if (!(is >> got) || got != word) {
    throw InvalidInput("dataset: expected '" + word + "', got '" + got + "'");
  }
}

template <typename T>
T read_value(std::istream& is, const char* what) {
  T v{};
  if (!(is >> v)) throw InvalidInput(std::string("dataset: bad ") + what);
  return v;
}

std::vector<Sample> read_split(std::istream& is, const char* name, int vocab,
                               int dim) {
  expect(is, "split");
  expect(is, name);
  const auto count = read_value<long long>(is, "split count");
  if (count < 0) throw InvalidInput("dataset: negative split count");
  std::vector<Sample> out(count);
  for (auto& s : out) {
    expect(is, "sample");
    const auto U = read_value<long long>(is, "label count");
    const auto T = read_value<long long>(is, "frame count");
    if (U < 0 || T < 1) throw InvalidInput("dataset: bad sample shape");
    expect(is, "labels");
    for (long long u = 0; u < U; ++u) {
      const int l = read_value<int>(is, "label");
      if (l < 0 || l >= vocab) throw InvalidInput("dataset: label out of range");
      s.labels.labels.push_back(l);
    }
    s.features.resize(T, dim);
    for (Eigen::Index i = 0; i < s.features.size(); ++i) {
      s.features.data()[i] = read_value<double>(is, "feature");
    }
  }
  return out;
}

}  // namespace

void write_dataset(std::ostream& os, const Dataset& d) {
  const auto old = os.precision(std::numeric_limits<double>::max_digits10);
  os << "crctc-dataset 1\n";
  os << "vocab_size " << d.vocab_size << " feature_dim " << d.feature_dim << '\n';
  write_split(os, "train", d.train);
  write_split(os, "dev", d.dev);
  write_split(os, "test", d.test);
  os.precision(old);
}

Dataset read_dataset(std::istream& is) {
  expect(is, "crctc-dataset");
  if (read_value<int>(is, "version") != 1) {
    throw InvalidInput("dataset: unsupported version");
  }
  Dataset d;
  expect(is, "vocab_size");
  d.vocab_size = read_value<int>(is, "vocab_size");
  expect(is, "feature_dim");
  d.feature_dim = read_value<int>(is, "feature_dim");
  if (d.vocab_size < 1 || d.feature_dim < 1) {
    throw InvalidInput("dataset: bad header");
  }
  d.train = read_split(is, "train", d.vocab_size, d.feature_dim);
  d.dev = read_split(is, "dev", d.vocab_size, d.feature_dim);
  d.test = read_split(is, "test", d.vocab_size, d.feature_dim);
  return d;
}

void save_dataset(const std::string& path, const Dataset& d) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot open " + path + " for writing");
  write_dataset(os, d);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot open dataset " + path);
  return read_dataset(is);
}

int edit_distance(const LabelSequence& a, const LabelSequence& b) {
  const int n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (int j = 0; j <= m; ++j) prev[j] = j;
  for (int i = 1; i <= n; ++i) {
    cur[0] = i;
    for (int j = 1; j <= m; ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1,
                         prev[j - 1] + (a[i - 1] != b[j - 1])});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double token_error_rate(const LabelSequence& hyp, const LabelSequence& ref) {
  return static_cast<double>(edit_distance(hyp, ref)) /
         std::max(1, ref.size());
}

}  // namespace crctc
