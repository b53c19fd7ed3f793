#include "crctc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace crctc {

std::string_view to_string(Objective o) {
  switch (o) {
    case Objective::kCtc: return "ctc";
    case Objective::kCrCtc: return "cr_ctc";
    case Objective::kSrCtc: return "sr_ctc";
  }
  return "ctc";
}

Objective parse_objective(std::string_view s) {
  if (s == "ctc") return Objective::kCtc;
  if (s == "cr_ctc") return Objective::kCrCtc;
  if (s == "sr_ctc") return Objective::kSrCtc;
  throw InvalidInput("unknown objective '" + std::string(s) + "'");
}

int TrainConfig::effective_epochs() const {
  if (objective == Objective::kCrCtc && fair_cost) return std::max(1, (epochs + 1) / 2);
  return epochs;
}

int TrainConfig::effective_batch_size() const {
  if (objective == Objective::kCrCtc && fair_cost) {
    return std::max(1, (batch_size + 1) / 2);
  }
  return batch_size;
}

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1) throw InvalidInput("epochs and batch_size must be >= 1");
  if (!(lr >= 0)) throw InvalidInput("train.lr must be >= 0");
}

// Configuration --------------------------------------------------------------

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  // A small, noisy training set with silence between tokens: the CTC baseline
  // overfits and stays well off the error floor.
  c.task.noise_std = 1.0;
  c.task.utterance_offset_std = 0.5;
  c.task.max_gap_frames = 12;
  c.task.train_samples = 40;
  c.encoder.dropout_prob = 0.2;
  c.encoder.downsample_factor = 2;
  c.train.epochs = 200;
  c.augment.warp_factor = 4;
  c.augment.num_freq_masks = 2;
  c.augment.max_freq_mask_width = 5;
  c.augment.num_time_masks = 10;
  c.augment.max_time_mask_width = 3;
  c.augment.max_time_mask_fraction = 0.15;
  c.augment.time_scale_ratio = 1.0;
  return c;
}

const std::vector<std::string>& ExperimentConfig::known_keys() {
  static const std::vector<std::string> keys = {
      "task.vocab_size", "task.min_frames_per_token", "task.max_frames_per_token",
      "task.min_tokens", "task.max_tokens", "task.feature_dim", "task.noise_std",
      "task.prototype_scale", "task.utterance_offset_std", "task.max_gap_frames", "task.prototype_pool",
      "task.train_samples", "task.dev_samples", "task.test_samples", "task.seed",
      "model.layers", "model.hidden_dim", "model.context_radius",
      "model.dropout_prob", "model.layer_drop_prob", "model.downsample_factor",
      "augment.warp_factor", "augment.num_freq_masks", "augment.max_freq_mask_width",
      "augment.num_time_masks", "augment.max_time_mask_width",
      "augment.max_time_mask_fraction", "augment.time_scale_ratio",
      "augment.cr_time_scale_ratio", "augment.freq_scale_ratio", "augment.mask_value",
      "cr.alpha", "cr.distance", "cr.target_mode", "cr.frame_filter",
      "cr.normalize_by_frames",
      "sr.beta", "sr.kernel",
      "train.objective", "train.epochs", "train.batch_size", "train.fair_cost",
      "train.lr", "train.grad_clip", "train.prefix_beam", "train.seed"};
  return keys;
}

ExperimentConfig ExperimentConfig::from_kv(const KeyValueConfig& kv) {
  if (const auto unknown = kv.unknown_keys(known_keys()); !unknown.empty()) {
    throw InvalidInput("unknown config key " + unknown.front());
  }
  ExperimentConfig c = defaults();
  auto geti = [&](const char* k, int fallback) {
    return static_cast<int>(kv.get_int(k, fallback));
  };
  auto& t = c.task;
  t.vocab_size = geti("task.vocab_size", t.vocab_size);
  t.min_frames_per_token = geti("task.min_frames_per_token", t.min_frames_per_token);
  t.max_frames_per_token = geti("task.max_frames_per_token", t.max_frames_per_token);
  t.min_tokens = geti("task.min_tokens", t.min_tokens);
  t.max_tokens = geti("task.max_tokens", t.max_tokens);
  t.feature_dim = geti("task.feature_dim", t.feature_dim);
  t.noise_std = kv.get_double("task.noise_std", t.noise_std);
  t.prototype_scale = kv.get_double("task.prototype_scale", t.prototype_scale);
  t.utterance_offset_std = kv.get_double("task.utterance_offset_std", t.utterance_offset_std);
  t.max_gap_frames = geti("task.max_gap_frames", t.max_gap_frames);
  t.prototype_pool = geti("task.prototype_pool", t.prototype_pool);
  t.train_samples = geti("task.train_samples", t.train_samples);
  t.dev_samples = geti("task.dev_samples", t.dev_samples);
  t.test_samples = geti("task.test_samples", t.test_samples);
  t.seed = static_cast<std::uint64_t>(kv.get_int("task.seed", static_cast<long long>(t.seed)));

  auto& m = c.encoder;
  m.layers = geti("model.layers", m.layers);
  m.hidden_dim = geti("model.hidden_dim", m.hidden_dim);
  m.context_radius = geti("model.context_radius", m.context_radius);
  m.dropout_prob = kv.get_double("model.dropout_prob", m.dropout_prob);
  m.layer_drop_prob = kv.get_double("model.layer_drop_prob", m.layer_drop_prob);
  m.downsample_factor = geti("model.downsample_factor", m.downsample_factor);

  auto& a = c.augment;
  a.warp_factor = geti("augment.warp_factor", a.warp_factor);
  a.num_freq_masks = geti("augment.num_freq_masks", a.num_freq_masks);
  a.max_freq_mask_width = geti("augment.max_freq_mask_width", a.max_freq_mask_width);
  a.num_time_masks = geti("augment.num_time_masks", a.num_time_masks);
  a.max_time_mask_width = geti("augment.max_time_mask_width", a.max_time_mask_width);
  a.max_time_mask_fraction =
      kv.get_double("augment.max_time_mask_fraction", a.max_time_mask_fraction);
  a.time_scale_ratio = kv.get_double("augment.time_scale_ratio", a.time_scale_ratio);
  a.freq_scale_ratio = kv.get_double("augment.freq_scale_ratio", a.freq_scale_ratio);
  a.mask_value = kv.get_double("augment.mask_value", a.mask_value);
  c.cr_time_scale_ratio =
      kv.get_double("augment.cr_time_scale_ratio", c.cr_time_scale_ratio);

  c.cr.alpha = kv.get_double("cr.alpha", c.cr.alpha);
  c.cr.distance = parse_distance(kv.get_string("cr.distance", std::string(to_string(c.cr.distance))));
  c.cr.target_mode =
      parse_target_mode(kv.get_string("cr.target_mode", std::string(to_string(c.cr.target_mode))));
  c.cr.frame_filter =
      parse_frame_filter(kv.get_string("cr.frame_filter", std::string(to_string(c.cr.frame_filter))));
  c.cr.normalize_by_frames = kv.get_bool("cr.normalize_by_frames", c.cr.normalize_by_frames);

  c.sr.beta = kv.get_double("sr.beta", c.sr.beta);
  const auto kernel = kv.get_doubles(
      "sr.kernel", {c.sr.kernel[0], c.sr.kernel[1], c.sr.kernel[2]});
  if (kernel.size() != 3) throw InvalidInput("sr.kernel needs exactly 3 weights");
  std::copy(kernel.begin(), kernel.end(), c.sr.kernel.begin());

  auto& tr = c.train;
  tr.objective = parse_objective(kv.get_string("train.objective", std::string(to_string(tr.objective))));
  tr.epochs = geti("train.epochs", tr.epochs);
  tr.batch_size = geti("train.batch_size", tr.batch_size);
  tr.fair_cost = kv.get_bool("train.fair_cost", tr.fair_cost);
  tr.lr = kv.get_double("train.lr", tr.lr);
  tr.grad_clip = kv.get_double("train.grad_clip", tr.grad_clip);
  tr.prefix_beam = geti("train.prefix_beam", tr.prefix_beam);
  tr.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", static_cast<long long>(tr.seed)));

  c.validate();
  return c;
}

KeyValueConfig ExperimentConfig::to_kv() const {
  KeyValueConfig kv;
  auto num = [](double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
  };
  auto i = [](long long v) { return std::to_string(v); };
  kv.set("task.vocab_size", i(task.vocab_size));
  kv.set("task.min_frames_per_token", i(task.min_frames_per_token));
  kv.set("task.max_frames_per_token", i(task.max_frames_per_token));
  kv.set("task.min_tokens", i(task.min_tokens));
  kv.set("task.max_tokens", i(task.max_tokens));
  kv.set("task.feature_dim", i(task.feature_dim));
  kv.set("task.noise_std", num(task.noise_std));
  kv.set("task.prototype_scale", num(task.prototype_scale));
  kv.set("task.utterance_offset_std", num(task.utterance_offset_std));
  kv.set("task.max_gap_frames", i(task.max_gap_frames));
  kv.set("task.prototype_pool", i(task.prototype_pool));
  kv.set("task.train_samples", i(task.train_samples));
  kv.set("task.dev_samples", i(task.dev_samples));
  kv.set("task.test_samples", i(task.test_samples));
  kv.set("task.seed", i(static_cast<long long>(task.seed)));
  kv.set("model.layers", i(encoder.layers));
  kv.set("model.hidden_dim", i(encoder.hidden_dim));
  kv.set("model.context_radius", i(encoder.context_radius));
  kv.set("model.dropout_prob", num(encoder.dropout_prob));
  kv.set("model.layer_drop_prob", num(encoder.layer_drop_prob));
  kv.set("model.downsample_factor", i(encoder.downsample_factor));
  kv.set("augment.warp_factor", i(augment.warp_factor));
  kv.set("augment.num_freq_masks", i(augment.num_freq_masks));
  kv.set("augment.max_freq_mask_width", i(augment.max_freq_mask_width));
  kv.set("augment.num_time_masks", i(augment.num_time_masks));
  kv.set("augment.max_time_mask_width", i(augment.max_time_mask_width));
  kv.set("augment.max_time_mask_fraction", num(augment.max_time_mask_fraction));
  kv.set("augment.time_scale_ratio", num(augment.time_scale_ratio));
  kv.set("augment.cr_time_scale_ratio", num(cr_time_scale_ratio));
  kv.set("augment.freq_scale_ratio", num(augment.freq_scale_ratio));
  kv.set("augment.mask_value", num(augment.mask_value));
  kv.set("cr.alpha", num(cr.alpha));
  kv.set("cr.distance", std::string(to_string(cr.distance)));
  kv.set("cr.target_mode", std::string(to_string(cr.target_mode)));
  kv.set("cr.frame_filter", std::string(to_string(cr.frame_filter)));
  kv.set("cr.normalize_by_frames", cr.normalize_by_frames ? "true" : "false");
  kv.set("sr.beta", num(sr.beta));
  kv.set("sr.kernel", num(sr.kernel[0]) + "," + num(sr.kernel[1]) + "," + num(sr.kernel[2]));
  kv.set("train.objective", std::string(to_string(train.objective)));
  kv.set("train.epochs", i(train.epochs));
  kv.set("train.batch_size", i(train.batch_size));
  kv.set("train.fair_cost", train.fair_cost ? "true" : "false");
  kv.set("train.lr", num(train.lr));
  kv.set("train.grad_clip", num(train.grad_clip));
  kv.set("train.prefix_beam", i(train.prefix_beam));
  kv.set("train.seed", i(static_cast<long long>(train.seed)));
  return kv;
}

EncoderConfig ExperimentConfig::resolved_encoder() const {
  EncoderConfig e = encoder;
  e.input_dim = task.feature_dim;
  e.num_classes = task.vocab_size + 1;
  return e;
}

SpecAugmentConfig ExperimentConfig::objective_augment() const {
  SpecAugmentConfig a = augment;
  if (train.objective == Objective::kCrCtc) a.time_scale_ratio = cr_time_scale_ratio;
  return a;
}

void ExperimentConfig::validate() const {
  task.validate();
  resolved_encoder().validate();
  augment.validate();
  objective_augment().validate();
  cr.validate();
  sr.validate();
  train.validate();
}

// Training -------------------------------------------------------------------

namespace {

enum Stream : std::uint64_t {
  kInitStream = 1,
  kShuffleStream = 2,
  kAugmentStream = 3,
  kDropoutStream = 4,
};

struct SampleGradient {
  double loss = 0;
  ParameterSet grads;
};

std::optional<SampleGradient> ctc_sample(const ExperimentConfig& cfg,
                                         const EncoderConfig& enc,
                                         const ParameterSet& params,
                                         const Sample& s, const Vocabulary& vocab,
                                         Rng& aug_rng, std::uint64_t drop_seed) {
  const SpecAugmentConfig aug = cfg.objective_augment();
  const AugmentedView view = augment_single(s.features, aug, aug_rng);
  const ForwardPass fp = forward(enc, params, view.features, Mode::kTrain, drop_seed);
  if (cfg.train.objective == Objective::kSrCtc) {
    const auto b = sr_total_loss(fp.logits, s.labels, vocab, cfg.sr);
    if (!b) return std::nullopt;
    return SampleGradient{b->loss, backward(enc, params, fp.tape, b->grad)};
  }
  const auto r = ctc_loss(softmax_rows(fp.logits), s.labels, vocab);
  if (!r.feasible) return std::nullopt;
  const auto b = ctc_grad(fp.logits, s.labels, vocab);
  return SampleGradient{b.loss, backward(enc, params, fp.tape, b.grad)};
}

std::optional<SampleGradient> cr_sample(const ExperimentConfig& cfg,
                                        const EncoderConfig& enc,
                                        const ParameterSet& params,
                                        const Sample& s, const Vocabulary& vocab,
                                        Rng& aug_rng, std::uint64_t seed_a,
                                        std::uint64_t seed_b) {
  const auto [va, vb] = make_views(s.features, cfg.objective_augment(), aug_rng);
  const ForwardPass fa = forward(enc, params, va.features, Mode::kTrain, seed_a);
  const ForwardPass fb = forward(enc, params, vb.features, Mode::kTrain, seed_b);
  const auto b = total_loss(fa.logits, fb.logits,
                            downsample_mask(va.time_masked, enc.downsample_factor),
                            downsample_mask(vb.time_masked, enc.downsample_factor),
                            s.labels, vocab, cfg.cr);
  if (!b) return std::nullopt;
  SampleGradient out{b->loss, backward(enc, params, fa.tape, b->grad_a)};
  out.grads += backward(enc, params, fb.tape, b->grad_b);
  return out;
}

}  // namespace

TrainResult train_model(const ExperimentConfig& cfg, const Dataset& data,
                        const ProgressFn& progress) {
  cfg.validate();
  if (data.vocab_size != cfg.task.vocab_size || data.feature_dim != cfg.task.feature_dim) {
    throw InvalidInput("dataset shape does not match task config");
  }
  if (data.train.empty()) throw InvalidInput("empty training split");

  const Vocabulary vocab(cfg.task.vocab_size);
  const std::uint64_t seed = cfg.train.seed;
  TrainResult result;
  result.encoder = cfg.resolved_encoder();
  const EncoderConfig& enc = result.encoder;
  result.params = init_parameters(enc, derive_seed(seed, kInitStream));

  AdamState adam;
  const AdamHyper hyper{cfg.train.lr};
  const int epochs = cfg.train.effective_epochs();
  const int batch = cfg.train.effective_batch_size();
  const auto n = static_cast<int>(data.train.size());
  std::vector<int> order(n);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(seed, kShuffleStream, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0;
    long long epoch_count = 0;
    for (int start = 0; start < n; start += batch) {
      ParameterSet grads = result.params.zeros_like();
      int used = 0;
      for (int i = start; i < std::min(n, start + batch); ++i) {
        const int idx = order[i];
        const Sample& s = data.train[idx];
        Rng aug_rng(derive_seed(seed, kAugmentStream, epoch, idx));
        const std::uint64_t seed_a = derive_seed(seed, kDropoutStream, epoch, 2ULL * idx);
        const std::uint64_t seed_b = derive_seed(seed, kDropoutStream, epoch, 2ULL * idx + 1);
        const auto g =
            cfg.train.objective == Objective::kCrCtc
                ? cr_sample(cfg, enc, result.params, s, vocab, aug_rng, seed_a, seed_b)
                : ctc_sample(cfg, enc, result.params, s, vocab, aug_rng, seed_a);
        if (!g) {
          ++result.skipped_samples;
          continue;
        }
        grads += g->grads;
        epoch_loss += g->loss;
        ++epoch_count;
        ++used;
      }
      if (used == 0) continue;
      grads *= 1.0 / used;
      if (cfg.train.grad_clip > 0) {
        const double norm = std::sqrt(grads.squared_norm());
        if (norm > cfg.train.grad_clip) grads *= cfg.train.grad_clip / norm;
      }
      adam_step(result.params, grads, hyper, adam);
      ++result.steps;
    }
    const double mean = epoch_count ? epoch_loss / epoch_count : 0.0;
    result.loss_curve.push_back(mean);
    if (progress) progress(epoch, mean);
  }
  return result;
}

EvalResult evaluate_model(const EncoderConfig& enc, const ParameterSet& params,
                          const std::vector<Sample>& samples, int vocab_size,
                          int beam) {
  const Vocabulary vocab(vocab_size);
  EvalResult out;
  double edits_greedy = 0, edits_prefix = 0, ref_len = 0;
  for (const auto& s : samples) {
    const auto z = softmax_rows(forward(enc, params, s.features, Mode::kEval).logits);
    const auto g = greedy_decode(z, vocab);
    edits_greedy += edit_distance(g.labels, s.labels);
    if (beam > 0) edits_prefix += edit_distance(prefix_beam_decode(z, vocab, beam), s.labels);
    ref_len += std::max(1, s.labels.size());
    out.peaks += peak_stats(z, vocab);
    ++out.samples;
  }
  if (ref_len > 0) {
    out.ter_greedy = edits_greedy / ref_len;
    out.ter_prefix = beam > 0 ? edits_prefix / ref_len : 0.0;
  }
  return out;
}

// Run records ----------------------------------------------------------------

bool RunRecord::same_outcome(const RunRecord& o) const {
  auto eval_eq = [](const EvalResult& a, const EvalResult& b) {
    return a.ter_greedy == b.ter_greedy && a.ter_prefix == b.ter_prefix &&
           a.samples == b.samples && a.peaks.nonblank_frames == b.peaks.nonblank_frames &&
           a.peaks.nonblank_emissions == b.peaks.nonblank_emissions &&
           a.peaks.blank_frames == b.peaks.blank_frames &&
           a.peaks.blank_prob_sum == b.peaks.blank_prob_sum &&
           a.peaks.nonblank_prob_sum == b.peaks.nonblank_prob_sum;
  };
  return config.entries() == o.config.entries() && objective == o.objective &&
         variant == o.variant && seed == o.seed && loss_curve == o.loss_curve &&
         steps == o.steps && skipped_samples == o.skipped_samples &&
         eval_eq(dev, o.dev) && eval_eq(test, o.test);
}

namespace {

using nlohmann::json;

json eval_to_json(const EvalResult& e) {
  return json{{"ter_greedy", e.ter_greedy},
              {"ter_prefix", e.ter_prefix},
              {"samples", e.samples},
              {"peak",
               {{"mean_nonblank_duration", e.peaks.mean_nonblank_duration()},
                {"mean_blank_emit_prob", e.peaks.mean_blank_emit_prob()},
                {"mean_nonblank_emit_prob", e.peaks.mean_nonblank_emit_prob()},
                {"nonblank_frames", e.peaks.nonblank_frames},
                {"nonblank_emissions", e.peaks.nonblank_emissions},
                {"blank_frames", e.peaks.blank_frames},
                {"blank_prob_sum", e.peaks.blank_prob_sum},
                {"nonblank_prob_sum", e.peaks.nonblank_prob_sum}}}};
}

EvalResult eval_from_json(const json& j) {
  EvalResult e;
  e.ter_greedy = j.at("ter_greedy").get<double>();
  e.ter_prefix = j.at("ter_prefix").get<double>();
  e.samples = j.at("samples").get<int>();
  const json& p = j.at("peak");
  e.peaks.nonblank_frames = p.at("nonblank_frames").get<double>();
  e.peaks.nonblank_emissions = p.at("nonblank_emissions").get<double>();
  e.peaks.blank_frames = p.at("blank_frames").get<double>();
  e.peaks.blank_prob_sum = p.at("blank_prob_sum").get<double>();
  e.peaks.nonblank_prob_sum = p.at("nonblank_prob_sum").get<double>();
  return e;
}

}  // namespace

std::string run_record_to_json(const RunRecord& r) {
  json j;
  j["config"] = r.config.entries();
  j["objective"] = r.objective;
  j["variant"] = r.variant;
  j["seed"] = r.seed;
  j["loss_curve"] = r.loss_curve;
  j["steps"] = r.steps;
  j["skipped_samples"] = r.skipped_samples;
  j["dev"] = eval_to_json(r.dev);
  j["test"] = eval_to_json(r.test);
  j["wall_clock_seconds"] = r.wall_clock_seconds;
  return j.dump(2);
}

RunRecord run_record_from_json(const std::string& text) {
  RunRecord r;
  try {
    const json j = json::parse(text);
    for (const auto& [k, v] : j.at("config").items()) r.config.set(k, v.get<std::string>());
    r.objective = j.at("objective").get<std::string>();
    r.variant = j.at("variant").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.loss_curve = j.at("loss_curve").get<std::vector<double>>();
    r.steps = j.at("steps").get<long long>();
    r.skipped_samples = j.at("skipped_samples").get<long long>();
    r.dev = eval_from_json(j.at("dev"));
    r.test = eval_from_json(j.at("test"));
    r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed run record: ") + e.what());
  }
  return r;
}

void save_run_record(const std::string& path, const RunRecord& r) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot open " + path + " for writing");
  os << run_record_to_json(r) << '\n';
}

RunRecord load_run_record(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot open run record " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return run_record_from_json(ss.str());
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg,
                                const std::optional<Dataset>& data,
                                const ProgressFn& progress) {
  const auto start = std::chrono::steady_clock::now();
  const Dataset generated = data ? Dataset{} : generate_dataset(cfg.task);
  const Dataset& d = data ? *data : generated;

  ExperimentOutput out;
  out.trained = train_model(cfg, d, progress);
  RunRecord& r = out.record;
  r.config = cfg.to_kv();
  r.objective = std::string(to_string(cfg.train.objective));
  r.variant = r.objective;
  r.seed = cfg.train.seed;
  r.loss_curve = out.trained.loss_curve;
  r.steps = out.trained.steps;
  r.skipped_samples = out.trained.skipped_samples;
  r.dev = evaluate_model(out.trained.encoder, out.trained.params, d.dev, d.vocab_size,
                         cfg.train.prefix_beam);
  r.test = evaluate_model(out.trained.encoder, out.trained.params, d.test, d.vocab_size,
                          cfg.train.prefix_beam);
  r.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

// Sweeps ---------------------------------------------------------------------

namespace {

ExperimentConfig with_seed(ExperimentConfig c, std::uint64_t seed) {
  c.task.seed = seed;
  c.train.seed = seed;
  return c;
}

ExperimentConfig objective(ExperimentConfig c, Objective o) {
  c.train.objective = o;
  return c;
}

std::vector<std::pair<std::string, ExperimentConfig>> main_variants(
    const ExperimentConfig& base) {
  return {{"ctc", objective(base, Objective::kCtc)},
          {"cr_ctc", objective(base, Objective::kCrCtc)},
          {"sr_ctc", objective(base, Objective::kSrCtc)}};
}

std::vector<std::pair<std::string, ExperimentConfig>> ablation_variants(
    const ExperimentConfig& base) {
  std::vector<std::pair<std::string, ExperimentConfig>> v;
  const ExperimentConfig cr = objective(base, Objective::kCrCtc);
  {
    auto c = objective(base, Objective::kCtc);
    c.augment.time_scale_ratio = base.cr_time_scale_ratio;
    v.emplace_back("ctc_larger_time_masking", c);
  }
  {
    auto c = cr;
    c.cr_time_scale_ratio = 1.0;
    v.emplace_back("cr_no_larger_time_masking", c);
  }
  {
    auto c = cr;
    c.cr_time_scale_ratio = 1.0;
    c.augment.freq_scale_ratio = 2.5;
    v.emplace_back("cr_no_larger_time_masking_larger_freq_masking", c);
  }
  {
    auto c = cr;
    c.cr.distance = Distance::kHardLabelCe;
    v.emplace_back("cr_hard_label_ce", c);
  }
  {
    auto c = cr;
    c.cr.target_mode = TargetMode::kFlowGradient;
    v.emplace_back("cr_no_sg", c);
  }
  {
    auto c = cr;
    c.cr.frame_filter = FrameFilter::kExcludeSelfMasked;
    v.emplace_back("cr_exclude_self_masked", c);
  }
  {
    auto c = cr;
    c.cr.frame_filter = FrameFilter::kExcludeSelfUnmasked;
    v.emplace_back("cr_exclude_self_unmasked", c);
  }
  return v;
}

std::vector<std::pair<std::string, ExperimentConfig>> alpha_mask_variants(
    const ExperimentConfig& base) {
  std::vector<std::pair<std::string, ExperimentConfig>> v;
  const ExperimentConfig cr = objective(base, Objective::kCrCtc);
  for (double alpha : {0.1, 0.2, 0.3}) {
    auto c = cr;
    c.cr.alpha = alpha;
    std::ostringstream name;
    name << "cr_alpha_" << alpha;
    v.emplace_back(name.str(), c);
  }
  for (double scale : {1.0, 1.5, 2.0, 2.5, 3.0}) {
    auto c = cr;
    c.cr_time_scale_ratio = scale;
    std::ostringstream name;
    name << "cr_time_mask_x" << scale;
    v.emplace_back(name.str(), c);
  }
  return v;
}

}  // namespace

std::vector<SweepCell> make_grid(const std::string& name,
                                 const ExperimentConfig& base,
                                 const std::vector<std::uint64_t>& seeds) {
  std::vector<std::pair<std::string, ExperimentConfig>> variants;
  auto append = [&](const auto& more) {
    variants.insert(variants.end(), more.begin(), more.end());
  };
  if (name == "main") {
    append(main_variants(base));
  } else if (name == "ablation") {
    append(main_variants(base));
    append(ablation_variants(base));
  } else if (name == "alpha_mask") {
    append(alpha_mask_variants(base));
  } else if (name == "all") {
    append(main_variants(base));
    append(ablation_variants(base));
    append(alpha_mask_variants(base));
  } else {
    throw InvalidInput("unknown grid '" + name + "' (main|ablation|alpha_mask|all)");
  }
  std::vector<SweepCell> cells;
  for (std::uint64_t seed : seeds) {
    for (const auto& [variant, cfg] : variants) {
      cells.push_back({variant, with_seed(cfg, seed)});
    }
  }
  return cells;
}

std::vector<RunRecord> run_sweep(const std::vector<SweepCell>& cells, int jobs,
                                 const std::function<void(const RunRecord&)>& on_done) {
  std::vector<RunRecord> records(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex done_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      RunRecord r = run_experiment(cells[i].config).record;
      r.variant = cells[i].variant;
      records[i] = r;
      if (on_done) {
        std::lock_guard lock(done_mutex);
        on_done(records[i]);
      }
    }
  };
  jobs = std::max(1, jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return records;
}

const char* sweep_csv_header() {
  return "variant,objective,seed,alpha,cr_time_scale_ratio,freq_scale_ratio,"
         "distance,target_mode,frame_filter,dev_ter_greedy,test_ter_greedy,"
         "test_ter_prefix,nonblank_duration,blank_emit_prob,nonblank_emit_prob,"
         "final_train_loss,wall_clock_seconds";
}

std::string sweep_csv_row(const RunRecord& r) {
  std::ostringstream os;
  os << std::setprecision(8);
  const auto& kv = r.config;
  os << r.variant << ',' << r.objective << ',' << r.seed << ','
     << kv.get_string("cr.alpha", "") << ','
     << kv.get_string("augment.cr_time_scale_ratio", "") << ','
     << kv.get_string("augment.freq_scale_ratio", "") << ','
     << kv.get_string("cr.distance", "") << ',' << kv.get_string("cr.target_mode", "")
     << ',' << kv.get_string("cr.frame_filter", "") << ',' << r.dev.ter_greedy << ','
     << r.test.ter_greedy << ',' << r.test.ter_prefix << ','
     << r.test.peaks.mean_nonblank_duration() << ','
     << r.test.peaks.mean_blank_emit_prob() << ','
     << r.test.peaks.mean_nonblank_emit_prob() << ','
     << (r.loss_curve.empty() ? 0.0 : r.loss_curve.back()) << ','
     << r.wall_clock_seconds;
  return os.str();
}

std::string sweep_summary_csv(const std::vector<RunRecord>& records) {
  struct Acc {
    int runs = 0;
    double greedy = 0, prefix = 0, dur = 0, blank = 0, nonblank = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> acc;
  for (const auto& r : records) {
    if (!acc.count(r.variant)) order.push_back(r.variant);
    Acc& a = acc[r.variant];
    ++a.runs;
    a.greedy += r.test.ter_greedy;
    a.prefix += r.test.ter_prefix;
    a.dur += r.test.peaks.mean_nonblank_duration();
    a.blank += r.test.peaks.mean_blank_emit_prob();
    a.nonblank += r.test.peaks.mean_nonblank_emit_prob();
  }
  std::ostringstream os;
  os << std::setprecision(6);
  os << "variant,runs,test_ter_greedy,test_ter_prefix,nonblank_duration,"
        "blank_emit_prob,nonblank_emit_prob\n";
  for (const auto& v : order) {
    const Acc& a = acc[v];
    os << v << ',' << a.runs << ',' << a.greedy / a.runs << ',' << a.prefix / a.runs
       << ',' << a.dur / a.runs << ',' << a.blank / a.runs << ','
       << a.nonblank / a.runs << '\n';
  }
  return os.str();
}

}  // namespace crctc
