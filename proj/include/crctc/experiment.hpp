#pragma once

// Training and evaluation harness: CTC, CR-CTC and SR-CTC objectives on the
// synthetic task, run records, and ablation grids.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "crctc/config.hpp"
#include "crctc/dataset.hpp"
#include "crctc/model.hpp"
#include "crctc/peakedness.hpp"
#include "crctc/smooth.hpp"

namespace crctc {

enum class Objective { kCtc, kCrCtc, kSrCtc };

std::string_view to_string(Objective o);
Objective parse_objective(std::string_view s);

struct TrainConfig {
  Objective objective = Objective::kCtc;
  // Epochs and batch size of the CTC recipe. With fair_cost the CR-CTC run
  // uses half of each, since every step runs two forward passes.
  int epochs = 40;
  int batch_size = 16;
  bool fair_cost = true;
  double lr = 2e-3;
  double grad_clip = 5.0;  // global L2 norm; <= 0 disables
  int prefix_beam = 4;
  std::uint64_t seed = 1;

  int effective_epochs() const;
  int effective_batch_size() const;
  void validate() const;
};

struct ExperimentConfig {
  SyntheticTaskConfig task;
  EncoderConfig encoder;
  // Baseline SpecAugment (time_scale_ratio normally 1.0).
  SpecAugmentConfig augment;
  // Time-masking scale used for the CR-CTC views.
  double cr_time_scale_ratio = 2.5;
  CrConfig cr;
  SrConfig sr;
  TrainConfig train;

  // Desk-scale preset: a small noisy task with silence gaps, 2x output
  // downsampling, long training, and SpecAugment widths rescaled to
  // ~100-frame utterances with 16 feature bins.
  static ExperimentConfig defaults();
  // Defaults overridden by any keys present in kv; unknown keys are rejected.
  static ExperimentConfig from_kv(const KeyValueConfig& kv);
  KeyValueConfig to_kv() const;
  static const std::vector<std::string>& known_keys();

  // Encoder config with input/output sizes filled in from the task.
  EncoderConfig resolved_encoder() const;
  // The SpecAugment settings the configured objective trains with.
  SpecAugmentConfig objective_augment() const;
  void validate() const;
};

struct TrainResult {
  EncoderConfig encoder;
  ParameterSet params;
  std::vector<double> loss_curve;  // mean training loss per epoch
  long long steps = 0;
  long long skipped_samples = 0;
};

using ProgressFn = std::function<void(int epoch, double loss)>;

TrainResult train_model(const ExperimentConfig& cfg, const Dataset& data,
                        const ProgressFn& progress = {});

struct EvalResult {
  double ter_greedy = 0;
  double ter_prefix = 0;
  PeakStats peaks;  // pooled over the split, greedy alignments
  int samples = 0;
};

// beam <= 0 skips prefix search (ter_prefix left at 0).
EvalResult evaluate_model(const EncoderConfig& enc, const ParameterSet& params,
                          const std::vector<Sample>& samples, int vocab_size,
                          int beam);

struct RunRecord {
  KeyValueConfig config;
  std::string objective;
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<double> loss_curve;
  long long steps = 0;
  long long skipped_samples = 0;
  EvalResult dev;
  EvalResult test;
  double wall_clock_seconds = 0;

  // Everything except wall-clock time.
  bool same_outcome(const RunRecord& other) const;
};

std::string run_record_to_json(const RunRecord& r);
RunRecord run_record_from_json(const std::string& text);
void save_run_record(const std::string& path, const RunRecord& r);
RunRecord load_run_record(const std::string& path);

struct ExperimentOutput {
  RunRecord record;
  TrainResult trained;
};

// Trains on `data` (generated from cfg.task when absent) and evaluates on
// dev and test with greedy and prefix search.
ExperimentOutput run_experiment(const ExperimentConfig& cfg,
                                const std::optional<Dataset>& data = std::nullopt,
                                const ProgressFn& progress = {});

// Sweeps ---------------------------------------------------------------------

struct SweepCell {
  std::string variant;
  ExperimentConfig config;
};

// Named variants (one per seed):
//   main        ctc, cr_ctc, sr_ctc
//   ablation    self-distillation and masked-prediction variants
//   alpha_mask  alpha in {0.1, 0.2, 0.3}, time-mask scale in {1, 1.5, 2, 2.5, 3}
//   all         union of the above without duplicates
std::vector<SweepCell> make_grid(const std::string& name,
                                 const ExperimentConfig& base,
                                 const std::vector<std::uint64_t>& seeds);

// Cells run on up to `jobs` threads; results keep the input order.
std::vector<RunRecord> run_sweep(const std::vector<SweepCell>& cells, int jobs,
                                 const std::function<void(const RunRecord&)>& on_done = {});

const char* sweep_csv_header();
std::string sweep_csv_row(const RunRecord& r);

// Per-variant means over seeds:
//   variant,runs,test_ter_greedy,test_ter_prefix,nonblank_duration,
//   blank_emit_prob,nonblank_emit_prob
std::string sweep_summary_csv(const std::vector<RunRecord>& records);

}  // namespace crctc
