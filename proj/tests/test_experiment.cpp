#include "doctest.h"
#include "crctc/experiment.hpp"

using namespace crctc;

namespace {

ExperimentConfig smoke(Objective o) {
  ExperimentConfig c = ExperimentConfig::defaults();
  c.task.train_samples = 12;
  c.task.dev_samples = 4;
  c.task.test_samples = 4;
  c.encoder.hidden_dim = 8;
  c.encoder.layers = 2;
  c.train.epochs = 2;
  c.train.batch_size = 4;
  c.train.objective = o;
  return c;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("fair-cost rule halves epochs and batch for CR-CTC only") {
  TrainConfig t;
  t.epochs = 40;
  t.batch_size = 16;
  CHECK(t.effective_epochs() == 40);
  t.objective = Objective::kCrCtc;
  CHECK(t.effective_epochs() == 20);
  CHECK(t.effective_batch_size() == 8);
  t.fair_cost = false;
  CHECK(t.effective_epochs() == 40);
  t.objective = Objective::kSrCtc;
  t.fair_cost = true;
  CHECK(t.effective_batch_size() == 16);
}

TEST_CASE("CR-CTC trains with the larger time masking") {
  auto c = ExperimentConfig::defaults();
  CHECK(c.objective_augment().time_scale_ratio == 1.0);
  c.train.objective = Objective::kCrCtc;
  CHECK(c.objective_augment().time_scale_ratio == 2.5);
}

TEST_CASE("config round trips through key value text") {
  auto c = ExperimentConfig::defaults();
  c.cr.alpha = 0.3;
  c.cr.frame_filter = FrameFilter::kExcludeSelfMasked;
  c.sr.kernel = {0.2, 0.6, 0.2};
  c.train.objective = Objective::kSrCtc;
  c.task.noise_std = 0.123456789012345;
  const auto back = ExperimentConfig::from_kv(c.to_kv());
  CHECK(back.to_kv().entries() == c.to_kv().entries());
  CHECK(back.task.noise_std == c.task.noise_std);
}

TEST_CASE("unknown config keys are rejected") {
  KeyValueConfig kv;
  kv.set("train.epoch", "3");
  CHECK_THROWS_AS(ExperimentConfig::from_kv(kv), InvalidInput);
  KeyValueConfig bad;
  bad.set("train.objective", "ctc2");
  CHECK_THROWS_AS(ExperimentConfig::from_kv(bad), InvalidInput);
}

TEST_CASE("every key is documented in the example config") {
  // The example config lists every key; from_kv must accept it unchanged.
  const auto kv = KeyValueConfig::load(CRCTC_SOURCE_DIR "/configs/default.cfg");
  CHECK(kv.unknown_keys(ExperimentConfig::known_keys()).empty());
  CHECK(kv.entries().size() == ExperimentConfig::known_keys().size());
  CHECK(ExperimentConfig::from_kv(kv).to_kv().entries() ==
        ExperimentConfig::defaults().to_kv().entries());
}

TEST_CASE("smoke preset trains in under two minutes") {
  // 200 training samples, 5 epochs, otherwise the default preset.
  for (auto o : {Objective::kCtc, Objective::kCrCtc, Objective::kSrCtc}) {
    ExperimentConfig c = ExperimentConfig::defaults();
    c.task.train_samples = 200;
    c.train.epochs = 5;
    c.train.objective = o;
    const auto out = run_experiment(c);
    CHECK(out.record.wall_clock_seconds < 120.0);
    CHECK(out.record.test.samples == c.task.test_samples);
  }
}

TEST_CASE("seeded runs repeat exactly") {
  for (auto o : {Objective::kCtc, Objective::kCrCtc, Objective::kSrCtc}) {
    const auto a = run_experiment(smoke(o));
    const auto b = run_experiment(smoke(o));
    CHECK(a.record.same_outcome(b.record));
    CHECK(a.trained.params == b.trained.params);
    CHECK(a.record.loss_curve.size() ==
          static_cast<std::size_t>(smoke(o).train.effective_epochs()));
  }
}

TEST_CASE("different seeds give different runs") {
  auto c = smoke(Objective::kCtc);
  const auto a = run_experiment(c);
  c.train.seed = 2;
  const auto b = run_experiment(c);
  CHECK(a.record.loss_curve != b.record.loss_curve);
}

TEST_CASE("run record JSON round trip is lossless") {
  const auto r = run_experiment(smoke(Objective::kCrCtc)).record;
  const auto back = run_record_from_json(run_record_to_json(r));
  CHECK(back.same_outcome(r));
  CHECK(back.wall_clock_seconds == r.wall_clock_seconds);
  CHECK_THROWS_AS(run_record_from_json("{\"config\": 3}"), InvalidInput);
}

TEST_CASE("grids cover the ablation axes") {
  const auto base = ExperimentConfig::defaults();
  CHECK(make_grid("main", base, {1, 2}).size() == 6);
  const auto ablation = make_grid("ablation", base, {1});
  CHECK(ablation.size() == 10);
  bool hard = false, flow = false, masked = false, unmasked = false, freq = false;
  for (const auto& cell : ablation) {
    hard |= cell.config.cr.distance == Distance::kHardLabelCe;
    flow |= cell.config.cr.target_mode == TargetMode::kFlowGradient;
    masked |= cell.config.cr.frame_filter == FrameFilter::kExcludeSelfMasked;
    unmasked |= cell.config.cr.frame_filter == FrameFilter::kExcludeSelfUnmasked;
    freq |= cell.config.augment.freq_scale_ratio > 1;
  }
  CHECK((hard && flow && masked && unmasked && freq));
  const auto alpha_mask = make_grid("alpha_mask", base, {7});
  CHECK(alpha_mask.size() == 8);
  for (const auto& cell : alpha_mask) {
    CHECK(cell.config.train.objective == Objective::kCrCtc);
    CHECK(cell.config.train.seed == 7);
  }
  CHECK(make_grid("all", base, {1}).size() == 18);
  CHECK_THROWS_AS(make_grid("nope", base, {1}), InvalidInput);
}

TEST_CASE("sweep keeps input order and reports every cell") {
  std::vector<SweepCell> cells{{"x", smoke(Objective::kCtc)}, {"y", smoke(Objective::kSrCtc)}};
  int done = 0;
  const auto records = run_sweep(cells, 2, [&](const RunRecord&) { ++done; });
  CHECK(done == 2);
  CHECK(records[0].variant == "x");
  CHECK(records[1].variant == "y");
  const auto summary = sweep_summary_csv(records);
  CHECK(summary.find("\nx,1,") != std::string::npos);
  CHECK(sweep_csv_row(records[0]).rfind("x,ctc,1,", 0) == 0);
}

TEST_CASE("evaluation counts token errors over the whole split") {
  const auto out = run_experiment(smoke(Objective::kCtc));
  CHECK(out.record.test.samples == 4);
  CHECK(out.record.test.ter_greedy >= 0);
  CHECK(out.record.test.peaks.nonblank_frames + out.record.test.peaks.blank_frames > 0);
}

}
