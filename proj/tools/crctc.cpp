// Command-line front end: dataset generation, training, evaluation, lattice
// decoding/analysis, gradient checks and sweeps.
//
// Exit codes: 0 success, 1 invalid input, 2 capacity or infeasible target,
// 3 a gradient check failed.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crctc/experiment.hpp"
#include "crctc/gradcheck.hpp"
#include "crctc/lattice_io.hpp"

namespace fs = std::filesystem;
using namespace crctc;

namespace {

constexpr const char* kOutputDirEnv = "CRCTC_OUTPUT_DIR";

// Relative output paths land under $CRCTC_OUTPUT_DIR when it is set.
std::string output_path(const std::string& path) {
  const char* dir = std::getenv(kOutputDirEnv);
  if (!dir || !*dir || fs::path(path).is_absolute()) return path;
  fs::create_directories(dir);
  return (fs::path(dir) / path).string();
}

struct ConfigArgs {
  std::string file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "key = value config file");
    app->add_option("--set", overrides, "override a config key (key=value)")
        ->allow_extra_args(false);
    app->add_option("--seed", seed, "seed for both data generation and training");
  }

  ExperimentConfig resolve() const {
    KeyValueConfig kv = file.empty() ? KeyValueConfig{} : KeyValueConfig::load(file);
    for (const auto& a : overrides) kv.set_assignment(a);
    if (seed) {
      kv.set("task.seed", std::to_string(*seed));
      kv.set("train.seed", std::to_string(*seed));
    }
    return ExperimentConfig::from_kv(kv);
  }
};

std::string join_labels(const LabelSequence& y, const Vocabulary& vocab) {
  std::string out;
  for (int i = 0; i < y.size(); ++i) {
    if (i) out += ' ';
    out += vocab.name(y[i]);
  }
  return out;
}

void print_eval(const char* split, const EvalResult& e) {
  std::cout << std::setprecision(6) << split << " ter_greedy=" << e.ter_greedy
            << " ter_prefix=" << e.ter_prefix << " samples=" << e.samples << '\n';
  std::cout << peak_stats_csv_header() << '\n';
  write_peak_stats_csv_row(std::cout, e.peaks);
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw InvalidInput("");
    } catch (const std::exception&) {
      throw InvalidInput("bad seed '" + item + "'");
    }
  }
  if (seeds.empty()) throw InvalidInput("--seeds needs at least one seed");
  return seeds;
}

int run(int argc, char** argv) {
  CLI::App app{"Consistency-regularized CTC toolkit"};
  app.require_subcommand(1);

  // gen-data
  ConfigArgs gen_cfg;
  std::string gen_out = "dataset.txt";
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  gen_cfg.attach(gen);
  gen->add_option("--out", gen_out, "dataset path");

  // train
  ConfigArgs train_cfg;
  std::string train_data, train_save, train_record, train_objective;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "train one model and evaluate it");
  train_cfg.attach(train);
  train->add_option("--objective", train_objective, "ctc | cr_ctc | sr_ctc");
  train->add_option("--data", train_data, "dataset file (generated from the config if absent)");
  train->add_option("--save", train_save, "write a parameter checkpoint");
  train->add_option("--record", train_record, "write the run record as JSON");
  train->add_flag("--quiet", quiet, "no per-epoch progress");

  // evaluate
  std::string eval_load, eval_data, eval_split = "test";
  ConfigArgs eval_cfg;
  int eval_beam = 4;
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint");
  eval_cfg.attach(evaluate);
  evaluate->add_option("--load", eval_load, "checkpoint")->required();
  evaluate->add_option("--data", eval_data, "dataset file (generated from the config if absent)");
  evaluate->add_option("--split", eval_split, "train | dev | test")
      ->check(CLI::IsMember({"train", "dev", "test"}));
  evaluate->add_option("--beam", eval_beam, "prefix search beam (0 skips)");

  // decode
  std::string dec_lattice, dec_method = "greedy";
  int dec_beam = 4;
  auto* decode = app.add_subcommand("decode", "decode a serialized lattice");
  decode->add_option("--lattice", dec_lattice, "lattice file")->required();
  decode->add_option("--method", dec_method, "greedy | prefix")
      ->check(CLI::IsMember({"greedy", "prefix"}));
  decode->add_option("--beam", dec_beam, "prefix search beam width");

  // analyze
  std::string an_lattice, an_plot;
  auto* analyze = app.add_subcommand("analyze", "peakedness statistics of a lattice");
  analyze->add_option("--lattice", an_lattice, "lattice file")->required();
  analyze->add_option("--plot-data", an_plot, "write per-frame series CSV");

  // gradcheck
  GradCheckOptions gc;
  double gc_tol = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  gradcheck->add_option("--seed", gc.seed, "instance seed");
  gradcheck->add_option("--coords", gc.coordinates, "probed coordinates per check");
  gradcheck->add_option("--step", gc.step, "central difference step");
  gradcheck->add_option("--tol", gc_tol, "max relative error");

  // sweep
  ConfigArgs sweep_cfg;
  std::string sweep_grid = "main", sweep_seeds = "1,2,3,4,5", sweep_out = "sweep";
  int sweep_jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "run a grid of variants over seeds");
  sweep_cfg.attach(sweep);
  sweep->add_option("--grid", sweep_grid, "main | ablation | alpha_mask | all");
  sweep->add_option("--seeds", sweep_seeds, "comma-separated seeds");
  sweep->add_option("--jobs", sweep_jobs, "concurrent cells");
  sweep->add_option("--out", sweep_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  if (*gen) {
    const ExperimentConfig cfg = gen_cfg.resolve();
    const std::string path = output_path(gen_out);
    save_dataset(path, generate_dataset(cfg.task));
    std::cout << "wrote " << path << '\n';
    return 0;
  }

  if (*train) {
    ExperimentConfig cfg = train_cfg.resolve();
    if (!train_objective.empty()) cfg.train.objective = parse_objective(train_objective);
    cfg.validate();
    std::optional<Dataset> data;
    if (!train_data.empty()) data = load_dataset(train_data);
    ProgressFn progress;
    if (!quiet) {
      progress = [](int epoch, double loss) {
        std::cerr << "epoch " << epoch + 1 << " loss " << loss << '\n';
      };
    }
    const ExperimentOutput out = run_experiment(cfg, data, progress);
    if (out.record.skipped_samples > 0) {
      std::cerr << "warning: skipped " << out.record.skipped_samples
                << " infeasible samples\n";
    }
    print_eval("dev", out.record.dev);
    print_eval("test", out.record.test);
    if (!train_save.empty()) {
      save_checkpoint(output_path(train_save), out.trained.encoder, out.trained.params);
    }
    if (!train_record.empty()) save_run_record(output_path(train_record), out.record);
    return 0;
  }

  if (*evaluate) {
    const auto [enc, params] = load_checkpoint(eval_load);
    const ExperimentConfig cfg = eval_cfg.resolve();
    const Dataset data = eval_data.empty() ? generate_dataset(cfg.task) : load_dataset(eval_data);
    if (data.feature_dim != enc.input_dim || data.vocab_size + 1 != enc.num_classes) {
      throw InvalidInput("checkpoint does not match the dataset shape");
    }
    const auto& samples =
        eval_split == "train" ? data.train : eval_split == "dev" ? data.dev : data.test;
    print_eval(eval_split.c_str(), evaluate_model(enc, params, samples, data.vocab_size, eval_beam));
    return 0;
  }

  if (*decode) {
    const auto z = load_lattice(dec_lattice);
    const Vocabulary vocab(z.classes() - 1);
    const LabelSequence y = dec_method == "greedy" ? greedy_decode(z, vocab).labels
                                                   : prefix_beam_decode(z, vocab, dec_beam);
    std::cout << join_labels(y, vocab) << '\n';
    return 0;
  }

  if (*analyze) {
    const auto z = load_lattice(an_lattice);
    const Vocabulary vocab(z.classes() - 1);
    std::cout << peak_stats_csv_header() << '\n';
    write_peak_stats_csv_row(std::cout, peak_stats(z, vocab));
    if (!an_plot.empty()) {
      std::ofstream os(output_path(an_plot));
      if (!os) throw InvalidInput("cannot open " + an_plot + " for writing");
      emit_plot_data(os, z, vocab);
    }
    return 0;
  }

  if (*gradcheck) {
    bool ok = true;
    std::cout << "check,coordinates,max_rel_error,max_abs_error,status\n";
    for (const auto& r : run_gradchecks(gc)) {
      const bool pass = r.passed(gc_tol);
      ok = ok && pass;
      std::cout << r.name << ',' << r.coordinates << ',' << std::scientific
                << std::setprecision(3) << r.max_rel_error << ',' << r.max_abs_error
                << std::defaultfloat << ',' << (pass ? "PASS" : "FAIL") << '\n';
    }
    return ok ? 0 : 3;
  }

  if (*sweep) {
    const ExperimentConfig base = sweep_cfg.resolve();
    const auto cells = make_grid(sweep_grid, base, parse_seeds(sweep_seeds));
    const fs::path dir = output_path(sweep_out);
    fs::create_directories(dir / "runs");
    std::ofstream rows(dir / "runs.csv");
    rows << sweep_csv_header() << '\n';
    const auto records = run_sweep(cells, sweep_jobs, [&](const RunRecord& r) {
      rows << sweep_csv_row(r) << '\n' << std::flush;
      save_run_record((dir / "runs" / (r.variant + "_seed" + std::to_string(r.seed) + ".json")).string(), r);
      std::cerr << "done " << r.variant << " seed " << r.seed << " test_ter "
                << r.test.ter_greedy << '\n';
    });
    std::ofstream summary(dir / "summary.csv");
    summary << sweep_summary_csv(records);
    std::cout << sweep_summary_csv(records);
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CapacityError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const InfeasibleTarget& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
