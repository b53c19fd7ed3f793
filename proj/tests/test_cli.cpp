#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "crctc/experiment.hpp"
#include "crctc/lattice_io.hpp"

namespace fs = std::filesystem;
using namespace crctc;

namespace {

struct Result {
  int code;
  std::string out;
};

Result run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " CRCTC_CLI_PATH " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = pclose(pipe);
  return {WEXITSTATUS(status), out};
}

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / "crctc_cli_test";
  fs::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
  const auto path = scratch() / name;
  std::ofstream(path) << text;
  return path.string();
}

const char* kTinyRun =
    " --set task.train_samples=8 --set task.dev_samples=3 --set task.test_samples=3"
    " --set model.hidden_dim=6 --set model.layers=1 --set train.epochs=1";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("decode a lattice greedily and with prefix search") {
  const auto path = write_file("one_hot.lat",
                               "4 3\n-inf 0 -inf\n-inf 0 -inf\n0 -inf -inf\n-inf -inf 0\n");
  auto r = run("decode --lattice " + path);
  CHECK(r.code == 0);
  CHECK(r.out == "a b\n");
  r = run("decode --lattice " + path + " --method prefix --beam 8");
  CHECK(r.code == 0);
  CHECK(r.out == "a b\n");
}

TEST_CASE("analyze prints a stats row and plot data") {
  const auto lat = write_file("analyze.lat", "2 2\n-inf 0\n0 -inf\n");
  const auto plot = (scratch() / "plot.csv").string();
  const auto r = run("analyze --lattice " + lat + " --plot-data " + plot);
  CHECK(r.code == 0);
  CHECK(r.out.find("1,1,1,1,1,1") != std::string::npos);
  std::ifstream in(plot);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "frame,token_index,token,kind,prob\n0,1,a,token,1\n1,0,<blank>,blank,1\n");
}

TEST_CASE("exit codes") {
  CHECK(run("decode --lattice /nonexistent/file").code == 1);
  CHECK(run("no-such-command").code == 1);
  CHECK(run("train --set train.nope=1").code == 1);
  const auto bad = write_file("bad.lat", "1 2\n0 0\n");
  CHECK(run("decode --lattice " + bad).code == 1);
  CHECK(run("gradcheck --coords 2").code == 0);
}

TEST_CASE("gen-data honours the output directory variable") {
  const auto dir = scratch() / "outdir";
  fs::remove_all(dir);
  const auto r = run(std::string("gen-data --out d.txt --seed 3") + kTinyRun,
                     "CRCTC_OUTPUT_DIR=" + dir.string());
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "d.txt"));
  CHECK(load_dataset((dir / "d.txt").string()).train.size() == 8);
}

TEST_CASE("train, save, evaluate") {
  const auto dir = scratch();
  const auto ckpt = (dir / "m.ckpt").string(), record = (dir / "r.json").string();
  const auto data = (dir / "train_data.txt").string();
  REQUIRE(run(std::string("gen-data --out ") + data + kTinyRun).code == 0);
  auto r = run(std::string("train --quiet --data ") + data + " --save " + ckpt + " --record " +
               record + kTinyRun);
  CHECK(r.code == 0);
  CHECK(r.out.find("test ter_greedy=") != std::string::npos);
  CHECK(load_run_record(record).loss_curve.size() == 1);
  r = run("evaluate --load " + ckpt + " --data " + data + " --split dev");
  CHECK(r.code == 0);
  CHECK(r.out.rfind("dev ter_greedy=", 0) == 0);
}

TEST_CASE("config file plus overrides") {
  const auto cfg = write_file("run.cfg", "train.objective = sr_ctc\ntrain.epochs = 1\n");
  const auto record = (scratch() / "sr.json").string();
  const auto r = run("train --quiet --config " + cfg + " --record " + record + kTinyRun +
                     " --set sr.beta=0.1");
  CHECK(r.code == 0);
  const auto rec = load_run_record(record);
  CHECK(rec.objective == "sr_ctc");
  CHECK(rec.config.get_double("sr.beta", 0) == 0.1);
}

}
