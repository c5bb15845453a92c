#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(NSSM_UNC_CLI_PATH) + " " + args + " 2>&1";
  std::array<char, 4096> buf;
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) out += buf.data();
  const int status = pclose(pipe);
  RunResult r;
  r.output = out;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("nssm_unc_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Configuration small enough for a full generate->report pass in seconds.
std::string write_tiny_config(const fs::path& dir) {
  const fs::path cfg_path = dir / "experiment.ini";
  std::ofstream out(cfg_path);
  out << "[data]\n"
         "n_train = 600\n"
         "n_test = 600\n"
         "[model]\n"
         "n_x = 2\n"
         "n_hidden = 3\n"
         "[train]\n"
         "subseq_len = 64\n"
         "washout = 16\n"
         "batch_size = 32\n"
         "epochs_adam = 2\n"
         "epochs_refine = 1\n"
         "lbfgs_iters_per_epoch = 3\n"
         "[paths]\n"
         "out_dir = "
      << (dir / "run").string() << "\n";
  return cfg_path.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("usage errors: no subcommand, unknown subcommand") {
  CHECK(run_cli("").exit_code != 0);
  CHECK(run_cli("frobnicate").exit_code != 0);
}

TEST_CASE("missing config file yields the missing_config error line") {
  const RunResult r = run_cli("generate --config /does/not/exist.ini");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("error: missing_config:") != std::string::npos);
}

TEST_CASE("running a stage before its inputs exist names the missing artifact") {
  TempDir tmp;
  const std::string cfg = write_tiny_config(tmp.path);
  const RunResult r = run_cli("evaluate --config " + cfg);
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("error: missing_artifact:") != std::string::npos);
  CHECK(r.output.find("train") != std::string::npos);  // hints at the missing stage
}

TEST_CASE("config errors are reported with file and line") {
  TempDir tmp;
  const fs::path bad = tmp.path / "bad.ini";
  {
    std::ofstream out(bad);
    out << "[data]\nn_samples = 5\n";  // unknown key
  }
  const RunResult r = run_cli("generate --config " + bad.string());
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("error: config_error:") != std::string::npos);
  CHECK(r.output.find("bad.ini:2") != std::string::npos);
}

TEST_CASE("full pipeline via the CLI, then reruns and determinism") {
  TempDir tmp;
  const std::string cfg = write_tiny_config(tmp.path);

  for (const char* stage : {"generate", "train", "laplace", "evaluate"}) {
    const RunResult r = run_cli(std::string(stage) + " --config " + cfg);
    CHECK(r.exit_code == 0);
  }
  const RunResult rep = run_cli("report --config " + cfg);
  CHECK(rep.exit_code == 0);
  CHECK(rep.output.find("signal1") != std::string::npos);
  CHECK(rep.output.find("signal4") != std::string::npos);

  // Re-running generate is byte-identical: downstream artifacts stay valid.
  const std::string train_before = slurp(tmp.path / "run" / "train.csv");
  CHECK(run_cli("generate --config " + cfg).exit_code == 0);
  CHECK(slurp(tmp.path / "run" / "train.csv") == train_before);
  CHECK(run_cli("laplace --config " + cfg).exit_code == 0);

  // A different seed invalidates the previously trained model.
  const RunResult stale = run_cli("laplace --config " + cfg + " --seed 99");
  CHECK(stale.exit_code == 1);
  CHECK(stale.output.find("error: stale_artifact:") != std::string::npos);
}
