#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(UBPI_CLI_PATH) + " " + args +
                          " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const fs::path kOut = fs::temp_directory_path() / "ubpi_cli_test";

}  // namespace

TEST_CASE("usage errors exit with 2", "[cli]") {
  CHECK(run("") == 2);
  CHECK(run("toy nosuch") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("sweep") == 2);                    // missing csv + profile
  CHECK(run("train data.csv") == 2);           // missing --profile
  CHECK(run("toy wave --loss nasty") == 2);
}

TEST_CASE("runtime errors exit with 1", "[cli]") {
  CHECK(run("train /nonexistent/x.csv --profile /nonexistent/p") == 1);
}

TEST_CASE("toy run writes the artifact set", "[cli]") {
  fs::remove_all(kOut);
  const std::string out = (kOut / "a").string();
  REQUIRE(run("toy wave --epochs 8 --ensemble 2 --n 40 --seed 3 --out " + out) ==
          0);
  const fs::path dir = fs::path(out) / "toy_wave";
  for (const char* name :
       {"plot.svg", "points.csv", "bounds.csv", "report.txt", "report.csv"})
    CHECK(fs::exists(dir / name));
  CHECK(fs::exists(dir / "snapshot" / "manifest.txt"));
  CHECK(fs::exists(dir / "snapshot" / "member_0.txt"));
  CHECK(fs::exists(dir / "snapshot" / "member_1.txt"));
  CHECK(fs::exists(dir / "trace_member_1.csv"));
}

TEST_CASE("toy reruns are byte-identical", "[cli]") {
  fs::remove_all(kOut);
  const std::string args = "toy wave --epochs 6 --ensemble 2 --n 30 --seed 11";
  REQUIRE(run(args + " --out " + (kOut / "r1").string()) == 0);
  REQUIRE(run(args + " --out " + (kOut / "r2").string()) == 0);
  for (const char* rel :
       {"toy_wave/plot.svg", "toy_wave/report.csv",
        "toy_wave/snapshot/member_0.txt", "toy_wave/trace_member_0.csv"})
    CHECK(slurp(kOut / "r1" / rel) == slurp(kOut / "r2" / rel));
}

TEST_CASE("csv pipeline: train, sweep, plot", "[cli]") {
  fs::remove_all(kOut);
  fs::create_directories(kOut);
  const fs::path csv = fs::path(UBPI_FIXTURE_DIR) / "synth_benchmark.csv";
  const fs::path profile = fs::path(UBPI_FIXTURE_DIR) / "synth_benchmark.profile";
  REQUIRE(fs::exists(csv));
  REQUIRE(fs::exists(profile));

  const std::string out = (kOut / "bench").string();
  REQUIRE(run("train " + csv.string() + " --profile " + profile.string() +
              " --epochs 15 --ensemble 2 --batch 32 --out " + out) == 0);
  const fs::path dir = fs::path(out) / "train_synth_benchmark";
  CHECK(fs::exists(dir / "report.csv"));
  CHECK(fs::exists(dir / "snapshot" / "manifest.txt"));

  REQUIRE(run("plot " + csv.string() + " --snapshot " +
              (dir / "snapshot").string() + " --profile " + profile.string() +
              " --range 0:10 --out " + out) == 0);
  CHECK(fs::exists(fs::path(out) / "intervals.svg"));

  // Out-of-range plot indices fail.
  CHECK(run("plot " + csv.string() + " --snapshot " +
            (dir / "snapshot").string() + " --profile " + profile.string() +
            " --range 0:100000 --out " + out) == 1);

  REQUIRE(run("sweep " + csv.string() + " --profile " + profile.string() +
              " --lambdas 5,25 --epochs 10 --ensemble 2 --batch 32 --out " +
              out) == 0);
  const fs::path sdir = fs::path(out) / "sweep_synth_benchmark";
  CHECK(fs::exists(sdir / "sweep.txt"));
  const std::string table = slurp(sdir / "sweep.csv");
  CHECK(table.find("lambda,") == 0);
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);  // header + 2 rows

  CHECK(run("sweep " + csv.string() + " --profile " + profile.string() +
            " --lambdas 5,abc --out " + out) == 2);
}
