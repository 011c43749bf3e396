#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

#include "acoustiprobe/dataio.hpp"

using namespace acoustiprobe;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "acoustiprobe_cli_test";

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run cli(const std::string& args) {
  const fs::path out = kWork / "stdout.txt";
  const fs::path err = kWork / "stderr.txt";
  const std::string cmd = "cd '" + kWork.string() + "' && '" ACOUSTIPROBE_CLI_PATH "' " + args +
                          " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

double field(const std::string& line, const std::string& key) {
  const std::size_t at = line.find(key + "=");
  REQUIRE(at != std::string::npos);
  return std::stod(line.substr(at + key.size() + 1));
}

struct Workspace {
  Workspace() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

}  // namespace

TEST_CASE_FIXTURE(Workspace, "probe writes the composite WAV and its config") {
  const Run r = cli("probe --kind composite --gap 0.5 --out p.wav");
  REQUIRE(r.code == 0);
  CHECK(read_wav(kWork / "p.wav").size() == 312000);
  CHECK(read_file(kWork / "p.wav.config.txt").find("probe.gap=0.5\n") != std::string::npos);
  REQUIRE(cli("probe --kind single --out s.wav").code == 0);
  CHECK(read_wav(kWork / "s.wav").size() == 48000);
}

TEST_CASE_FIXTURE(Workspace, "usage and pipeline errors are single key=value lines") {
  Run r = cli("");
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error=usage message=", 0) == 0);
  r = cli("probe --kind composite --out p.wav --bogus 1");
  CHECK(r.code == 2);
  r = cli("train --manifest m.csv");
  CHECK(r.code == 2);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

  r = cli("clip --in missing.wav --out-dir c");
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error=io message=", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

  REQUIRE(cli("probe --kind single --out s.wav").code == 0);
  r = cli("clip --in s.wav --out-dir c");
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error=truncated-recording", 0) == 0);

  std::ofstream(kWork / "bad.cfg") << "svr.C=lots\n";
  r = cli("--config bad.cfg probe --kind single --out s.wav");
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error=invalid-input", 0) == 0);
}

TEST_CASE_FIXTURE(Workspace, "synth, clip, extract, train and predict chain together") {
  REQUIRE(cli("--seed 4 synth --cohort custom --groups 18 --fruits 3 --points 1 --out-dir train").code == 0);
  const auto records = read_manifest(kWork / "train" / "manifest.csv");
  CHECK(records.size() == 54);
  CHECK(fs::exists(kWork / "train" / "config.txt"));

  REQUIRE(cli("--seed 5 synth --cohort custom --groups 18 --fruits 1 --points 1 --out-dir held").code == 0);
  const auto held = read_manifest(kWork / "held" / "manifest.csv");
  const LabeledRecord* day10 = nullptr;
  for (const auto& r : held) {
    if (r.storage_days == 10.0) day10 = &r;
  }
  REQUIRE(day10 != nullptr);
  const std::string wav = "held/" + day10->wav_path;

  Run r = cli("clip --in " + wav + " --out-dir clips");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("expsweep,") != std::string::npos);
  for (const char* name : {"single", "expsweep", "linsweep", "multi"}) {
    CHECK(read_wav(kWork / "clips" / (std::string(name) + ".wav")).size() == 48000);
  }

  REQUIRE(cli("extract --in clips/expsweep.wav --feature mfcc --out f.csv").code == 0);
  std::istringstream rows(read_file(kWork / "f.csv"));
  std::string header, row;
  std::getline(rows, header);
  std::getline(rows, row);
  CHECK(std::count(header.begin(), header.end(), ',') == 2 + 20);
  CHECK(row.rfind("expsweep,clip,mfcc,", 0) == 0);

  REQUIRE(cli("--threads 2 train --manifest train/manifest.csv --regressor gbr --probe expsweep "
              "--feature spectrum --target storage_days --out gbr.json").code == 0);
  CHECK(fs::exists(kWork / "gbr.json.config.txt"));

  r = cli("predict --model gbr.json --in " + wav);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("target=storage_days") != std::string::npos);
  const double from_recording = field(r.out, "estimate");
  CHECK(std::abs(from_recording - 10.0) <= 2.0);

  r = cli("predict --model gbr.json --in clips/expsweep.wav");
  REQUIRE(r.code == 0);
  CHECK(field(r.out, "estimate") == from_recording);
}

TEST_CASE_FIXTURE(Workspace, "crossval reports are identical across thread counts") {
  REQUIRE(cli("--seed 8 synth --cohort custom --groups 6 --fruits 3 --points 1 --out-dir ds").code == 0);
  REQUIRE(cli("--threads 1 crossval --manifest ds/manifest.csv --k 3 --seed 7 --out-dir a").code == 0);
  REQUIRE(cli("--threads 3 crossval --manifest ds/manifest.csv --k 3 --seed 7 --out-dir b").code == 0);
  for (const char* name : {"report.csv", "report.txt", "predictions.csv", "config.txt"}) {
    CHECK(read_file(kWork / "a" / name) == read_file(kWork / "b" / name));
  }
  const std::string csv = read_file(kWork / "a" / "report.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 33);
  CHECK(read_file(kWork / "a" / "config.txt").find("seed=7\n") != std::string::npos);
}
