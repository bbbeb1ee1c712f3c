#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "json.hpp"
#include "usddps/wav.hpp"

namespace fs = std::filesystem;

namespace {

struct Workdir {
  fs::path path;
  Workdir() : path(fs::temp_directory_path() / ("usddps_cli_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Workdir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args) {
  const std::string cmd = std::string(USDDPS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_text(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

}  // namespace

TEST_CASE("synth, wpe, dereverb and eval from the command line") {
  Workdir w;
  write_text(w / "scene.json", R"({"n_channels": 2, "t60": 0.5, "snr_db": 25, "seed": 3})");
  REQUIRE(run("synth --spec " + (w / "scene.json") + " --duration 0.5 --out-dir " + (w / "scene")) == 0);
  for (const char* f : {"y.wav", "direct.wav", "clean.wav", "manifest.json"})
    CHECK(fs::exists(w.path / "scene" / f));
  const auto manifest = nlohmann::json::parse(slurp(w / "scene/manifest.json"));
  CHECK(manifest.contains("mixture_metrics"));
  CHECK(usddps::read_wav(w / "scene/y.wav").channels() == 2);

  CHECK(run("wpe --in " + (w / "scene/y.wav") + " --taps 8 --out " + (w / "wpe.wav")) == 0);
  CHECK(usddps::read_wav(w / "wpe.wav").length() == 8000);

  write_text(w / "cfg.json", R"({"n_its": 2, "rir_frames": 40})");
  const std::string dereverb = "dereverb --in " + (w / "scene/y.wav") + " --config " +
                               (w / "cfg.json") + " --prior oracle:" + (w / "scene/direct.wav") +
                               " --steps 6 --seed 4";
  REQUIRE(run(dereverb + " --out " + (w / "a.wav") + " --trace " + (w / "a.jsonl")) == 0);
  REQUIRE(run(dereverb + " --out " + (w / "b.wav") + " --trace " + (w / "b.jsonl")) == 0);
  CHECK(slurp(w / "a.wav") == slurp(w / "b.wav"));
  CHECK(slurp(w / "a.jsonl") == slurp(w / "b.jsonl"));
  std::istringstream lines(slurp(w / "a.jsonl"));
  int n_lines = 0;
  for (std::string line; std::getline(lines, line); ++n_lines)
    CHECK(nlohmann::json::parse(line)["step"] == 6 - n_lines);
  CHECK(n_lines == 6);

  CHECK(run("dereverb --in " + (w / "scene/y.wav") + " --prior gaussian --mode unguided --steps 3 --out " +
            (w / "g.wav")) == 0);

  REQUIRE(run("eval --est " + (w / "a.wav") + " --ref " + (w / "scene/direct.wav") + " --report " +
              (w / "report.json")) == 0);
  const auto report = nlohmann::json::parse(slurp(w / "report.json"));
  CHECK(report.contains("si_sdr"));
  CHECK(report.contains("si_sdr_best_shift"));
  CHECK(report.contains("lsd"));
}

TEST_CASE("command line errors") {
  Workdir w;
  write_text(w / "scene.json", R"({"n_channels": 1, "seed": 1})");
  REQUIRE(run("synth --spec " + (w / "scene.json") + " --duration 0.3 --out-dir " + (w / "s")) == 0);
  const std::string y = w / "s/y.wav";
  CHECK(run("dereverb --in " + y + " --steps 0 --out " + (w / "o.wav")) == 1);
  CHECK(run("dereverb --in " + (w / "missing.wav") + " --out " + (w / "o.wav")) == 1);
  CHECK(run("dereverb --in " + y + " --mode sideways --out " + (w / "o.wav")) == 1);
  CHECK(run("eval --est " + y) == 1);
  write_text(w / "bad.json", R"({"t60": 9})");
  CHECK(run("synth --spec " + (w / "bad.json") + " --out-dir " + (w / "t")) == 1);
  write_text(w / "cfg.json", R"({"unknown_key": 1})");
  CHECK(run("dereverb --in " + y + " --config " + (w / "cfg.json") + " --out " + (w / "o.wav")) == 1);
  write_text(w / "junk.wav", "RIFF....WAVEjunk");
  CHECK(run("wpe --in " + (w / "junk.wav") + " --out " + (w / "o.wav")) == 1);
  CHECK(run("frobnicate") == 1);
}
