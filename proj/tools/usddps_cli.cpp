#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "usddps/errors.hpp"
#include "usddps/json_io.hpp"
#include "usddps/metrics.hpp"
#include "usddps/prior.hpp"
#include "usddps/sampler.hpp"
#include "usddps/synth.hpp"
#include "usddps/usdp_protocol.hpp"
#include "usddps/wav.hpp"
#include "usddps/wpe.hpp"

using namespace usddps;

namespace {

constexpr int kExitInput = 1;
constexpr int kExitRuntime = 2;

Waveform read_mono(const std::string& path, const char* role) {
  const MultiChannelWaveform w = read_wav(path);
  if (w.channels() != 1)
    throw InvalidInput(std::string(role) + " '" + path + "' has " +
                       std::to_string(w.channels()) + " channels, expected 1");
  return w.channel(0);
}

struct SynthArgs {
  std::string spec;
  std::string clean;
  double duration = 1.0;
  std::uint64_t surrogate_seed = 0;
  std::string out_dir;
};

int run_synth(const SynthArgs& a) {
  const SceneSpec spec = scene_spec_from_json(read_json_file(a.spec));
  Waveform clean;
  int rate = spec.sample_rate;
  if (!a.clean.empty()) {
    const MultiChannelWaveform w = read_wav(a.clean);
    if (w.channels() != 1) throw InvalidInput("--clean must be a mono WAV");
    if (w.sample_rate() != spec.sample_rate)
      throw InvalidInput("--clean sample rate " + std::to_string(w.sample_rate()) +
                         " differs from the scene's " + std::to_string(spec.sample_rate));
    clean = w.channel(0);
  } else {
    clean = speech_surrogate(static_cast<Eigen::Index>(a.duration * rate), rate,
                             a.surrogate_seed);
  }
  const Scene scene = make_scene(clean, spec);
  std::filesystem::create_directories(a.out_dir);
  const std::filesystem::path dir(a.out_dir);
  write_wav((dir / "y.wav").string(), scene.mixture);
  write_wav((dir / "direct.wav").string(),
            MultiChannelWaveform::from_channels({scene.direct}, rate));
  write_wav((dir / "clean.wav").string(), MultiChannelWaveform::from_channels({clean}, rate));
  Json manifest;
  manifest["spec"] = to_json(spec);
  manifest["length"] = clean.size();
  manifest["files"] = {{"mixture", "y.wav"}, {"direct", "direct.wav"}, {"clean", "clean.wav"}};
  Json rirs = Json::array();
  for (const auto& h : scene.rirs) rirs.push_back({{"length", h.size()}});
  manifest["rirs"] = rirs;
  manifest["mixture_metrics"] = to_json(
      evaluate(scene.mixture.channel(0), scene.direct, StftConfig::for_sample_rate(rate)));
  write_json_file((dir / "manifest.json").string(), manifest);
  return 0;
}

struct WpeArgs {
  std::string in;
  std::optional<int> taps;
  int delay = 3;
  int iterations = 3;
  std::string out;
};

int run_wpe(const WpeArgs& a) {
  const MultiChannelWaveform y = read_wav(a.in);
  WpeConfig cfg;
  cfg.taps = a.taps.value_or(default_wpe_taps(y.channels()));
  cfg.delay = a.delay;
  cfg.iterations = a.iterations;
  cfg.stft = StftConfig::for_sample_rate(y.sample_rate());
  write_wav(a.out, wpe_dereverb(y, cfg));
  return 0;
}

struct DereverbArgs {
  std::string in;
  std::string config;
  std::string prior = "gaussian";
  std::string out;
  std::string trace;
  std::string mode;
  int steps = 0;
  double zeta = 0;
  double lambda_prime = 0;
  int n_its = 0;
  std::uint64_t seed = 0;
  std::string fcp_gradient;
  std::string init;
  std::optional<int> wpe_taps;
};

std::unique_ptr<ScorePrior> make_prior(const std::string& spec, Eigen::Index length,
                                       const SamplerConfig& cfg) {
  if (spec == "gaussian") {
    const double var = cfg.rescale_std > 0.0 ? cfg.rescale_std * cfg.rescale_std : 1.0;
    return std::make_unique<GaussianPrior>(Waveform::Zero(length),
                                           Eigen::VectorXd::Constant(length, var),
                                           GaussianPrior::Covariance::kDiagonal);
  }
  if (spec.rfind("oracle:", 0) == 0) {
    Waveform clean = read_mono(spec.substr(7), "oracle clean signal");
    if (clean.size() != length)
      throw InvalidInput("oracle clean signal has " + std::to_string(clean.size()) +
                         " samples, mixture has " + std::to_string(length));
    return std::make_unique<OracleDenoiserPrior>(std::move(clean));
  }
  if (spec == "remote") return std::make_unique<RemoteScorePrior>(RemoteScorePrior::from_environment());
  if (spec.rfind("remote:", 0) == 0)
    return std::make_unique<RemoteScorePrior>(usdp::Endpoint::parse(spec.substr(7)));
  throw InvalidInput("unknown prior '" + spec +
                     "' (expected gaussian, oracle:PATH, remote or remote:HOST:PORT)");
}

int run_dereverb(const DereverbArgs& a, const CLI::App& cmd) {
  const MultiChannelWaveform y = read_wav(a.in);
  SamplerConfig cfg;
  cfg.stft = StftConfig::for_sample_rate(y.sample_rate());
  if (!a.config.empty()) apply_json(read_json_file(a.config), cfg);
  auto given = [&](const char* name) { return cmd.get_option(name)->count() > 0; };
  if (given("--mode")) cfg.mode = parse_guidance_mode(a.mode);
  if (given("--steps")) cfg.n_steps = a.steps;
  if (given("--zeta")) cfg.zeta = a.zeta;
  if (given("--lambda-prime")) cfg.lambda_prime = a.lambda_prime;
  if (given("--n-its")) cfg.n_its = a.n_its;
  if (given("--seed")) cfg.seed = a.seed;
  if (given("--wpe-taps")) cfg.wpe_taps = a.wpe_taps;
  if (given("--fcp-gradient")) {
    cfg.fcp_gradient = a.fcp_gradient == "differentiate" ? FcpGradient::kDifferentiate
                                                         : FcpGradient::kStopThrough;
  }
  if (given("--init")) {
    cfg.init = a.init == "mixture" ? InitMode::kMixture
               : a.init == "zero"  ? InitMode::kZero
                                   : InitMode::kWpe;
  }
  cfg.validate();
  auto prior = make_prior(a.prior, y.length(), cfg);
  std::ofstream trace;
  if (!a.trace.empty()) {
    trace.open(a.trace);
    if (!trace) throw IoError("cannot write trace '" + a.trace + "'");
  }
  const DereverbResult result = dereverb(y, *prior, cfg, [&](const StepTrace& t) {
    if (trace.is_open()) trace << to_json(t).dump() << '\n';
  });
  write_wav(a.out, MultiChannelWaveform::from_channels({result.estimate}, y.sample_rate()));
  return 0;
}

struct EvalArgs {
  std::string est;
  std::string ref;
  std::string report;
};

int run_eval(const EvalArgs& a) {
  const MultiChannelWaveform est = read_wav(a.est);
  const Waveform ref = read_mono(a.ref, "reference");
  if (est.sample_rate() != read_wav(a.ref).sample_rate())
    throw InvalidInput("estimate and reference sample rates differ");
  const Waveform e = est.channel(0);
  if (e.size() != ref.size())
    throw InvalidInput("estimate has " + std::to_string(e.size()) +
                       " samples, reference has " + std::to_string(ref.size()));
  const Json report = to_json(evaluate(e, ref, StftConfig::for_sample_rate(est.sample_rate())));
  if (a.report.empty())
    std::cout << report.dump(2) << '\n';
  else
    write_json_file(a.report, report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind multi-channel speech dereverberation with diffusion posterior sampling"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Synthesize a reverberant multi-channel scene");
  synth_cmd->add_option("--spec", synth.spec, "Scene spec JSON")->required()->check(CLI::ExistingFile);
  synth_cmd->add_option("--clean", synth.clean, "Mono clean WAV (default: speech surrogate)")
      ->check(CLI::ExistingFile);
  synth_cmd->add_option("--duration", synth.duration, "Surrogate length in seconds")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--surrogate-seed", synth.surrogate_seed, "Surrogate RNG seed");
  synth_cmd->add_option("--out-dir", synth.out_dir, "Output directory")->required();

  WpeArgs wpe;
  auto* wpe_cmd = app.add_subcommand("wpe", "Weighted prediction error dereverberation");
  wpe_cmd->add_option("--in", wpe.in, "Multi-channel input WAV")->required()->check(CLI::ExistingFile);
  wpe_cmd->add_option("--taps", wpe.taps, "Prediction taps (default depends on channels)")
      ->check(CLI::PositiveNumber);
  wpe_cmd->add_option("--delay", wpe.delay, "Prediction delay in frames")->check(CLI::PositiveNumber);
  wpe_cmd->add_option("--iters", wpe.iterations, "Iterations")->check(CLI::PositiveNumber);
  wpe_cmd->add_option("--out", wpe.out, "Output WAV")->required();

  DereverbArgs der;
  auto* der_cmd = app.add_subcommand("dereverb", "Diffusion posterior sampling dereverberation");
  der_cmd->add_option("--in", der.in, "Multi-channel mixture WAV")->required()->check(CLI::ExistingFile);
  der_cmd->add_option("--config", der.config, "Sampler config JSON")->check(CLI::ExistingFile);
  der_cmd->add_option("--mode", der.mode, "usd-dps, mc-buddy, mc-fcp or unguided")
      ->check(CLI::IsMember({"usd-dps", "mc-buddy", "mc-fcp", "unguided", "usd_dps",
                             "mc_buddy", "mc_fcp"}));
  der_cmd->add_option("--prior", der.prior, "gaussian, oracle:CLEAN.wav, remote or remote:HOST:PORT");
  der_cmd->add_option("--steps", der.steps, "Sampling steps N")->check(CLI::PositiveNumber);
  der_cmd->add_option("--zeta", der.zeta, "Guidance scale")->check(CLI::NonNegativeNumber);
  der_cmd->add_option("--lambda-prime", der.lambda_prime, "Non-reference channel weight")
      ->check(CLI::NonNegativeNumber);
  der_cmd->add_option("--n-its", der.n_its, "RIR optimizer iterations per step")
      ->check(CLI::NonNegativeNumber);
  der_cmd->add_option("--seed", der.seed, "RNG seed");
  der_cmd->add_option("--fcp-gradient", der.fcp_gradient, "stop_through or differentiate")
      ->check(CLI::IsMember({"stop_through", "differentiate"}));
  der_cmd->add_option("--init", der.init, "wpe, mixture or zero")
      ->check(CLI::IsMember({"wpe", "mixture", "zero"}));
  der_cmd->add_option("--wpe-taps", der.wpe_taps, "WPE taps for the warm start")
      ->check(CLI::PositiveNumber);
  der_cmd->add_option("--out", der.out, "Output WAV")->required();
  der_cmd->add_option("--trace", der.trace, "Per-step trace (JSON lines)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Compare an estimate with a reference");
  eval_cmd->add_option("--est", ev.est, "Estimate WAV (first channel is used)")
      ->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--ref", ev.ref, "Mono reference WAV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--report", ev.report, "Report JSON (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*synth_cmd) return run_synth(synth);
    if (*wpe_cmd) return run_wpe(wpe);
    if (*der_cmd) return run_dereverb(der, *der_cmd);
    if (*eval_cmd) return run_eval(ev);
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const DegenerateInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitInput;
}
