#include "usddps/json_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "usddps/errors.hpp"

namespace usddps {

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw InvalidInput(std::string(what) + ": expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw InvalidInput(std::string(what) + ": unknown key '" + key + "'");
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("bad value for '") + key + "': " + e.what());
  }
}

const char* to_string(FcpGradient g) {
  return g == FcpGradient::kStopThrough ? "stop_through" : "differentiate";
}

const char* to_string(InitMode m) {
  switch (m) {
    case InitMode::kWpe: return "wpe";
    case InitMode::kMixture: return "mixture";
    case InitMode::kZero: return "zero";
  }
  return "wpe";
}

}  // namespace

Json to_json(const SceneSpec& spec) {
  Json j;
  j["n_channels"] = spec.n_channels;
  j["t60"] = spec.t60;
  j["direct_delays"] = spec.direct_delays;
  if (std::isfinite(spec.snr_db))
    j["snr_db"] = spec.snr_db;
  else
    j["snr_db"] = "inf";
  j["seed"] = spec.seed;
  j["rir_kind"] = to_string(spec.rir_kind);
  j["sample_rate"] = spec.sample_rate;
  j["n_bands"] = spec.n_bands;
  return j;
}

SceneSpec scene_spec_from_json(const Json& j) try {
  reject_unknown(j, {"n_channels", "t60", "direct_delays", "snr_db", "seed", "rir_kind",
                     "sample_rate", "n_bands"},
                 "scene spec");
  SceneSpec s;
  read(j, "n_channels", s.n_channels);
  read(j, "t60", s.t60);
  read(j, "direct_delays", s.direct_delays);
  if (j.contains("snr_db") && j["snr_db"].is_string()) {
    if (j["snr_db"] != "inf") throw InvalidInput("snr_db: expected a number or \"inf\"");
    s.snr_db = std::numeric_limits<double>::infinity();
  } else {
    read(j, "snr_db", s.snr_db);
  }
  read(j, "seed", s.seed);
  if (j.contains("rir_kind")) s.rir_kind = parse_rir_kind(j["rir_kind"].get<std::string>());
  read(j, "sample_rate", s.sample_rate);
  read(j, "n_bands", s.n_bands);
  s.validate();
  return s;
} catch (const nlohmann::json::exception& e) {
  throw InvalidInput(std::string("scene spec: ") + e.what());
}

Json to_json(const SamplerConfig& c) {
  Json j;
  j["mode"] = to_string(c.mode);
  j["n_steps"] = c.n_steps;
  j["sigma_max"] = c.sigma_max;
  j["sigma_min"] = c.sigma_min;
  j["rho"] = c.rho;
  j["zeta"] = c.zeta;
  j["lambda_prime"] = c.lambda_prime;
  j["n_its"] = c.n_its;
  j["rescale_std"] = c.rescale_std;
  j["seed"] = c.seed;
  j["rir_frames"] = c.rir_frames;
  j["rir_bands"] = c.rir_bands;
  j["projection_oversample"] = c.projection_oversample;
  j["adam"] = {{"lr_magnitude", c.adam.lr_magnitude}, {"lr_phase", c.adam.lr_phase},
               {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}};
  j["regularizer"] = {{"rho", c.regularizer.rho}, {"alpha_max", c.regularizer.alpha_max}};
  j["fcp_taps"] = c.fcp_taps;
  j["fcp_epsilon"] = c.fcp_epsilon;
  j["fcp_gradient"] = to_string(c.fcp_gradient);
  j["stft"] = {{"fft_size", c.stft.fft_size()}, {"hop_size", c.stft.hop_size()}};
  if (c.wpe_taps)
    j["wpe_taps"] = *c.wpe_taps;
  else
    j["wpe_taps"] = nullptr;
  j["wpe_delay"] = c.wpe_delay;
  j["wpe_iterations"] = c.wpe_iterations;
  j["init"] = to_string(c.init);
  j["segment_max_seconds"] = c.segment_max_seconds;
  return j;
}

void apply_json(const Json& j, SamplerConfig& c) try {
  reject_unknown(j, {"mode", "n_steps", "sigma_max", "sigma_min", "rho", "zeta",
                     "lambda_prime", "n_its", "rescale_std", "seed", "rir_frames",
                     "rir_bands", "projection_oversample", "adam", "regularizer", "fcp_taps", "fcp_epsilon",
                     "fcp_gradient", "stft", "wpe_taps", "wpe_delay", "wpe_iterations",
                     "init", "segment_max_seconds"},
                 "sampler config");
  if (j.contains("mode")) c.mode = parse_guidance_mode(j["mode"].get<std::string>());
  read(j, "n_steps", c.n_steps);
  read(j, "sigma_max", c.sigma_max);
  read(j, "sigma_min", c.sigma_min);
  read(j, "rho", c.rho);
  read(j, "zeta", c.zeta);
  read(j, "lambda_prime", c.lambda_prime);
  read(j, "n_its", c.n_its);
  read(j, "rescale_std", c.rescale_std);
  read(j, "seed", c.seed);
  read(j, "rir_frames", c.rir_frames);
  read(j, "rir_bands", c.rir_bands);
  read(j, "projection_oversample", c.projection_oversample);
  if (j.contains("adam")) {
    const Json& a = j["adam"];
    reject_unknown(a, {"lr_magnitude", "lr_phase", "beta1", "beta2", "eps"}, "adam");
    read(a, "lr_magnitude", c.adam.lr_magnitude);
    read(a, "lr_phase", c.adam.lr_phase);
    read(a, "beta1", c.adam.beta1);
    read(a, "beta2", c.adam.beta2);
    read(a, "eps", c.adam.eps);
  }
  if (j.contains("regularizer")) {
    const Json& r = j["regularizer"];
    reject_unknown(r, {"rho", "alpha_max"}, "regularizer");
    read(r, "rho", c.regularizer.rho);
    read(r, "alpha_max", c.regularizer.alpha_max);
  }
  read(j, "fcp_taps", c.fcp_taps);
  read(j, "fcp_epsilon", c.fcp_epsilon);
  if (j.contains("fcp_gradient")) {
    const std::string g = j["fcp_gradient"].get<std::string>();
    if (g == "stop_through")
      c.fcp_gradient = FcpGradient::kStopThrough;
    else if (g == "differentiate")
      c.fcp_gradient = FcpGradient::kDifferentiate;
    else
      throw InvalidInput("fcp_gradient: expected stop_through or differentiate");
  }
  if (j.contains("stft")) {
    const Json& s = j["stft"];
    reject_unknown(s, {"fft_size", "hop_size"}, "stft");
    int fft = c.stft.fft_size(), hop = c.stft.hop_size();
    read(s, "fft_size", fft);
    read(s, "hop_size", hop);
    c.stft = StftConfig::sqrt_hann(fft, hop);
  }
  if (j.contains("wpe_taps")) {
    if (j["wpe_taps"].is_null())
      c.wpe_taps.reset();
    else {
      int taps = 0;
      read(j, "wpe_taps", taps);
      c.wpe_taps = taps;
    }
  }
  read(j, "wpe_delay", c.wpe_delay);
  read(j, "wpe_iterations", c.wpe_iterations);
  if (j.contains("init")) {
    const std::string m = j["init"].get<std::string>();
    if (m == "wpe")
      c.init = InitMode::kWpe;
    else if (m == "mixture")
      c.init = InitMode::kMixture;
    else if (m == "zero")
      c.init = InitMode::kZero;
    else
      throw InvalidInput("init: expected wpe, mixture or zero");
  }
  read(j, "segment_max_seconds", c.segment_max_seconds);
} catch (const nlohmann::json::exception& e) {
  throw InvalidInput(std::string("sampler config: ") + e.what());
}

Json to_json(const StepTrace& t) {
  return {{"step", t.step},
          {"sigma", t.sigma},
          {"score_norm", t.score_norm},
          {"guidance_norm", t.guidance_norm},
          {"guidance_scale", t.guidance_scale},
          {"reference_loss", t.reference_loss},
          {"nonreference_loss", t.nonreference_loss},
          {"rir_objective", t.rir_objective}};
}

Json to_json(const EvalReport& r) {
  return {{"si_sdr", r.si_sdr}, {"si_sdr_best_shift", r.si_sdr_best_shift}, {"lsd", r.lsd}};
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("'" + path + "' is not valid JSON: " + e.what(), e.byte);
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace usddps
