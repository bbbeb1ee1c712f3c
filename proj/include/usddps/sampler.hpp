#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "usddps/audio.hpp"
#include "usddps/prior.hpp"
#include "usddps/rir_model.hpp"
#include "usddps/subband.hpp"

namespace usddps {

enum class GuidanceMode {
  kUsdDps,    // parametric reference RIR, FCP for the other channels
  kMcBuddy,   // parametric RIR for every channel
  kMcFcp,     // FCP for every channel
  kUnguided,  // prior only
};

enum class FcpGradient {
  kStopThrough,    // FCP filters held constant in the likelihood gradient
  kDifferentiate,  // gradient also flows through the FCP solve
};

// Starting point of the trajectory (before adding sigma_max noise).
enum class InitMode { kWpe, kMixture, kZero };

std::string to_string(GuidanceMode mode);
GuidanceMode parse_guidance_mode(const std::string& text);

struct SamplerConfig {
  int n_steps = 200;
  double sigma_max = 0.5;
  double sigma_min = 1e-4;
  double rho = 10.0;
  double zeta = 0.8;
  double lambda_prime = 0.6;
  GuidanceMode mode = GuidanceMode::kUsdDps;
  int n_its = 10;
  double rescale_std = 0.05;  // <= 0 disables rescaling
  std::uint64_t seed = 0;

  int rir_frames = 150;
  int rir_bands = 16;
  // Cepstrum FFT oversampling inside the per-step projection. Lower than the
  // library default: the projection only re-reads the phase here, and it
  // runs n_its times per step.
  int projection_oversample = 4;
  AdamConfig adam;
  RirRegularizer regularizer;

  int fcp_taps = 60;
  double fcp_epsilon = 1e-3;
  FcpGradient fcp_gradient = FcpGradient::kStopThrough;

  StftConfig stft = StftConfig::for_sample_rate(16000);
  std::optional<int> wpe_taps;  // default depends on channel count
  int wpe_delay = 3;
  int wpe_iterations = 3;
  InitMode init = InitMode::kWpe;
  double segment_max_seconds = 10.0;

  void validate() const;
};

// sigma_i = (smax^(1/rho) + i/N (smin^(1/rho) - smax^(1/rho)))^rho, i = 0..N.
std::vector<double> sigma_schedule(const SamplerConfig& cfg);

// x + sigma^2 * score.
Waveform tweedie(const Waveform& x, double sigma, const Waveform& score);

// x - sigma (sigma_next - sigma) (score + guidance).
Waveform guided_step(const Waveform& x, double sigma, double sigma_next,
                     const Waveform& score, const Waveform& guidance);

// zeta sqrt(L) / (tau |G|), or 0 when |G| < 1e-12.
double guidance_scale(double zeta, Eigen::Index length, double tau, double g_norm);

// Relative weight of each channel's likelihood term for a mode.
std::vector<double> channel_weights(GuidanceMode mode, int n_channels,
                                    double lambda_prime);

struct LikelihoodResult {
  double loss = 0.0;               // weighted total
  double reference_loss = 0.0;     // channel 0 term
  double nonreference_loss = 0.0;  // unweighted sum over the other channels
  Waveform gradient;               // d loss / d x0_hat
};

// Compressed-domain mixture-consistency loss and its gradient for one
// mixture. FCP variance weights and compressed targets are computed once.
class LikelihoodModel {
 public:
  LikelihoodModel(const MultiChannelWaveform& y, const StftConfig& cfg,
                  double fcp_epsilon = 1e-3, int fcp_taps = 60);

  int channels() const { return static_cast<int>(mixture_.size()); }
  const StftConfig& config() const { return cfg_; }
  const RealMatrix& fcp_lambda() const { return lambda_; }
  const Spectrogram& mixture(int c) const { return mixture_[c]; }

  // All filters given and held fixed.
  LikelihoodResult evaluate(const Waveform& x0_hat,
                            const std::vector<SubbandFilter>& filters,
                            const std::vector<double>& weights) const;

  // Channels whose entry in `filters` is empty get an FCP filter estimated
  // from x0_hat. The estimated filters are written to `fcp_filters` when
  // non-null.
  LikelihoodResult evaluate(const Waveform& x0_hat,
                            const std::vector<std::optional<SubbandFilter>>& filters,
                            const std::vector<double>& weights, FcpGradient mode,
                            std::vector<SubbandFilter>* used_filters = nullptr) const;

  SubbandFilter fcp_filter(int channel, const Spectrogram& x_hat) const;

 private:
  StftConfig cfg_;
  int fcp_taps_;
  std::vector<Spectrogram> mixture_;
  std::vector<ComplexMatrix> targets_;
  RealMatrix lambda_;
};

// Fixed-filter likelihood for one call; filters[c] applies to channel c.
LikelihoodResult likelihood_and_gradient(const Waveform& x0_hat,
                                         const MultiChannelWaveform& y,
                                         const std::vector<SubbandFilter>& filters,
                                         GuidanceMode mode, double lambda_prime,
                                         const StftConfig& cfg);

struct StepTrace {
  int step = 0;                  // counts down from N to 1
  double sigma = 0.0;
  double score_norm = 0.0;
  double guidance_norm = 0.0;    // |G|, before scaling
  double guidance_scale = 0.0;
  double reference_loss = 0.0;
  double nonreference_loss = 0.0;
  double rir_objective = 0.0;    // reference-channel RIR objective, 0 if none
};

struct DereverbResult {
  Waveform estimate;
  Waveform initialization;  // x_init (WPE output channel 0 by default)
  Waveform start;           // x_N = x_init + sigma_max * noise
  std::vector<StepTrace> traces;
};

using StepCallback = std::function<void(const StepTrace&)>;

// Guided probability-flow sampling for blind dereverberation.
DereverbResult dereverb(const MultiChannelWaveform& y, ScorePrior& prior,
                        const SamplerConfig& cfg, const StepCallback& on_step = {});

}  // namespace usddps
