#pragma once

#include <Eigen/Core>

#include <random>
#include <vector>

#include "usddps/audio.hpp"
#include "usddps/subband.hpp"

namespace usddps {

// Parametric subband RIR: magnitude from per-band exponential decays
// interpolated in the log domain across frequency, and a free phase.
struct RirParams {
  Eigen::VectorXd log_weights;   // log w_b, one per band
  Eigen::VectorXd decays;        // alpha_b, per frame
  RealMatrix phase;              // n_frames x num_bins, radians
  std::vector<int> band_centers; // frequency bins, strictly increasing, 0 .. K-1

  Eigen::Index n_frames() const { return phase.rows(); }
  Eigen::Index num_bins() const { return phase.cols(); }
  int n_bands() const { return static_cast<int>(band_centers.size()); }

  // Throws InvalidInput when an invariant does not hold.
  void validate() const;
};

// Bin 0 followed by n_bands - 1 centers spaced logarithmically from bin 1 to
// n_bins - 1 (rounded, then bumped so they stay strictly increasing).
std::vector<int> log_band_centers(int n_bands, int n_bins);

// w_b = 0.1, alpha_b = 0.5, phase uniform in (-pi, pi).
RirParams initial_rir_params(int n_bands, int n_frames, int n_bins,
                             std::mt19937_64& rng);

// A_{n,k} = exp(lerp_k(log w_b - alpha_b n)).
RealMatrix synthesize_magnitude(const RirParams& p, Eigen::Index n_bins);

// H = A exp(j phase).
SubbandFilter to_filter(const RirParams& p, const StftConfig& cfg);

// Minimum-phase signal with the same magnitude spectrum as h, via the folded
// real cepstrum. Output has h's length. The cepstrum is computed on an FFT of
// at least oversample * h.size() points; cepstral aliasing falls roughly
// tenfold per doubling (about 1e-5 relative magnitude error at 16 for
// noise-like responses).
inline constexpr int kDefaultCepstrumOversample = 16;
Waveform minimum_phase(const Waveform& h, int oversample = kDefaultCepstrumOversample);

// H <- STFT(P_min(iSTFT(H))); for the reference channel the first sample of
// the minimum-phase response is set to 1 before re-analysis.
SubbandFilter project(const SubbandFilter& h, bool is_reference,
                      int oversample = kDefaultCepstrumOversample);

struct RirGradient {
  Eigen::VectorXd log_weights;
  Eigen::VectorXd decays;
  RealMatrix phase;

  static RirGradient zeros_like(const RirParams& p);
  bool all_finite() const;
};

// R(psi) = rho * sum_b max(-alpha_b, 0)^2, and decays clamped to
// [0, alpha_max] after every optimizer step.
struct RirRegularizer {
  double rho = 1.0;
  double alpha_max = 2.0;

  double value(const RirParams& p) const;
};

// ||S_comp(y) - S_comp(A_psi(x0_hat))||^2 + R(psi) for fixed (x0_hat, y),
// with the STFT of x0_hat and the compressed target cached.
class RirProblem {
 public:
  RirProblem(const Waveform& x0_hat, const Waveform& y, const StftConfig& cfg,
             RirRegularizer reg = {});

  // Objective value; fills `grad` with the exact gradient when non-null.
  double evaluate(const RirParams& p, RirGradient* grad) const;

  const StftConfig& config() const { return cfg_; }
  const RirRegularizer& regularizer() const { return reg_; }

 private:
  StftConfig cfg_;
  RirRegularizer reg_;
  Spectrogram source_;
  ComplexMatrix target_;
};

struct RirObjective {
  double value;
  RirGradient gradient;
};

RirObjective rir_objective(const RirParams& p, const Waveform& x0_hat,
                           const Waveform& y_ref, const StftConfig& cfg,
                           const RirRegularizer& reg = {});

struct AdamConfig {
  double lr_magnitude = 0.1;  // log weights and decays
  double lr_phase = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  RirGradient first_moment;
  RirGradient second_moment;
  long step_count = 0;

  static AdamState for_params(const RirParams& p, AdamConfig config = {});
  // One bias-corrected Adam descent step on p.
  void step(RirParams& p, const RirGradient& g);
};

enum class EstimateStatus { kOk, kNonFiniteGradient };

struct RirEstimate {
  RirParams params;
  std::vector<double> objective_trace;  // objective before each step
  EstimateStatus status = EstimateStatus::kOk;
};

// n_its rounds of (Adam step, clamp decays, project the filter and re-read
// the phase from it). Magnitude parameters are not touched by projection.
RirEstimate estimate_rir(const RirParams& p_init, const RirProblem& problem,
                         int n_its, AdamState& adam, bool is_reference = true,
                         int oversample = kDefaultCepstrumOversample);

RirEstimate estimate_rir(const RirParams& p_init, const Waveform& x0_hat,
                         const Waveform& y_ref, const StftConfig& cfg, int n_its,
                         AdamState& adam, bool is_reference = true);

}  // namespace usddps
