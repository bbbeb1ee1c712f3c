#pragma once

#include <memory>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "usddps/audio.hpp"

namespace usddps {

// Per-frequency FIR filter acting along STFT frames: taps(n, k) is H_{n,k}.
struct SubbandFilter {
  ComplexMatrix taps;
  StftConfig config;

  Eigen::Index n_taps() const { return taps.rows(); }
  Eigen::Index num_bins() const { return taps.cols(); }

  static SubbandFilter identity(const StftConfig& cfg, Eigen::Index n_taps = 1);
};

// Y_{m,k} = sum_n H_{n,k} X_{m-n,k}. Causal, frames before 0 are zero, and
// the output keeps the input's frame count.
Spectrogram subband_convolve(const Spectrogram& x, const SubbandFilter& h);

// Adjoint of subband_convolve in X for fixed H (real inner product).
Spectrogram subband_convolve_adjoint(const Spectrogram& g, const SubbandFilter& h);

// Gradient with respect to the taps of <G, subband_convolve(X, H)>:
// dH_{n,k} = sum_m G_{m,k} conj(X_{m-n,k}).
ComplexMatrix subband_filter_gradient(const Spectrogram& g, const Spectrogram& x,
                                      Eigen::Index n_taps);

// istft(subband_convolve(stft(x), h)); output length equals input length.
Waveform apply_operator(const Waveform& x, const SubbandFilter& h);

// Channel-independent FCP variance estimate
//   lambda_{m,k} = mean_c |Y^c_{m,k}|^2 + epsilon * max_{m,k} mean_c |Y^c_{m,k}|^2.
RealMatrix fcp_weights(const std::vector<Spectrogram>& y, double epsilon);

// Weighted least-squares fit of a subband filter predicting y from x_hat:
// per frequency k, minimizes sum_m |Y_{m,k} - sum_n H_{n,k} X_{m-n,k}|^2 /
// lambda_{m,k}. Solved through the n_taps x n_taps normal equations with a
// 1e-10 * trace / n_taps diagonal load.
class FcpSolution {
 public:
  FcpSolution(const Spectrogram& y, const Spectrogram& x_hat,
              const RealMatrix& lambda, int n_taps, bool keep_factors);

  // One solution per mixture channel. The normal matrix depends only on
  // x_hat and lambda, so it is factored once per frequency and shared.
  static std::vector<FcpSolution> solve_channels(const std::vector<const Spectrogram*>& y,
                                                 const Spectrogram& x_hat,
                                                 const RealMatrix& lambda, int n_taps,
                                                 bool keep_factors);

  const SubbandFilter& filter() const { return filter_; }

  // Backpropagates a gradient on the estimated taps to the source
  // spectrogram x_hat (differentiating through the linear solve). Requires
  // keep_factors.
  Spectrogram input_gradient(const Spectrogram& y, const Spectrogram& x_hat,
                             const RealMatrix& lambda,
                             const ComplexMatrix& filter_grad) const;

 private:
  struct Factors {
    std::vector<Eigen::LLT<Eigen::MatrixXcd>> llt;  // empty unless kept
    std::vector<char> solved;
  };

  FcpSolution(SubbandFilter filter, std::shared_ptr<const Factors> factors)
      : filter_(std::move(filter)), factors_(std::move(factors)) {}

  SubbandFilter filter_;
  std::shared_ptr<const Factors> factors_;
};

SubbandFilter fcp_estimate(const Spectrogram& y, const Spectrogram& x_hat,
                           const RealMatrix& lambda, int n_taps);

}  // namespace usddps
