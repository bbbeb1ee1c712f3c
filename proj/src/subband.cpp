#include "usddps/subband.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "usddps/errors.hpp"

namespace usddps {
namespace {

void check_bins(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b)
    throw ShapeError(std::string(what) + ": bin count " + std::to_string(a) +
                     " does not match " + std::to_string(b));
}

// y += h * x over K interleaved complex values.
inline void mac(double* __restrict y, const double* __restrict h,
                const double* __restrict x, Eigen::Index k) {
  for (Eigen::Index i = 0; i < 2 * k; i += 2) {
    y[i] += h[i] * x[i] - h[i + 1] * x[i + 1];
    y[i + 1] += h[i] * x[i + 1] + h[i + 1] * x[i];
  }
}

// y += conj(h) * x.
inline void mac_conj(double* __restrict y, const double* __restrict h,
                     const double* __restrict x, Eigen::Index k) {
  for (Eigen::Index i = 0; i < 2 * k; i += 2) {
    y[i] += h[i] * x[i] + h[i + 1] * x[i + 1];
    y[i + 1] += h[i] * x[i + 1] - h[i + 1] * x[i];
  }
}

inline double* raw(ComplexMatrix& m, Eigen::Index row) {
  return reinterpret_cast<double*>(m.row(row).data());
}
inline const double* raw(const ComplexMatrix& m, Eigen::Index row) {
  return reinterpret_cast<const double*>(m.row(row).data());
}

}  // namespace

SubbandFilter SubbandFilter::identity(const StftConfig& cfg, Eigen::Index n_taps) {
  SubbandFilter h{ComplexMatrix::Zero(n_taps, cfg.num_bins()), cfg};
  h.taps.row(0).setOnes();
  return h;
}

Spectrogram subband_convolve(const Spectrogram& x, const SubbandFilter& h) {
  check_bins(x.num_bins(), h.num_bins(), "subband_convolve");
  const Eigen::Index frames = x.frames();
  const Eigen::Index k = x.num_bins();
  Spectrogram y{ComplexMatrix::Zero(frames, k), x.config, x.signal_length};
  for (Eigen::Index m = 0; m < frames; ++m) {
    const Eigen::Index last = std::min(h.n_taps() - 1, m);
    for (Eigen::Index n = 0; n <= last; ++n)
      mac(raw(y.bins, m), raw(h.taps, n), raw(x.bins, m - n), k);
  }
  return y;
}

Spectrogram subband_convolve_adjoint(const Spectrogram& g, const SubbandFilter& h) {
  check_bins(g.num_bins(), h.num_bins(), "subband_convolve_adjoint");
  const Eigen::Index frames = g.frames();
  const Eigen::Index k = g.num_bins();
  Spectrogram out{ComplexMatrix::Zero(frames, k), g.config, g.signal_length};
  for (Eigen::Index m = 0; m < frames; ++m) {
    const Eigen::Index last = std::min(h.n_taps() - 1, frames - 1 - m);
    for (Eigen::Index n = 0; n <= last; ++n)
      mac_conj(raw(out.bins, m), raw(h.taps, n), raw(g.bins, m + n), k);
  }
  return out;
}

ComplexMatrix subband_filter_gradient(const Spectrogram& g, const Spectrogram& x,
                                      Eigen::Index n_taps) {
  check_bins(g.num_bins(), x.num_bins(), "subband_filter_gradient");
  if (g.frames() != x.frames())
    throw ShapeError("subband_filter_gradient: frame count mismatch");
  const Eigen::Index frames = g.frames();
  const Eigen::Index k = g.num_bins();
  ComplexMatrix out = ComplexMatrix::Zero(n_taps, k);
  for (Eigen::Index n = 0; n < std::min(n_taps, frames); ++n) {
    for (Eigen::Index m = n; m < frames; ++m)
      mac_conj(raw(out, n), raw(x.bins, m - n), raw(g.bins, m), k);
  }
  return out;
}

Waveform apply_operator(const Waveform& x, const SubbandFilter& h) {
  return istft(subband_convolve(stft(x, h.config), h));
}

RealMatrix fcp_weights(const std::vector<Spectrogram>& y, double epsilon) {
  if (y.empty()) throw InvalidInput("fcp_weights: no channels");
  if (!(epsilon > 0.0)) throw InvalidInput("fcp_weights: epsilon must be positive");
  const Eigen::Index frames = y[0].frames();
  const Eigen::Index k = y[0].num_bins();
  RealMatrix energy = RealMatrix::Zero(frames, k);
  for (const auto& s : y) {
    if (s.frames() != frames || s.num_bins() != k)
      throw ShapeError("fcp_weights: channel spectrograms differ in shape");
    energy += s.bins.cwiseAbs2();
  }
  energy /= static_cast<double>(y.size());
  const double peak = energy.maxCoeff();
  if (!(peak > 0.0)) throw DegenerateInput("fcp_weights: mixture is all zeros");
  return energy.array() + epsilon * peak;
}

FcpSolution::FcpSolution(const Spectrogram& y, const Spectrogram& x_hat,
                         const RealMatrix& lambda, int n_taps, bool keep_factors)
    : FcpSolution(std::move(solve_channels({&y}, x_hat, lambda, n_taps, keep_factors)[0])) {}

std::vector<FcpSolution> FcpSolution::solve_channels(const std::vector<const Spectrogram*>& y,
                                                     const Spectrogram& x_hat,
                                                     const RealMatrix& lambda, int n_taps,
                                                     bool keep_factors) {
  if (n_taps < 1) throw InvalidInput("fcp: n_taps must be >= 1");
  if (y.empty()) throw InvalidInput("fcp: no mixture channels");
  const Eigen::Index frames = x_hat.frames();
  const Eigen::Index k_bins = x_hat.num_bins();
  for (const Spectrogram* yc : y) {
    check_bins(yc->num_bins(), k_bins, "fcp");
    if (yc->frames() != frames) throw ShapeError("fcp: mixture and source frame counts differ");
  }
  if (lambda.rows() != frames || lambda.cols() != k_bins)
    throw ShapeError("fcp: mixture, source and weight shapes differ");
  if (!(lambda.minCoeff() > 0.0))
    throw InvalidInput("fcp: weights must be strictly positive");

  const auto n_channels = static_cast<Eigen::Index>(y.size());
  auto factors = std::make_shared<Factors>();
  if (keep_factors) factors->llt.resize(k_bins);
  factors->solved.assign(k_bins, 0);
  std::vector<ComplexMatrix> taps(n_channels, ComplexMatrix::Zero(n_taps, k_bins));

  Eigen::MatrixXcd design(frames, n_taps);
  Eigen::MatrixXcd target(frames, n_channels);
  Eigen::MatrixXcd normal(n_taps, n_taps);
  Eigen::LLT<Eigen::MatrixXcd> llt;
  for (Eigen::Index k = 0; k < k_bins; ++k) {
    for (Eigen::Index m = 0; m < frames; ++m) {
      const double s = 1.0 / std::sqrt(lambda(m, k));
      for (Eigen::Index c = 0; c < n_channels; ++c) target(m, c) = s * y[c]->bins(m, k);
      for (Eigen::Index n = 0; n < n_taps; ++n)
        design(m, n) = m >= n ? s * x_hat.bins(m - n, k) : Complex(0.0);
    }
    normal.setZero();
    normal.selfadjointView<Eigen::Lower>().rankUpdate(design.adjoint());
    const double trace = normal.diagonal().real().sum();
    if (!(trace > 0.0)) continue;  // no source energy in this bin
    normal.diagonal().array() += 1e-10 * trace / n_taps;
    llt.compute(normal.selfadjointView<Eigen::Lower>());
    if (llt.info() != Eigen::Success) continue;
    const Eigen::MatrixXcd solved = llt.solve(design.adjoint() * target);
    for (Eigen::Index c = 0; c < n_channels; ++c) taps[c].col(k) = solved.col(c);
    factors->solved[k] = 1;
    if (keep_factors) factors->llt[k] = llt;
  }

  std::vector<FcpSolution> out;
  out.reserve(n_channels);
  for (Eigen::Index c = 0; c < n_channels; ++c)
    out.push_back(FcpSolution({std::move(taps[c]), y[c]->config}, factors));
  return out;
}

Spectrogram FcpSolution::input_gradient(const Spectrogram& y,
                                        const Spectrogram& x_hat,
                                        const RealMatrix& lambda,
                                        const ComplexMatrix& filter_grad) const {
  if (factors_->llt.empty())
    throw InvalidInput("fcp: input_gradient needs a solution built with keep_factors");
  const Eigen::Index frames = y.frames();
  const Eigen::Index n_taps = filter_.n_taps();
  Spectrogram out{ComplexMatrix::Zero(frames, y.num_bins()), x_hat.config,
                  x_hat.signal_length};
  Eigen::VectorXcd residual(frames), response(frames);
  for (Eigen::Index k = 0; k < y.num_bins(); ++k) {
    if (!factors_->solved[k]) continue;
    const Eigen::VectorXcd h = filter_.taps.col(k);
    const Eigen::VectorXcd v = factors_->llt[k].solve(filter_grad.col(k));
    for (Eigen::Index m = 0; m < frames; ++m) {
      Complex pred = 0.0, resp = 0.0;
      for (Eigen::Index n = 0; n <= std::min(n_taps - 1, m); ++n) {
        pred += h[n] * x_hat.bins(m - n, k);
        resp += v[n] * x_hat.bins(m - n, k);
      }
      const double w = 1.0 / lambda(m, k);
      residual[m] = w * (y.bins(m, k) - pred);
      response[m] = w * resp;
    }
    // d/dX_{j} collects the design entries X_{m-n} with m - n = j.
    for (Eigen::Index j = 0; j < frames; ++j) {
      Complex acc = 0.0;
      for (Eigen::Index n = 0; n < std::min(n_taps, frames - j); ++n)
        acc += residual[j + n] * std::conj(v[n]) - response[j + n] * std::conj(h[n]);
      out.bins(j, k) = acc;
    }
  }
  return out;
}

SubbandFilter fcp_estimate(const Spectrogram& y, const Spectrogram& x_hat,
                           const RealMatrix& lambda, int n_taps) {
  return FcpSolution(y, x_hat, lambda, n_taps, false).filter();
}

}  // namespace usddps
