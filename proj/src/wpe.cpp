#include "usddps/wpe.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <string>

#include "usddps/errors.hpp"

namespace usddps {

void WpeConfig::validate() const {
  if (taps < 1) throw InvalidInput("WPE taps must be >= 1");
  if (delay < 1) throw InvalidInput("WPE delay must be >= 1");
  if (iterations < 1) throw InvalidInput("WPE iterations must be >= 1");
  if (!(variance_floor > 0.0)) throw InvalidInput("WPE variance floor must be positive");
}

int default_wpe_taps(int n_channels) {
  if (n_channels <= 1) return 37;
  if (n_channels == 2) return 20;
  if (n_channels <= 4) return 10;
  return 5;
}

MultiChannelWaveform wpe_dereverb(const MultiChannelWaveform& y,
                                  const WpeConfig& cfg) {
  cfg.validate();
  const int hop = cfg.stft.hop_size();
  const Eigen::Index min_length =
      static_cast<Eigen::Index>(cfg.taps + cfg.delay + 1) * hop;
  if (y.length() < std::max<Eigen::Index>(min_length, cfg.stft.fft_size()))
    throw InvalidInput("WPE needs at least " + std::to_string(min_length) +
                       " samples, got " + std::to_string(y.length()));

  const int channels = y.channels();
  std::vector<Spectrogram> spec = stft(y, cfg.stft);
  const Eigen::Index frames = spec[0].frames();
  const Eigen::Index size = static_cast<Eigen::Index>(channels) * cfg.taps;

  std::vector<Spectrogram> out = spec;
  Eigen::MatrixXcd obs(frames, channels), design(frames, size);
  Eigen::MatrixXcd weighted(frames, size), normal(size, size);
  Eigen::VectorXd variance(frames);
  for (Eigen::Index k = 0; k < cfg.stft.num_bins(); ++k) {
    for (Eigen::Index m = 0; m < frames; ++m)
      for (int c = 0; c < channels; ++c) obs(m, c) = spec[c].bins(m, k);
    const double input_energy = obs.squaredNorm();
    if (input_energy == 0.0) continue;

    for (Eigen::Index m = 0; m < frames; ++m) {
      for (int t = 0; t < cfg.taps; ++t) {
        const Eigen::Index src = m - cfg.delay - t;
        for (int c = 0; c < channels; ++c)
          design(m, t * channels + c) = src >= 0 ? obs(src, c) : Complex(0.0);
      }
    }

    Eigen::MatrixXcd current = obs;
    for (int it = 0; it < cfg.iterations; ++it) {
      variance = current.rowwise().squaredNorm() / static_cast<double>(channels);
      const double floor = cfg.variance_floor * variance.maxCoeff();
      if (!(floor > 0.0)) break;
      variance = variance.cwiseMax(floor);
      const Eigen::VectorXd inv = variance.cwiseInverse();
      weighted = inv.asDiagonal() * design;
      normal.noalias() = design.adjoint() * weighted;
      const double trace = normal.diagonal().real().sum();
      normal.diagonal().array() += cfg.diagonal_loading * trace / static_cast<double>(size);
      Eigen::LLT<Eigen::MatrixXcd> llt(normal);
      if (llt.info() != Eigen::Success) break;
      const Eigen::MatrixXcd filters = llt.solve(weighted.adjoint() * obs);
      current = obs - design * filters;
    }
    if (current.squaredNorm() > 2.0 * input_energy) continue;
    for (Eigen::Index m = 0; m < frames; ++m)
      for (int c = 0; c < channels; ++c) out[c].bins(m, k) = current(m, c);
  }

  RealMatrix samples(channels, y.length());
  for (int c = 0; c < channels; ++c) samples.row(c) = istft(out[c]).transpose();
  return MultiChannelWaveform(std::move(samples), y.sample_rate());
}

}  // namespace usddps
