#include "usddps/audio.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "usddps/errors.hpp"
#include "usddps/fft.hpp"

namespace usddps {

MultiChannelWaveform::MultiChannelWaveform(RealMatrix samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (samples_.rows() < 1 || samples_.cols() < 1)
    throw InvalidInput("waveform needs at least one channel and one sample");
  if (sample_rate_ <= 0) throw InvalidInput("sample rate must be positive");
}

MultiChannelWaveform MultiChannelWaveform::from_channels(
    const std::vector<Waveform>& channels, int sample_rate) {
  if (channels.empty()) throw InvalidInput("no channels given");
  RealMatrix m(static_cast<Eigen::Index>(channels.size()), channels[0].size());
  for (std::size_t c = 0; c < channels.size(); ++c) {
    if (channels[c].size() != m.cols())
      throw ShapeError("channel " + std::to_string(c) + " has length " +
                       std::to_string(channels[c].size()) + ", expected " +
                       std::to_string(m.cols()));
    m.row(static_cast<Eigen::Index>(c)) = channels[c].transpose();
  }
  return MultiChannelWaveform(std::move(m), sample_rate);
}

StftConfig::StftConfig(int fft_size, int hop_size, std::vector<double> window)
    : fft_size_(fft_size), hop_size_(hop_size), window_(std::move(window)) {
  if (fft_size_ < 2 || fft_size_ % 2 != 0)
    throw InvalidInput("fft_size must be even and >= 2");
  if (hop_size_ < 1 || fft_size_ % hop_size_ != 0)
    throw InvalidInput("hop_size must divide fft_size");
  if (static_cast<int>(window_.size()) != fft_size_)
    throw InvalidInput("window length must equal fft_size");
  overlap_norm_.assign(hop_size_, 0.0);
  for (int j = 0; j < fft_size_; ++j)
    overlap_norm_[j % hop_size_] += window_[j] * window_[j];
  for (double v : overlap_norm_)
    if (!(v > 0.0))
      throw InvalidInput("window does not satisfy the overlap-add condition");
}

StftConfig StftConfig::sqrt_hann(int fft_size, int hop_size) {
  std::vector<double> w(fft_size);
  for (int j = 0; j < fft_size; ++j)
    w[j] = std::sqrt(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * j / fft_size));
  return StftConfig(fft_size, hop_size, std::move(w));
}

StftConfig StftConfig::for_sample_rate(int sample_rate) {
  const int fft = static_cast<int>(std::lround(0.032 * sample_rate));
  const int hop = static_cast<int>(std::lround(0.008 * sample_rate));
  return sqrt_hann(fft, hop);
}

Eigen::Index StftConfig::num_frames(Eigen::Index signal_length) const {
  return (signal_length + pad() + hop_size_ - 1) / hop_size_;
}

Eigen::Index StftConfig::signal_length_for(Eigen::Index n_frames) const {
  return n_frames * hop_size_ - pad();
}

bool StftConfig::operator==(const StftConfig& other) const {
  return fft_size_ == other.fft_size_ && hop_size_ == other.hop_size_ &&
         window_ == other.window_;
}

Spectrogram stft(const Waveform& x, const StftConfig& cfg) {
  const Eigen::Index length = x.size();
  if (length < cfg.fft_size())
    throw InvalidInput("signal of " + std::to_string(length) +
                       " samples is shorter than one frame (" +
                       std::to_string(cfg.fft_size()) + ")");
  const int n = cfg.fft_size();
  const Eigen::Index frames = cfg.num_frames(length);
  const auto& w = cfg.window();
  Spectrogram out{ComplexMatrix(frames, cfg.num_bins()), cfg, length};
  RealFft fft(n);
  std::vector<double> frame(n);
  for (Eigen::Index m = 0; m < frames; ++m) {
    const Eigen::Index start = m * cfg.hop_size() - cfg.pad();
    for (int j = 0; j < n; ++j) {
      const Eigen::Index t = start + j;
      frame[j] = (t >= 0 && t < length) ? w[j] * x[t] : 0.0;
    }
    fft.forward(frame, {out.bins.row(m).data(), static_cast<std::size_t>(cfg.num_bins())});
  }
  return out;
}

std::vector<Spectrogram> stft(const MultiChannelWaveform& x,
                              const StftConfig& cfg) {
  std::vector<Spectrogram> out;
  out.reserve(x.channels());
  for (int c = 0; c < x.channels(); ++c) out.push_back(stft(x.channel(c), cfg));
  return out;
}

Waveform istft(const Spectrogram& s) { return istft(s, s.signal_length); }

Waveform istft(const Spectrogram& s, Eigen::Index length) {
  const StftConfig& cfg = s.config;
  const int n = cfg.fft_size();
  if (s.num_bins() != cfg.num_bins())
    throw ShapeError("spectrogram has " + std::to_string(s.num_bins()) +
                     " bins, config expects " + std::to_string(cfg.num_bins()));
  const auto& w = cfg.window();
  const auto& norm = cfg.overlap_norm();
  Waveform out = Waveform::Zero(length);
  RealFft fft(n);
  std::vector<double> frame(n);
  for (Eigen::Index m = 0; m < s.frames(); ++m) {
    const Eigen::Index start = m * cfg.hop_size() - cfg.pad();
    if (start >= length) break;
    fft.inverse({s.bins.row(m).data(), static_cast<std::size_t>(s.num_bins())}, frame);
    for (int j = 0; j < n; ++j) {
      const Eigen::Index t = start + j;
      if (t >= 0 && t < length) out[t] += w[j] * frame[j];
    }
  }
  for (Eigen::Index t = 0; t < length; ++t)
    out[t] /= n * norm[(t + cfg.pad()) % cfg.hop_size()];
  return out;
}

Waveform stft_adjoint(const Spectrogram& grad) {
  const StftConfig& cfg = grad.config;
  const int n = cfg.fft_size();
  const int k = cfg.num_bins();
  const Eigen::Index length = grad.signal_length;
  const auto& w = cfg.window();
  Waveform out = Waveform::Zero(length);
  RealFft fft(n);
  std::vector<Complex> half(k);
  std::vector<double> frame(n);
  for (Eigen::Index m = 0; m < grad.frames(); ++m) {
    for (int b = 0; b < k; ++b) half[b] = grad.bins(m, b);
    for (int b = 1; b < k - 1; ++b) half[b] *= 0.5;
    fft.inverse(half, frame);
    const Eigen::Index start = m * cfg.hop_size() - cfg.pad();
    for (int j = 0; j < n; ++j) {
      const Eigen::Index t = start + j;
      if (t >= 0 && t < length) out[t] += w[j] * frame[j];
    }
  }
  return out;
}

Spectrogram istft_adjoint(const Waveform& grad, const StftConfig& cfg,
                          Eigen::Index n_frames) {
  const int n = cfg.fft_size();
  const int k = cfg.num_bins();
  const Eigen::Index length = grad.size();
  const auto& w = cfg.window();
  const auto& norm = cfg.overlap_norm();
  Spectrogram out{ComplexMatrix::Zero(n_frames, k), cfg, length};
  RealFft fft(n);
  std::vector<double> frame(n);
  for (Eigen::Index m = 0; m < n_frames; ++m) {
    const Eigen::Index start = m * cfg.hop_size() - cfg.pad();
    if (start >= length) break;
    for (int j = 0; j < n; ++j) {
      const Eigen::Index t = start + j;
      frame[j] = (t >= 0 && t < length)
                     ? w[j] * grad[t] / (n * norm[(t + cfg.pad()) % cfg.hop_size()])
                     : 0.0;
    }
    auto row = out.bins.row(m);
    fft.forward(frame, {row.data(), static_cast<std::size_t>(k)});
    for (int b = 1; b < k - 1; ++b) row[b] *= 2.0;
  }
  return out;
}

Complex compress(Complex z) {
  const double mag = std::abs(z);
  if (mag == 0.0) return {0.0, 0.0};
  return z / std::cbrt(mag);
}

ComplexMatrix compress(const ComplexMatrix& s) {
  return s.unaryExpr([](Complex z) { return compress(z); });
}

Spectrogram compress(const Spectrogram& s) {
  return {compress(s.bins), s.config, s.signal_length};
}

ComplexMatrix compressed_residual_gradient(const ComplexMatrix& u,
                                           const ComplexMatrix& target,
                                           double* loss) {
  if (u.rows() != target.rows() || u.cols() != target.cols())
    throw ShapeError("compressed target shape mismatch");
  constexpr double kPower = 2.0 / 3.0;
  ComplexMatrix grad(u.rows(), u.cols());
  double total = 0.0;
  const Eigen::Index size = u.size();
  const Complex* up = u.data();
  const Complex* tp = target.data();
  Complex* gp = grad.data();
  for (Eigen::Index i = 0; i < size; ++i) {
    const double mag = std::abs(up[i]);
    if (mag == 0.0) {
      total += std::norm(tp[i]);
      gp[i] = 0.0;
      continue;
    }
    const double scale = 1.0 / std::cbrt(mag);  // |u|^(p-1)
    const Complex r = up[i] * scale - tp[i];
    total += std::norm(r);
    const Complex unit = up[i] / mag;
    gp[i] = scale * ((kPower + 1.0) * r + (kPower - 1.0) * unit * unit * std::conj(r));
  }
  if (loss) *loss = total;
  return grad;
}

double empirical_std(const Waveform& x) {
  if (x.size() == 0) return 0.0;
  const double mean = x.mean();
  return std::sqrt((x.array() - mean).square().sum() / static_cast<double>(x.size()));
}

Waveform rescale_to_std(const Waveform& x, double target_std) {
  const double s = empirical_std(x);
  if (!(s >= 1e-12))
    throw DegenerateInput("cannot rescale a signal with standard deviation " +
                          std::to_string(s));
  return x * (target_std / s);
}

}  // namespace usddps
