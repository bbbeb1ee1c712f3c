#pragma once

#include <Eigen/Core>

#include <complex>
#include <vector>

namespace usddps {

using Complex = std::complex<double>;
using Waveform = Eigen::VectorXd;
using RealMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexMatrix =
    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// C channels of equal length L at one sample rate. Row c is channel c;
// channel 0 is the reference microphone.
class MultiChannelWaveform {
 public:
  MultiChannelWaveform(RealMatrix samples, int sample_rate);
  static MultiChannelWaveform from_channels(const std::vector<Waveform>& channels,
                                            int sample_rate);

  int channels() const { return static_cast<int>(samples_.rows()); }
  Eigen::Index length() const { return samples_.cols(); }
  int sample_rate() const { return sample_rate_; }
  const RealMatrix& samples() const { return samples_; }
  Waveform channel(int c) const { return samples_.row(c).transpose(); }

 private:
  RealMatrix samples_;
  int sample_rate_;
};

// Analysis/synthesis parameters shared by every STFT in the pipeline.
//
// Framing convention: the signal is preceded by fft_size - hop_size zeros,
// frame m covers padded samples [m*hop, m*hop + fft_size), and
// num_frames(L) = ceil((L + fft_size - hop_size) / hop_size). With this
// padding every input sample is covered by fft_size / hop_size frames, so
// istft(stft(x)) reproduces x everywhere.
class StftConfig {
 public:
  StftConfig(int fft_size, int hop_size, std::vector<double> window);

  // Periodic square-root Hann window.
  static StftConfig sqrt_hann(int fft_size, int hop_size);
  // 32 ms frames with 8 ms hop at the given rate (512 / 128 at 16 kHz).
  static StftConfig for_sample_rate(int sample_rate);

  int fft_size() const { return fft_size_; }
  int hop_size() const { return hop_size_; }
  int num_bins() const { return fft_size_ / 2 + 1; }
  int pad() const { return fft_size_ - hop_size_; }
  const std::vector<double>& window() const { return window_; }

  Eigen::Index num_frames(Eigen::Index signal_length) const;
  // Length of the signal whose STFT has exactly n_frames frames, when that
  // length is a multiple of the hop.
  Eigen::Index signal_length_for(Eigen::Index n_frames) const;

  // Sum of squared windows over all frames covering a sample, indexed by
  // (padded sample index) mod hop.
  const std::vector<double>& overlap_norm() const { return overlap_norm_; }

  bool operator==(const StftConfig& other) const;

 private:
  int fft_size_;
  int hop_size_;
  std::vector<double> window_;
  std::vector<double> overlap_norm_;
};

// One-sided complex spectrogram, frames x bins.
struct Spectrogram {
  ComplexMatrix bins;
  StftConfig config;
  Eigen::Index signal_length = 0;

  Eigen::Index frames() const { return bins.rows(); }
  Eigen::Index num_bins() const { return bins.cols(); }
};

Spectrogram stft(const Waveform& x, const StftConfig& cfg);
std::vector<Spectrogram> stft(const MultiChannelWaveform& x,
                              const StftConfig& cfg);

// Weighted overlap-add synthesis with the analysis window, producing
// s.signal_length samples (or `length` samples for the overload).
Waveform istft(const Spectrogram& s);
Waveform istft(const Spectrogram& s, Eigen::Index length);

// Adjoints under the real inner product <a, b> = Re sum conj(a) b.
// stft_adjoint maps a spectrogram-shaped gradient back to samples;
// istft_adjoint maps a sample gradient to a spectrogram-shaped gradient with
// n_frames frames.
Waveform stft_adjoint(const Spectrogram& grad);
Spectrogram istft_adjoint(const Waveform& grad, const StftConfig& cfg,
                          Eigen::Index n_frames);

// |z|^(2/3) exp(j arg z) binwise, with compress(0) = 0.
Complex compress(Complex z);
ComplexMatrix compress(const ComplexMatrix& s);
Spectrogram compress(const Spectrogram& s);

// Gradient of sum |compress(u) - target|^2 with respect to u. Returns the
// loss through `loss`. Bins with u == 0 get zero gradient.
ComplexMatrix compressed_residual_gradient(const ComplexMatrix& u,
                                           const ComplexMatrix& target,
                                           double* loss);

// Population standard deviation (mean removed).
double empirical_std(const Waveform& x);

// x * target_std / empirical_std(x); the mean is kept.
Waveform rescale_to_std(const Waveform& x, double target_std);

}  // namespace usddps
