#pragma once

#include <complex>
#include <span>

namespace usddps {

// Real-input FFT of a fixed length backed by FFTW. Owns aligned scratch
// buffers, so one instance must not be shared between threads; plans are
// cached process-wide.
class RealFft {
 public:
  explicit RealFft(int size);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  // Per-thread instance of the given size, kept alive for reuse.
  static RealFft& cached(int size);

  int size() const { return size_; }
  int num_bins() const { return size_ / 2 + 1; }

  // out[k] = sum_n in[n] exp(-2 pi i k n / size), k < size/2 + 1.
  void forward(std::span<const double> in, std::span<std::complex<double>> out);

  // Unnormalized inverse: out[n] = sum over the full Hermitian extension of
  // in. Imaginary parts of the DC and Nyquist bins are ignored.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  int size_;
  double* real_buf_;
  void* complex_buf_;
  void* forward_plan_;
  void* inverse_plan_;
};

}  // namespace usddps
