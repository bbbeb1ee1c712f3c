#include "usddps/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace usddps {
namespace {

struct PlanPair {
  fftw_plan forward;
  fftw_plan inverse;
};

// The FFTW planner is not thread-safe; fftw_execute_dft_* on distinct
// buffers with a shared plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

const PlanPair& plans_for(int n) {
  static std::map<int, PlanPair> cache;
  std::lock_guard<std::mutex> lock(planner_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  double* r = fftw_alloc_real(n);
  fftw_complex* c = fftw_alloc_complex(n / 2 + 1);
  // FFTW_ESTIMATE keeps the chosen algorithm, and hence the rounding,
  // identical across runs.
  PlanPair p{fftw_plan_dft_r2c_1d(n, r, c, FFTW_ESTIMATE),
             fftw_plan_dft_c2r_1d(n, c, r, FFTW_ESTIMATE)};
  fftw_free(r);
  fftw_free(c);
  return cache.emplace(n, p).first->second;
}

}  // namespace

RealFft::RealFft(int size) : size_(size) {
  if (size < 1) throw std::invalid_argument("RealFft: size must be positive");
  const PlanPair& p = plans_for(size);
  forward_plan_ = p.forward;
  inverse_plan_ = p.inverse;
  real_buf_ = fftw_alloc_real(size);
  complex_buf_ = fftw_alloc_complex(size / 2 + 1);
}

RealFft& RealFft::cached(int size) {
  thread_local std::map<int, std::unique_ptr<RealFft>> instances;
  auto& slot = instances[size];
  if (!slot) slot = std::make_unique<RealFft>(size);
  return *slot;
}

RealFft::~RealFft() {
  fftw_free(real_buf_);
  fftw_free(complex_buf_);
}

void RealFft::forward(std::span<const double> in,
                      std::span<std::complex<double>> out) {
  std::copy(in.begin(), in.end(), real_buf_);
  std::fill(real_buf_ + in.size(), real_buf_ + size_, 0.0);
  auto* c = static_cast<fftw_complex*>(complex_buf_);
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_),
                       real_buf_, c);
  const auto* src = reinterpret_cast<const std::complex<double>*>(c);
  std::copy(src, src + std::min<std::size_t>(out.size(), num_bins()),
            out.begin());
}

void RealFft::inverse(std::span<const std::complex<double>> in,
                      std::span<double> out) {
  auto* c = reinterpret_cast<std::complex<double>*>(complex_buf_);
  const int k = num_bins();
  std::copy(in.begin(), in.begin() + k, c);
  c[0].imag(0.0);
  if (size_ % 2 == 0) c[k - 1].imag(0.0);
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_),
                       static_cast<fftw_complex*>(complex_buf_), real_buf_);
  std::copy(real_buf_, real_buf_ + std::min<std::size_t>(out.size(), size_),
            out.begin());
}

}  // namespace usddps
