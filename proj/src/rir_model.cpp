#include "usddps/rir_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "usddps/errors.hpp"
#include "usddps/fft.hpp"

namespace usddps {
namespace {

struct InterpWeight {
  int band;  // lower band
  double t;  // weight of band + 1
};

std::vector<InterpWeight> interpolation(const std::vector<int>& centers,
                                        Eigen::Index n_bins) {
  std::vector<InterpWeight> out(n_bins);
  int b = 0;
  const int last = static_cast<int>(centers.size()) - 1;
  for (Eigen::Index k = 0; k < n_bins; ++k) {
    while (b < last - 1 && centers[b + 1] < k) ++b;
    const double span = centers[b + 1] - centers[b];
    out[k] = {b, (static_cast<double>(k) - centers[b]) / span};
  }
  return out;
}

// Smallest even n' >= n whose only prime factors are 2, 3 and 5.
int next_smooth_even(Eigen::Index n) {
  for (Eigen::Index m = std::max<Eigen::Index>(n, 2);; ++m) {
    if (m % 2) continue;
    Eigen::Index r = m;
    for (int f : {2, 3, 5})
      while (r % f == 0) r /= f;
    if (r == 1) return static_cast<int>(m);
  }
}

}  // namespace

void RirParams::validate() const {
  const int b = n_bands();
  if (b < 2) throw InvalidInput("RIR model needs at least two bands");
  if (log_weights.size() != b || decays.size() != b)
    throw InvalidInput("RIR band parameter vectors must match band count");
  if (n_frames() < 1) throw InvalidInput("RIR model needs at least one frame");
  if (band_centers.front() != 0 || band_centers.back() != num_bins() - 1)
    throw InvalidInput("band centers must span bin 0 to K-1");
  for (int i = 1; i < b; ++i)
    if (band_centers[i] <= band_centers[i - 1])
      throw InvalidInput("band centers must be strictly increasing");
}

std::vector<int> log_band_centers(int n_bands, int n_bins) {
  if (n_bands < 2 || n_bands > n_bins)
    throw InvalidInput("band count must lie in [2, n_bins]");
  std::vector<int> c{0};
  const int n_log = n_bands - 1;
  const double top = n_bins - 1;
  for (int i = 0; i < n_log; ++i) {
    const double v = n_log == 1 ? top : std::pow(top, static_cast<double>(i) / (n_log - 1));
    c.push_back(std::max(static_cast<int>(std::lround(v)), c.back() + 1));
  }
  // Bumping can overshoot the top; walk back down from the end.
  c.back() = n_bins - 1;
  for (int i = n_bands - 2; i > 0 && c[i] >= c[i + 1]; --i) c[i] = c[i + 1] - 1;
  return c;
}

RirParams initial_rir_params(int n_bands, int n_frames, int n_bins,
                             std::mt19937_64& rng) {
  RirParams p;
  p.band_centers = log_band_centers(n_bands, n_bins);
  p.log_weights = Eigen::VectorXd::Constant(n_bands, std::log(0.1));
  p.decays = Eigen::VectorXd::Constant(n_bands, 0.5);
  p.phase.resize(n_frames, n_bins);
  std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
  for (Eigen::Index i = 0; i < p.phase.size(); ++i) p.phase.data()[i] = u(rng);
  return p;
}

RealMatrix synthesize_magnitude(const RirParams& p, Eigen::Index n_bins) {
  p.validate();
  if (n_bins != p.num_bins())
    throw ShapeError("synthesize_magnitude: bin count does not match parameters");
  const auto interp = interpolation(p.band_centers, n_bins);
  RealMatrix a(p.n_frames(), n_bins);
  for (Eigen::Index k = 0; k < n_bins; ++k) {
    const auto [b, t] = interp[k];
    const double lw = (1.0 - t) * p.log_weights[b] + t * p.log_weights[b + 1];
    const double decay = (1.0 - t) * p.decays[b] + t * p.decays[b + 1];
    for (Eigen::Index n = 0; n < p.n_frames(); ++n)
      a(n, k) = std::exp(lw - decay * static_cast<double>(n));
  }
  return a;
}

SubbandFilter to_filter(const RirParams& p, const StftConfig& cfg) {
  if (p.num_bins() != cfg.num_bins())
    throw ShapeError("RIR parameters do not match the STFT bin count");
  const RealMatrix a = synthesize_magnitude(p, p.num_bins());
  SubbandFilter h{ComplexMatrix(p.n_frames(), p.num_bins()), cfg};
  for (Eigen::Index i = 0; i < a.size(); ++i)
    h.taps.data()[i] = std::polar(a.data()[i], p.phase.data()[i]);
  return h;
}

Waveform minimum_phase(const Waveform& h, int oversample) {
  if (oversample < 2) throw InvalidInput("minimum_phase: oversample must be >= 2");
  const Eigen::Index n = h.size();
  const int nfft = next_smooth_even(std::max<Eigen::Index>(oversample * n, 64));
  RealFft& fft = RealFft::cached(nfft);
  const int k = fft.num_bins();
  thread_local std::vector<Complex> spec;
  thread_local std::vector<double> cep;
  spec.resize(k);
  cep.resize(nfft);
  fft.forward({h.data(), static_cast<std::size_t>(n)}, spec);
  double peak = 0.0;
  for (const auto& z : spec) peak = std::max(peak, std::norm(z));
  if (!(peak > 0.0)) throw DegenerateInput("minimum_phase: signal is all zeros");
  const double floor = 1e-24 * peak;
  for (auto& z : spec) z = 0.5 * std::log(std::max(std::norm(z), floor));
  fft.inverse(spec, cep);
  // Fold the anticausal half of the (even) cepstrum onto the causal half.
  for (int i = 0; i < nfft; ++i) {
    double c = cep[i] / nfft;
    if (i > 0 && i < nfft / 2)
      c *= 2.0;
    else if (i > nfft / 2)
      c = 0.0;
    cep[i] = c;
  }
  fft.forward(cep, spec);
  for (auto& z : spec) z = std::polar(std::exp(z.real()), z.imag());
  fft.inverse(spec, cep);
  Waveform result(n);
  for (Eigen::Index i = 0; i < n; ++i) result[i] = cep[i] / nfft;
  return result;
}

SubbandFilter project(const SubbandFilter& h, bool is_reference, int oversample) {
  if (!h.taps.allFinite()) throw InvalidInput("project: filter has non-finite taps");
  const StftConfig& cfg = h.config;
  const Eigen::Index length = cfg.signal_length_for(h.n_taps());
  if (length < cfg.fft_size())
    throw InvalidInput("project: filter needs at least " +
                       std::to_string(2 * cfg.fft_size() / cfg.hop_size() - 1) +
                       " frames");
  Spectrogram s{h.taps, cfg, length};
  Waveform time = istft(s);
  if (time.cwiseAbs().maxCoeff() == 0.0)
    throw DegenerateInput("project: filter is zero in the time domain");
  Waveform minimum = minimum_phase(time, oversample);
  if (is_reference) minimum[0] = 1.0;
  Spectrogram out = stft(minimum, cfg);
  return {std::move(out.bins), cfg};
}

RirGradient RirGradient::zeros_like(const RirParams& p) {
  return {Eigen::VectorXd::Zero(p.n_bands()), Eigen::VectorXd::Zero(p.n_bands()),
          RealMatrix::Zero(p.n_frames(), p.num_bins())};
}

bool RirGradient::all_finite() const {
  return log_weights.allFinite() && decays.allFinite() && phase.allFinite();
}

double RirRegularizer::value(const RirParams& p) const {
  return rho * p.decays.array().min(0.0).square().sum();
}

RirProblem::RirProblem(const Waveform& x0_hat, const Waveform& y,
                       const StftConfig& cfg, RirRegularizer reg)
    : cfg_(cfg), reg_(reg), source_(stft(x0_hat, cfg)) {
  if (x0_hat.size() != y.size())
    throw ShapeError("RIR objective: estimate and mixture lengths differ");
  target_ = compress(stft(y, cfg).bins);
}

double RirProblem::evaluate(const RirParams& p, RirGradient* grad) const {
  const SubbandFilter h = to_filter(p, cfg_);
  const Spectrogram convolved = subband_convolve(source_, h);
  const Waveform reverberant = istft(convolved);
  const Spectrogram analysed = stft(reverberant, cfg_);
  double data = 0.0;
  const ComplexMatrix g_analysed =
      compressed_residual_gradient(analysed.bins, target_, &data);
  const double value = data + reg_.value(p);
  if (!grad) return value;

  const Waveform g_time = stft_adjoint({g_analysed, cfg_, reverberant.size()});
  const Spectrogram g_conv = istft_adjoint(g_time, cfg_, convolved.frames());
  const ComplexMatrix g_taps = subband_filter_gradient(g_conv, source_, h.n_taps());

  *grad = RirGradient::zeros_like(p);
  const auto interp = interpolation(p.band_centers, p.num_bins());
  for (Eigen::Index k = 0; k < p.num_bins(); ++k) {
    double sum0 = 0.0, sum1 = 0.0;
    for (Eigen::Index n = 0; n < p.n_frames(); ++n) {
      const Complex prod = std::conj(g_taps(n, k)) * h.taps(n, k);
      // d/dlogA = Re(conj(g) H); d/dphase = -Im(conj(g) H).
      sum0 += prod.real();
      sum1 += static_cast<double>(n) * prod.real();
      grad->phase(n, k) = -prod.imag();
    }
    const auto [b, t] = interp[k];
    grad->log_weights[b] += (1.0 - t) * sum0;
    grad->log_weights[b + 1] += t * sum0;
    grad->decays[b] -= (1.0 - t) * sum1;
    grad->decays[b + 1] -= t * sum1;
  }
  grad->decays += 2.0 * reg_.rho * p.decays.cwiseMin(0.0);
  return value;
}

RirObjective rir_objective(const RirParams& p, const Waveform& x0_hat,
                           const Waveform& y_ref, const StftConfig& cfg,
                           const RirRegularizer& reg) {
  RirProblem problem(x0_hat, y_ref, cfg, reg);
  RirObjective out{0.0, {}};
  out.value = problem.evaluate(p, &out.gradient);
  return out;
}

AdamState AdamState::for_params(const RirParams& p, AdamConfig config) {
  return {config, RirGradient::zeros_like(p), RirGradient::zeros_like(p), 0};
}

void AdamState::step(RirParams& p, const RirGradient& g) {
  ++step_count;
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count));
  auto update = [&](auto& param, auto& m, auto& v, const auto& grad, double lr) {
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseAbs2();
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config.eps);
  };
  update(p.log_weights, first_moment.log_weights, second_moment.log_weights,
         g.log_weights, config.lr_magnitude);
  update(p.decays, first_moment.decays, second_moment.decays, g.decays,
         config.lr_magnitude);
  update(p.phase, first_moment.phase, second_moment.phase, g.phase, config.lr_phase);
}

RirEstimate estimate_rir(const RirParams& p_init, const RirProblem& problem,
                         int n_its, AdamState& adam, bool is_reference, int oversample) {
  if (n_its < 0) throw InvalidInput("estimate_rir: n_its must be >= 0");
  p_init.validate();
  RirEstimate out{p_init, {}, EstimateStatus::kOk};
  RirGradient grad;
  for (int it = 0; it < n_its; ++it) {
    const double value = problem.evaluate(out.params, &grad);
    if (!std::isfinite(value) || !grad.all_finite()) {
      out.status = EstimateStatus::kNonFiniteGradient;
      break;
    }
    out.objective_trace.push_back(value);
    RirParams next = out.params;
    adam.step(next, grad);
    next.decays = next.decays.cwiseMax(0.0).cwiseMin(problem.regularizer().alpha_max);
    const SubbandFilter projected =
        project(to_filter(next, problem.config()), is_reference, oversample);
    next.phase = projected.taps.unaryExpr([](Complex z) { return std::arg(z); });
    out.params = std::move(next);
  }
  return out;
}

RirEstimate estimate_rir(const RirParams& p_init, const Waveform& x0_hat,
                         const Waveform& y_ref, const StftConfig& cfg, int n_its,
                         AdamState& adam, bool is_reference) {
  return estimate_rir(p_init, RirProblem(x0_hat, y_ref, cfg), n_its, adam,
                      is_reference);
}

}  // namespace usddps
