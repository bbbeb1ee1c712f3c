#include "usddps/sampler.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "usddps/errors.hpp"
#include "usddps/wpe.hpp"

namespace usddps {

std::string to_string(GuidanceMode mode) {
  switch (mode) {
    case GuidanceMode::kUsdDps: return "usd-dps";
    case GuidanceMode::kMcBuddy: return "mc-buddy";
    case GuidanceMode::kMcFcp: return "mc-fcp";
    case GuidanceMode::kUnguided: return "unguided";
  }
  return "unknown";
}

GuidanceMode parse_guidance_mode(const std::string& text) {
  if (text == "usd-dps" || text == "usd_dps") return GuidanceMode::kUsdDps;
  if (text == "mc-buddy" || text == "mc_buddy") return GuidanceMode::kMcBuddy;
  if (text == "mc-fcp" || text == "mc_fcp") return GuidanceMode::kMcFcp;
  if (text == "unguided") return GuidanceMode::kUnguided;
  throw InvalidInput("unknown mode '" + text +
                     "' (expected usd-dps, mc-buddy, mc-fcp or unguided)");
}

void SamplerConfig::validate() const {
  if (n_steps < 1) throw InvalidInput("n_steps must be >= 1");
  if (!(sigma_min > 0.0) || !(sigma_min < sigma_max))
    throw InvalidInput("need 0 < sigma_min < sigma_max");
  if (!(rho > 0.0)) throw InvalidInput("rho must be positive");
  if (!(zeta >= 0.0)) throw InvalidInput("zeta must be >= 0");
  if (!(lambda_prime >= 0.0)) throw InvalidInput("lambda_prime must be >= 0");
  if (n_its < 0) throw InvalidInput("n_its must be >= 0");
  if (rir_bands < 2) throw InvalidInput("rir_bands must be >= 2");
  if (projection_oversample < 2) throw InvalidInput("projection_oversample must be >= 2");
  if (fcp_taps < 1) throw InvalidInput("fcp_taps must be >= 1");
  if (!(fcp_epsilon > 0.0)) throw InvalidInput("fcp_epsilon must be positive");
  if (rir_frames < 2 * stft.fft_size() / stft.hop_size() - 1)
    throw InvalidInput("rir_frames too small for the STFT configuration");
}

std::vector<double> sigma_schedule(const SamplerConfig& cfg) {
  cfg.validate();
  const double hi = std::pow(cfg.sigma_max, 1.0 / cfg.rho);
  const double lo = std::pow(cfg.sigma_min, 1.0 / cfg.rho);
  std::vector<double> s(cfg.n_steps + 1);
  for (int i = 0; i <= cfg.n_steps; ++i)
    s[i] = std::pow(hi + static_cast<double>(i) / cfg.n_steps * (lo - hi), cfg.rho);
  s.front() = cfg.sigma_max;
  s.back() = cfg.sigma_min;
  return s;
}

Waveform tweedie(const Waveform& x, double sigma, const Waveform& score) {
  return x + sigma * sigma * score;
}

Waveform guided_step(const Waveform& x, double sigma, double sigma_next,
                     const Waveform& score, const Waveform& guidance) {
  return x - sigma * (sigma_next - sigma) * (score + guidance);
}

double guidance_scale(double zeta, Eigen::Index length, double tau, double g_norm) {
  if (g_norm < 1e-12) return 0.0;
  if (!(tau > 0.0)) throw InvalidInput("guidance_scale: tau must be positive");
  return zeta * std::sqrt(static_cast<double>(length)) / (tau * g_norm);
}

std::vector<double> channel_weights(GuidanceMode mode, int n_channels,
                                    double lambda_prime) {
  std::vector<double> w(n_channels, 1.0);
  if (mode == GuidanceMode::kUsdDps)
    for (int c = 1; c < n_channels; ++c) w[c] = lambda_prime;
  if (mode == GuidanceMode::kUnguided) std::fill(w.begin(), w.end(), 0.0);
  return w;
}

LikelihoodModel::LikelihoodModel(const MultiChannelWaveform& y, const StftConfig& cfg,
                                 double fcp_epsilon, int fcp_taps)
    : cfg_(cfg), fcp_taps_(fcp_taps), mixture_(stft(y, cfg)) {
  for (const auto& s : mixture_) targets_.push_back(compress(s.bins));
  lambda_ = fcp_weights(mixture_, fcp_epsilon);
}

SubbandFilter LikelihoodModel::fcp_filter(int channel, const Spectrogram& x_hat) const {
  return fcp_estimate(mixture_[channel], x_hat, lambda_, fcp_taps_);
}

namespace {

// Loss of one channel term and its gradient with respect to the subband
// filter output (before the synthesis/analysis round trip is undone).
struct ChannelTerm {
  double loss;
  Spectrogram grad_convolved;
};

ChannelTerm channel_term(const Spectrogram& source, const SubbandFilter& h,
                         const ComplexMatrix& target, const StftConfig& cfg) {
  const Spectrogram convolved = subband_convolve(source, h);
  const Waveform reverberant = istft(convolved);
  const Spectrogram analysed = stft(reverberant, cfg);
  double loss = 0.0;
  const ComplexMatrix g = compressed_residual_gradient(analysed.bins, target, &loss);
  const Waveform g_time = stft_adjoint({g, cfg, reverberant.size()});
  return {loss, istft_adjoint(g_time, cfg, convolved.frames())};
}

}  // namespace

LikelihoodResult LikelihoodModel::evaluate(const Waveform& x0_hat,
                                           const std::vector<SubbandFilter>& filters,
                                           const std::vector<double>& weights) const {
  std::vector<std::optional<SubbandFilter>> given(filters.begin(), filters.end());
  return evaluate(x0_hat, given, weights, FcpGradient::kStopThrough);
}

LikelihoodResult LikelihoodModel::evaluate(
    const Waveform& x0_hat, const std::vector<std::optional<SubbandFilter>>& filters,
    const std::vector<double>& weights, FcpGradient mode,
    std::vector<SubbandFilter>* used_filters) const {
  const int n = channels();
  if (static_cast<int>(filters.size()) != n || static_cast<int>(weights.size()) != n)
    throw ShapeError("likelihood: need one filter and one weight per channel");
  if (x0_hat.size() != mixture_[0].signal_length)
    throw ShapeError("likelihood: estimate length differs from the mixture");
  const Spectrogram source = stft(x0_hat, cfg_);
  Spectrogram g_source{ComplexMatrix::Zero(source.frames(), source.num_bins()), cfg_,
                       source.signal_length};
  LikelihoodResult out;
  if (used_filters) used_filters->clear();

  std::vector<const Spectrogram*> fcp_inputs;
  for (int c = 0; c < n; ++c)
    if (!filters[c]) fcp_inputs.push_back(&mixture_[c]);
  std::vector<FcpSolution> fcp_solutions;
  if (!fcp_inputs.empty())
    fcp_solutions = FcpSolution::solve_channels(fcp_inputs, source, lambda_, fcp_taps_,
                                                mode == FcpGradient::kDifferentiate);

  std::size_t next_fcp = 0;
  for (int c = 0; c < n; ++c) {
    const FcpSolution* fcp = filters[c] ? nullptr : &fcp_solutions[next_fcp++];
    const SubbandFilter* h = fcp ? &fcp->filter() : &*filters[c];
    if (used_filters) used_filters->push_back(*h);
    if (h->num_bins() != source.num_bins())
      throw ShapeError("likelihood: filter bin count differs from the STFT");
    const ChannelTerm term = channel_term(source, *h, targets_[c], cfg_);
    if (c == 0)
      out.reference_loss = term.loss;
    else
      out.nonreference_loss += term.loss;
    out.loss += weights[c] * term.loss;
    if (weights[c] == 0.0) continue;
    g_source.bins += weights[c] * subband_convolve_adjoint(term.grad_convolved, *h).bins;
    if (fcp && mode == FcpGradient::kDifferentiate) {
      const ComplexMatrix g_taps =
          subband_filter_gradient(term.grad_convolved, source, h->n_taps());
      g_source.bins +=
          weights[c] * fcp->input_gradient(mixture_[c], source, lambda_, g_taps).bins;
    }
  }
  out.gradient = stft_adjoint(g_source);
  return out;
}

LikelihoodResult likelihood_and_gradient(const Waveform& x0_hat,
                                         const MultiChannelWaveform& y,
                                         const std::vector<SubbandFilter>& filters,
                                         GuidanceMode mode, double lambda_prime,
                                         const StftConfig& cfg) {
  LikelihoodModel model(y, cfg);
  return model.evaluate(x0_hat, filters,
                        channel_weights(mode, y.channels(), lambda_prime));
}

namespace {

bool uses_parametric(GuidanceMode mode, int channel) {
  switch (mode) {
    case GuidanceMode::kUsdDps: return channel == 0;
    case GuidanceMode::kMcBuddy: return true;
    default: return false;
  }
}

[[noreturn]] void abort_step(int step, double sigma, const std::string& what) {
  std::ostringstream os;
  os << "sampling step " << step << " (sigma " << sigma << "): " << what;
  throw NumericalError(os.str());
}

}  // namespace

DereverbResult dereverb(const MultiChannelWaveform& y, ScorePrior& prior,
                        const SamplerConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  const Eigen::Index length = y.length();
  const int channels = y.channels();
  if (static_cast<double>(length) > cfg.segment_max_seconds * y.sample_rate())
    throw InvalidInput("input of " + std::to_string(length) +
                       " samples exceeds the maximum segment length");
  if (length < cfg.stft.fft_size())
    throw InvalidInput("input shorter than one STFT frame");

  DereverbResult result;
  switch (cfg.init) {
    case InitMode::kWpe: {
      WpeConfig wpe;
      wpe.taps = cfg.wpe_taps.value_or(default_wpe_taps(channels));
      wpe.delay = cfg.wpe_delay;
      wpe.iterations = cfg.wpe_iterations;
      wpe.stft = cfg.stft;
      result.initialization = wpe_dereverb(y, wpe).channel(0);
      break;
    }
    case InitMode::kMixture: result.initialization = y.channel(0); break;
    case InitMode::kZero: result.initialization = Waveform::Zero(length); break;
  }

  const std::vector<double> sigmas = sigma_schedule(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Waveform x(length);
  for (Eigen::Index i = 0; i < length; ++i)
    x[i] = result.initialization[i] + cfg.sigma_max * normal(rng);
  result.start = x;

  const bool guided = cfg.mode != GuidanceMode::kUnguided;
  std::optional<LikelihoodModel> likelihood;
  std::vector<std::optional<RirParams>> rir(channels);
  std::vector<double> weights;
  if (guided) {
    likelihood.emplace(y, cfg.stft, cfg.fcp_epsilon, cfg.fcp_taps);
    weights = channel_weights(cfg.mode, channels, cfg.lambda_prime);
    for (int c = 0; c < channels; ++c)
      if (uses_parametric(cfg.mode, c))
        rir[c] = initial_rir_params(cfg.rir_bands, cfg.rir_frames,
                                    cfg.stft.num_bins(), rng);
  }

  for (int i = 0; i < cfg.n_steps; ++i) {
    const double sigma = sigmas[i];
    const double sigma_next = sigmas[i + 1];
    StepTrace trace;
    trace.step = cfg.n_steps - i;
    trace.sigma = sigma;

    ScoreEstimate est;
    try {
      est = prior.evaluate(x, sigma);
    } catch (const Error& e) {
      abort_step(trace.step, sigma, e.what());
    }
    if (est.score.size() != length) abort_step(trace.step, sigma, "score length mismatch");
    trace.score_norm = est.score.norm();

    Waveform guidance = Waveform::Zero(length);
    if (guided) {
      Waveform x0 = est.denoised;
      if (cfg.rescale_std > 0.0) {
        try {
          x0 = rescale_to_std(x0, cfg.rescale_std);
        } catch (const DegenerateInput& e) {
          abort_step(trace.step, sigma, e.what());
        }
      }

      std::vector<std::optional<SubbandFilter>> filters(channels);
      for (int c = 0; c < channels; ++c) {
        if (!rir[c]) continue;
        RirProblem problem(x0, y.channel(c), cfg.stft, cfg.regularizer);
        AdamState adam = AdamState::for_params(*rir[c], cfg.adam);
        RirEstimate fit = estimate_rir(*rir[c], problem, cfg.n_its, adam, c == 0,
                                      cfg.projection_oversample);
        rir[c] = std::move(fit.params);
        filters[c] = to_filter(*rir[c], cfg.stft);
        if (c == 0) trace.rir_objective = cfg.regularizer.value(*rir[c]);
      }

      const LikelihoodResult lik =
          likelihood->evaluate(x0, filters, weights, cfg.fcp_gradient);
      trace.reference_loss = lik.reference_loss;
      trace.nonreference_loss = lik.nonreference_loss;
      if (rir[0]) trace.rir_objective += lik.reference_loss;
      trace.guidance_norm = lik.gradient.norm();
      trace.guidance_scale =
          guidance_scale(cfg.zeta, length, sigma, trace.guidance_norm);
      // The likelihood score is the negative gradient of the loss.
      guidance = -trace.guidance_scale * lik.gradient;
    }

    x = guided_step(x, sigma, sigma_next, est.score, guidance);
    if (!x.allFinite()) abort_step(trace.step, sigma, "state became non-finite");
    result.traces.push_back(trace);
    if (on_step) on_step(trace);
  }
  result.estimate = std::move(x);
  return result;
}

}  // namespace usddps
