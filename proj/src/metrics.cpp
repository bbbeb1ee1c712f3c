#include "usddps/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "usddps/errors.hpp"

namespace usddps {

namespace {

double clamp_db(double db) {
  if (std::isnan(db)) return -kSiSdrClamp;
  return std::clamp(db, -kSiSdrClamp, kSiSdrClamp);
}

template <typename A, typename B>
double si_sdr_impl(const A& est, const B& ref) {
  const double ref_energy = ref.squaredNorm();
  if (ref_energy == 0.0) throw InvalidInput("si_sdr: reference is all zeros");
  const Waveform target = (est.dot(ref) / ref_energy) * ref;
  const double noise = (est - target).squaredNorm();
  const double signal = target.squaredNorm();
  if (noise == 0.0) return signal > 0.0 ? kSiSdrClamp : -kSiSdrClamp;
  if (signal == 0.0) return -kSiSdrClamp;
  return clamp_db(10.0 * std::log10(signal / noise));
}

}  // namespace

double si_sdr(const Waveform& estimate, const Waveform& reference) {
  if (estimate.size() != reference.size())
    throw ShapeError("si_sdr: estimate and reference lengths differ");
  return si_sdr_impl(estimate, reference);
}

double si_sdr_best_shift(const Waveform& estimate, const Waveform& reference,
                         int max_shift) {
  if (estimate.size() != reference.size())
    throw ShapeError("si_sdr: estimate and reference lengths differ");
  if (max_shift < 0) throw InvalidInput("si_sdr: max_shift must be >= 0");
  const Eigen::Index length = reference.size();
  double best = -kSiSdrClamp;
  for (int shift = -max_shift; shift <= max_shift; ++shift) {
    const Eigen::Index n = length - std::abs(shift);
    if (n <= 0) continue;
    // A positive shift compares estimate[i + shift] with reference[i].
    const Eigen::Index e0 = shift > 0 ? shift : 0;
    const Eigen::Index r0 = shift > 0 ? 0 : -shift;
    const auto ref = reference.segment(r0, n);
    if (ref.squaredNorm() == 0.0) continue;
    best = std::max(best, si_sdr_impl(estimate.segment(e0, n), ref));
  }
  return best;
}

double log_spectral_distance(const Waveform& estimate, const Waveform& reference,
                             const StftConfig& cfg) {
  if (estimate.size() != reference.size())
    throw ShapeError("lsd: estimate and reference lengths differ");
  const Spectrogram e = stft(estimate, cfg);
  const Spectrogram r = stft(reference, cfg);
  const RealMatrix de = e.bins.cwiseAbs().cwiseMax(1e-8).array().log10().matrix();
  const RealMatrix dr = r.bins.cwiseAbs().cwiseMax(1e-8).array().log10().matrix();
  const double mean_sq = (20.0 * (de - dr)).array().square().mean();
  return std::sqrt(mean_sq);
}

EvalReport evaluate(const Waveform& estimate, const Waveform& reference,
                    const StftConfig& cfg) {
  return {si_sdr(estimate, reference), si_sdr_best_shift(estimate, reference),
          log_spectral_distance(estimate, reference, cfg)};
}

}  // namespace usddps
