#pragma once

#include "usddps/audio.hpp"

namespace usddps {

inline constexpr double kSiSdrClamp = 60.0;

// Scale-invariant SDR in dB, clamped to [-60, 60].
double si_sdr(const Waveform& estimate, const Waveform& reference);

// Maximum SI-SDR over integer shifts of the estimate in [-max_shift, max_shift].
// Only the overlapping part of the two signals is compared.
double si_sdr_best_shift(const Waveform& estimate, const Waveform& reference,
                         int max_shift = 16);

// RMS over frames and bins of 20 log10(|S_est| / |S_ref|), magnitudes
// floored at 1e-8.
double log_spectral_distance(const Waveform& estimate, const Waveform& reference,
                             const StftConfig& cfg);

struct EvalReport {
  double si_sdr;
  double si_sdr_best_shift;
  double lsd;
};

EvalReport evaluate(const Waveform& estimate, const Waveform& reference,
                    const StftConfig& cfg);

}  // namespace usddps
