#pragma once

#include "usddps/audio.hpp"

namespace usddps {

struct WpeConfig {
  int taps = 5;
  int delay = 3;
  int iterations = 3;
  StftConfig stft = StftConfig::for_sample_rate(16000);
  // Per-frequency variance floor, relative to the largest frame variance.
  double variance_floor = 1e-8;
  // Diagonal load relative to trace / size of the correlation matrix.
  double diagonal_loading = 1e-6;

  void validate() const;
};

// Filter length used for a given microphone count: 37 (1 channel),
// 20 (2), 10 (3-4), 5 (5 and more).
int default_wpe_taps(int n_channels);

// Multichannel delayed linear prediction in the STFT domain. Each iteration
// re-estimates the time-varying source variance from the current output,
// solves the weighted normal equations for the prediction filters over
// frames [m - delay - taps + 1, m - delay], and subtracts the prediction.
// A frequency whose output energy would exceed twice its input energy is
// left unprocessed.
MultiChannelWaveform wpe_dereverb(const MultiChannelWaveform& y,
                                  const WpeConfig& cfg);

}  // namespace usddps
