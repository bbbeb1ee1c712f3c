#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "usddps/audio.hpp"
#include "usddps/rir_model.hpp"

namespace usddps {

enum class RirKind { kExpDecaySubband, kDenseGaussianTail };

std::string to_string(RirKind kind);
RirKind parse_rir_kind(const std::string& text);

struct SceneSpec {
  int n_channels = 2;
  double t60 = 0.6;                 // seconds, [0.05, 2.0]
  std::vector<int> direct_delays;   // samples; empty means all zero
  double snr_db = 20.0;             // +inf disables noise
  std::uint64_t seed = 0;
  RirKind rir_kind = RirKind::kExpDecaySubband;
  int sample_rate = 16000;
  int n_bands = 8;

  void validate() const;
  int delay(int channel) const;
};

// Energy of the reverberant tail relative to the unit direct path.
double tail_energy(double t60);

// Per-frame decay rate that gives a 60 dB amplitude drop over t60.
double decay_for_t60(double t60, const StftConfig& cfg, int sample_rate);

// Subband parameters behind an exp_decay_subband RIR: unit band weights,
// decays jittered by up to 20% around decay_for_t60, uniform random phase.
RirParams sample_rir_params(const SceneSpec& spec, int channel, const StftConfig& cfg);

// Time-domain RIR of one channel. Channel c uses its own RNG stream derived
// from the scene seed so channels can be sampled independently.
Waveform sample_rir(const SceneSpec& spec, int channel);

struct Scene {
  MultiChannelWaveform mixture;
  Waveform direct;
  std::vector<Waveform> rirs;
};

Scene make_scene(const Waveform& clean, const SceneSpec& spec);

// Full linear convolution of x with h, truncated to x's length.
Waveform convolve_truncated(const Waveform& x, const Waveform& h);

// Pink noise, amplitude modulated at 4 Hz, scaled to standard deviation 0.05.
Waveform speech_surrogate(Eigen::Index length, double sample_rate, std::uint64_t seed);

}  // namespace usddps
