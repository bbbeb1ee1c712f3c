#pragma once

#include <string>

#include "usddps/audio.hpp"

namespace usddps {

enum class WavEncoding { kPcm16, kFloat32 };

// Reads 16-bit PCM or 32-bit IEEE float RIFF/WAVE files with any channel
// count. PCM samples are scaled by 1/32768. Throws IoError carrying the byte
// offset of the first malformed field.
MultiChannelWaveform read_wav(const std::string& path);

void write_wav(const std::string& path, const MultiChannelWaveform& x,
               WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace usddps
