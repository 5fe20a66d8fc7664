#pragma once

#include <filesystem>

#include "anclab/dsp/signal.hpp"

namespace anclab::eval {

inline constexpr double kWavSampleRate = 13000.0;

enum class WavFormat { kFloat32, kPcm16 };

// Mono 16-bit PCM (scaled by 1/32768) or 32-bit float at 13 kHz. Other rates
// throw "resample externally"; more than one channel throws.
dsp::Signal read_wav(const std::filesystem::path& path);

// Float32 stores each sample cast to float. PCM16 rounds and clips to
// [-32768, 32767].
void write_wav(const dsp::Signal& signal, const std::filesystem::path& path,
               WavFormat format = WavFormat::kFloat32);

}  // namespace anclab::eval
