#pragma once

#include <filesystem>
#include <string_view>

#include "dbl/audio.hpp"

namespace dbl {

enum class WavFormat { pcm16, pcm24, float32 };

WavFormat parse_wav_format(std::string_view name);

// RIFF/WAVE, little-endian. Accepts integer PCM (16/24 bit) and 32-bit IEEE
// float, including WAVE_FORMAT_EXTENSIBLE wrappers of those two codecs.
// Integer full scale maps to +/-1.0 with divisor 2^(bits-1).
AudioClip read_wav(const std::filesystem::path& path);

// Integer formats scale by 2^(bits-1) and clamp symmetrically, so 1.0 writes
// as 32767 in pcm16. float32 stores samples as-is.
void write_wav(const AudioClip& clip, const std::filesystem::path& path, WavFormat format = WavFormat::float32);

}  // namespace dbl
