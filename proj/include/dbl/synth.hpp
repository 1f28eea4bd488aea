#pragma once

#include <cstdint>
#include <random>

#include "dbl/audio.hpp"

// Deterministic synthetic stems for tests, demos and the acceptance suite.
// Only raw mt19937_64 output is consumed, so a seed yields the same samples
// with any standard library.
namespace dbl::synth {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform();  // [0, 1)
    double gaussian();
    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

AudioClip white_noise(double seconds, std::size_t channels, std::uint64_t seed, double rms = 0.1,
                      int sample_rate = 48000);

// Stationary noise with a long-term speech-like spectrum (band-limited, tilted).
AudioClip speech_shaped_noise(double seconds, std::size_t channels, std::uint64_t seed, double rms = 0.1,
                              int sample_rate = 48000);

// Speech-shaped noise with a syllabic envelope over a room-tone bed,
// identical in every channel (centre-panned dialogue).
AudioClip speech_like(double seconds, std::size_t channels, std::uint64_t seed, int sample_rate = 48000);

// Harmonic tones changing every half second.
AudioClip music_like(double seconds, std::size_t channels, std::uint64_t seed, int sample_rate = 48000);

// Slowly modulated pink-ish noise, independent per channel.
AudioClip ambience_like(double seconds, std::size_t channels, std::uint64_t seed, int sample_rate = 48000);

}  // namespace dbl::synth
