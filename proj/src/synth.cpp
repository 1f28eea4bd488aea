#include "dbl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dbl::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::size_t sample_count(double seconds, int sample_rate) {
    return static_cast<std::size_t>(std::llround(seconds * sample_rate));
}

void normalize_rms(Channel& ch, double target) {
    double e = 0.0;
    for (double x : ch) e += x * x;
    if (e <= 0.0) return;
    const double g = target / std::sqrt(e / static_cast<double>(ch.size()));
    for (double& x : ch) x *= g;
}

// One-pole low-pass and high-pass sections used for spectral shaping.
void one_pole_lowpass(Channel& ch, double cutoff, int fs) {
    const double k = std::exp(-kTwoPi * cutoff / fs);
    double y = 0.0;
    for (double& x : ch) {
        y = (1.0 - k) * x + k * y;
        x = y;
    }
}

void one_pole_highpass(Channel& ch, double cutoff, int fs) {
    const double k = std::exp(-kTwoPi * cutoff / fs);
    double y = 0.0, prev = 0.0;
    for (double& x : ch) {
        y = k * (y + x - prev);
        prev = x;
        x = y;
    }
}

Channel shaped_noise(std::size_t n, Rng& rng, int fs) {
    Channel ch(n);
    for (double& x : ch) x = rng.gaussian();
    one_pole_highpass(ch, 120.0, fs);
    one_pole_lowpass(ch, 900.0, fs);
    return ch;
}

std::vector<Channel> replicate(const Channel& ch, std::size_t channels) {
    return std::vector<Channel>(channels, ch);
}

}  // namespace

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return r * std::cos(kTwoPi * u2);
}

AudioClip white_noise(double seconds, std::size_t channels, std::uint64_t seed, double rms, int sample_rate) {
    Rng rng(seed);
    const std::size_t n = sample_count(seconds, sample_rate);
    std::vector<Channel> out(channels, Channel(n));
    for (auto& ch : out) {
        for (double& x : ch) x = rms * rng.gaussian();
    }
    return AudioClip(std::move(out), sample_rate);
}

AudioClip speech_shaped_noise(double seconds, std::size_t channels, std::uint64_t seed, double rms,
                              int sample_rate) {
    Rng rng(seed);
    const std::size_t n = sample_count(seconds, sample_rate);
    std::vector<Channel> out;
    for (std::size_t c = 0; c < channels; ++c) {
        Channel ch = shaped_noise(n, rng, sample_rate);
        normalize_rms(ch, rms);
        out.push_back(std::move(ch));
    }
    return AudioClip(std::move(out), sample_rate);
}

AudioClip speech_like(double seconds, std::size_t channels, std::uint64_t seed, int sample_rate) {
    Rng rng(seed);
    const std::size_t n = sample_count(seconds, sample_rate);
    Channel carrier = shaped_noise(n, rng, sample_rate);

    // Alternate talk spurts (1.2-2.5 s) with pauses (0.3-0.7 s); syllables at ~4 Hz.
    Channel env(n, 0.0);
    std::size_t pos = static_cast<std::size_t>(0.1 * sample_rate);
    while (pos < n) {
        const auto spurt = static_cast<std::size_t>((1.2 + 1.3 * rng.uniform()) * sample_rate);
        const std::size_t end = std::min(n, pos + spurt);
        std::size_t s = pos;
        while (s < end) {
            const auto syl = static_cast<std::size_t>((0.18 + 0.12 * rng.uniform()) * sample_rate);
            const double amp = 0.4 + 0.6 * rng.uniform();
            const std::size_t syl_end = std::min(end, s + syl);
            for (std::size_t i = s; i < syl_end; ++i) {
                const double phase = static_cast<double>(i - s) / static_cast<double>(syl);
                env[i] = amp * std::sin(std::numbers::pi * phase);
            }
            s = syl_end;
        }
        pos = end + static_cast<std::size_t>((0.3 + 0.4 * rng.uniform()) * sample_rate);
    }
    for (std::size_t i = 0; i < n; ++i) carrier[i] *= env[i];
    normalize_rms(carrier, 0.08);
    // Room tone 20 dB down; pauses are never digital silence.
    for (double& x : carrier) x += 8e-3 * rng.gaussian();
    return AudioClip(replicate(carrier, channels), sample_rate);
}

AudioClip music_like(double seconds, std::size_t channels, std::uint64_t seed, int sample_rate) {
    Rng rng(seed);
    const std::size_t n = sample_count(seconds, sample_rate);
    static constexpr double kScale[] = {0, 2, 4, 5, 7, 9, 11};
    const auto note_len = static_cast<std::size_t>(0.5 * sample_rate);

    std::vector<Channel> out(channels, Channel(n, 0.0));
    for (std::size_t start = 0; start < n; start += note_len) {
        const std::size_t end = std::min(n, start + note_len);
        for (int voice = 0; voice < 3; ++voice) {
            const int degree = static_cast<int>(rng.uniform() * 7.0);
            const int octave = voice == 0 ? -2 : static_cast<int>(rng.uniform() * 2.0) - 1;
            const double f0 = 440.0 * std::pow(2.0, (kScale[degree] + 12.0 * octave) / 12.0);
            const double pan = rng.uniform();
            for (int h = 1; h <= 6; ++h) {
                const double fh = f0 * h;
                if (fh > 0.45 * sample_rate) break;
                const double amp = 0.3 / (h * (voice + 1.0));
                for (std::size_t i = start; i < end; ++i) {
                    const double t = static_cast<double>(i - start) / sample_rate;
                    const double v = amp * std::exp(-3.0 * t) * std::sin(kTwoPi * fh * t);
                    for (std::size_t c = 0; c < channels; ++c) {
                        const double g = channels == 1 ? 1.0 : (c == 0 ? 1.0 - 0.5 * pan : 0.5 + 0.5 * pan);
                        out[c][i] += g * v;
                    }
                }
            }
        }
    }
    for (auto& ch : out) normalize_rms(ch, 0.08);
    return AudioClip(std::move(out), sample_rate);
}

AudioClip ambience_like(double seconds, std::size_t channels, std::uint64_t seed, int sample_rate) {
    Rng rng(seed);
    const std::size_t n = sample_count(seconds, sample_rate);
    std::vector<Channel> out;
    const double mod_rate = 0.2 + 0.3 * rng.uniform();
    for (std::size_t c = 0; c < channels; ++c) {
        Channel ch(n);
        for (double& x : ch) x = rng.gaussian();
        // Sum of one-pole sections approximates a -3 dB/octave slope.
        Channel lo = ch, mid = ch;
        one_pole_lowpass(lo, 200.0, sample_rate);
        one_pole_lowpass(mid, 2000.0, sample_rate);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / sample_rate;
            ch[i] = (3.0 * lo[i] + mid[i] + 0.2 * ch[i]) * (1.0 + 0.3 * std::sin(kTwoPi * mod_rate * t));
        }
        one_pole_highpass(ch, 40.0, sample_rate);
        normalize_rms(ch, 0.08);
        out.push_back(std::move(ch));
    }
    return AudioClip(std::move(out), sample_rate);
}

}  // namespace dbl::synth
