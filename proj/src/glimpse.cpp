#include "dbl/glimpse.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>

#include "biquad.hpp"
#include "dbl/error.hpp"
#include "dbl/loudness.hpp"

namespace dbl {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kBandwidthFactor = 1.019;
constexpr double kEnvelopeCutoffHz = 40.0;

struct GammatoneCoeffs {
    std::complex<double> pole;
    // Numerator taps at delays 1..3, already scaled for unity gain at the centre frequency.
    std::complex<double> b1, b2, b3;
};

// Impulse invariance of n^3 a^n e^{jwn}:
//   sum n^3 p^n z^-n = (p z^-1 + 4p^2 z^-2 + p^3 z^-3) / (1 - p z^-1)^4.
// The real part of the output is the sampled gammatone n^3 a^n cos(wn).
GammatoneCoeffs gammatone_coeffs(double center_hz, int sample_rate) {
    const double a = std::exp(-kTwoPi * kBandwidthFactor * erb_hz(center_hz) / sample_rate);
    const std::complex<double> p = std::polar(a, kTwoPi * center_hz / sample_rate);
    // Complex gain at the centre frequency is a(1+4a+a^2)/(1-a)^4; the real
    // part carries half of it for a cosine input.
    const double norm = 2.0 * std::pow(1.0 - a, 4) / (a * (1.0 + 4.0 * a + a * a));
    return {p, norm * p, norm * 4.0 * p * p, norm * p * p * p};
}

// Runs one gammatone channel over x, writing the real output to y.
void run_gammatone(const GammatoneCoeffs& g, std::span<const double> x, std::span<double> y) {
    const double pr = g.pole.real(), pi = g.pole.imag();
    double x1 = 0.0, x2 = 0.0, x3 = 0.0;
    double s1r = 0.0, s1i = 0.0, s2r = 0.0, s2i = 0.0, s3r = 0.0, s3i = 0.0, s4r = 0.0, s4i = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
        const double vr = g.b1.real() * x1 + g.b2.real() * x2 + g.b3.real() * x3;
        const double vi = g.b1.imag() * x1 + g.b2.imag() * x2 + g.b3.imag() * x3;
        double tr = vr + pr * s1r - pi * s1i;
        double ti = vi + pr * s1i + pi * s1r;
        s1r = tr, s1i = ti;
        tr = s1r + pr * s2r - pi * s2i;
        ti = s1i + pr * s2i + pi * s2r;
        s2r = tr, s2i = ti;
        tr = s2r + pr * s3r - pi * s3i;
        ti = s2i + pr * s3i + pi * s3r;
        s3r = tr, s3i = ti;
        tr = s3r + pr * s4r - pi * s4i;
        ti = s3i + pr * s4i + pi * s4r;
        s4r = tr, s4i = ti;
        y[n] = s4r;
        x3 = x2;
        x2 = x1;
        x1 = x[n];
    }
}

std::size_t frame_length(const OimConfig& config, int sample_rate) {
    return static_cast<std::size_t>(std::lround(config.frame_ms * 1e-3 * sample_rate));
}

double floored(double raw) { return std::max(raw, kLevelFloorDb); }

}  // namespace

void OimConfig::validate() const {
    if (bands < 1) throw Error(ErrorCode::InvalidConfig, "bands must be >= 1");
    if (!(fmin_hz > 0.0) || !(fmax_hz > fmin_hz)) throw Error(ErrorCode::InvalidConfig, "need 0 < fmin_hz < fmax_hz");
    if (fmax_hz >= kLoudnessRate / 2.0) throw Error(ErrorCode::InvalidConfig, "fmax_hz must lie below Nyquist");
    if (!(frame_ms > 0.0)) throw Error(ErrorCode::InvalidConfig, "frame_ms must be positive");
    if (!std::isfinite(glimpse_db)) throw Error(ErrorCode::InvalidConfig, "glimpse_db must be finite");
    if (!weights.empty()) {
        if (weights.size() != static_cast<std::size_t>(bands)) {
            throw Error(ErrorCode::InvalidConfig, "weights must have one entry per band");
        }
        double total = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::InvalidConfig, "weights must be >= 0");
            total += w;
        }
        if (!(total > 0.0)) throw Error(ErrorCode::InvalidConfig, "weights sum to zero");
    }
}

double erb_hz(double f_hz) { return 24.7 * (4.37e-3 * f_hz + 1.0); }

double erb_rate(double f_hz) { return 21.4 * std::log10(4.37e-3 * f_hz + 1.0); }

double erb_rate_to_hz(double rate) { return (std::pow(10.0, rate / 21.4) - 1.0) / 4.37e-3; }

std::vector<double> erb_center_frequencies(int bands, double fmin_hz, double fmax_hz) {
    std::vector<double> cf(static_cast<std::size_t>(bands));
    if (bands == 1) {
        cf[0] = erb_rate_to_hz(0.5 * (erb_rate(fmin_hz) + erb_rate(fmax_hz)));
        return cf;
    }
    const double lo = erb_rate(fmin_hz), hi = erb_rate(fmax_hz);
    for (int b = 0; b < bands; ++b) cf[static_cast<std::size_t>(b)] = erb_rate_to_hz(lo + (hi - lo) * b / (bands - 1));
    // Pin the end points exactly.
    cf.front() = fmin_hz;
    cf.back() = fmax_hz;
    return cf;
}

double ExcitationPattern::level(std::size_t ch, std::size_t band, std::size_t frame) const {
    return floored(raw_level(ch, band, frame));
}

std::vector<double> gammatone_impulse_response(double center_hz, int sample_rate, std::size_t length) {
    std::vector<double> impulse(length, 0.0), out(length, 0.0);
    if (length > 0) impulse[0] = 1.0;
    run_gammatone(gammatone_coeffs(center_hz, sample_rate), impulse, out);
    return out;
}

ExcitationPattern excitation(const AudioClip& clip, const OimConfig& config) {
    config.validate();
    if (clip.sample_rate() != kLoudnessRate) {
        throw Error(ErrorCode::UnsupportedRate, "excitation requires 48000 Hz, got " + std::to_string(clip.sample_rate()));
    }
    const int fs = clip.sample_rate();
    const std::size_t hop = frame_length(config, fs);
    const std::size_t n = clip.length();

    ExcitationPattern pattern;
    pattern.center_hz = erb_center_frequencies(config.bands, config.fmin_hz, config.fmax_hz);
    pattern.channels = clip.channel_count();
    pattern.frames = (n + hop - 1) / hop;
    pattern.frame_rate = static_cast<double>(fs) / static_cast<double>(hop);
    pattern.raw.assign(pattern.channels * pattern.bands() * pattern.frames, -std::numeric_limits<double>::infinity());

    const detail::Biquad smoother = detail::butterworth_lowpass(kEnvelopeCutoffHz, fs);
    std::vector<double> band_signal(n);
    for (std::size_t ch = 0; ch < pattern.channels; ++ch) {
        for (std::size_t band = 0; band < pattern.bands(); ++band) {
            run_gammatone(gammatone_coeffs(pattern.center_hz[band], fs), clip.channel(ch), band_signal);
            for (double& v : band_signal) v = std::max(v, 0.0);
            smoother.run(band_signal);
            for (std::size_t f = 0; f < pattern.frames; ++f) {
                const std::size_t start = f * hop;
                const std::size_t end = std::min(n, start + hop);
                double sum = 0.0;
                for (std::size_t i = start; i < end; ++i) sum += band_signal[i] * band_signal[i];
                const double ms = sum / static_cast<double>(end - start);
                if (ms > 0.0) pattern.raw[pattern.index(ch, band, f)] = 10.0 * std::log10(ms);
            }
        }
    }
    return pattern;
}

GlimpseScore glimpse_proportion(const ExcitationPattern& fg, const ExcitationPattern& bg, const OimConfig& config,
                                double bg_shift_db) {
    config.validate();
    if (fg.channels != bg.channels || fg.frames != bg.frames || fg.bands() != bg.bands()) {
        throw Error(ErrorCode::ShapeMismatch, "excitation patterns differ in shape");
    }
    if (fg.bands() != static_cast<std::size_t>(config.bands)) {
        throw Error(ErrorCode::ShapeMismatch, "excitation band count differs from config");
    }
    constexpr double kInf = std::numeric_limits<double>::infinity();

    GlimpseScore score;
    double weight_glimpsed = 0.0, weight_total = 0.0;
    for (std::size_t band = 0; band < fg.bands(); ++band) {
        const double w = config.band_weight(band);
        double band_glimpsed = 0.0, band_total = 0.0;
        for (std::size_t f = 0; f < fg.frames; ++f) {
            bool counted = false;
            double best = -kInf;
            for (std::size_t ch = 0; ch < fg.channels; ++ch) {
                const double fl = fg.level(ch, band, f);
                if (fl <= kLevelFloorDb) continue;
                counted = true;
                const double bl = floored(bg.raw_level(ch, band, f) + bg_shift_db);
                const double snr = bl <= kLevelFloorDb ? kInf : fl - bl;
                best = std::max(best, snr);
            }
            if (!counted) continue;
            ++score.total_units;
            band_total += w;
            if (best >= config.glimpse_db) {
                ++score.glimpsed_units;
                band_glimpsed += w;
            }
        }
        weight_glimpsed += band_glimpsed;
        weight_total += band_total;
    }
    if (score.total_units == 0 || !(weight_total > 0.0)) {
        throw Error(ErrorCode::NoForeground, "foreground is at the level floor everywhere");
    }
    score.value = weight_glimpsed / weight_total;
    return score;
}

GlimpseScore glimpse_proportion(const AudioClip& fg, const AudioClip& bg, const OimConfig& config) {
    require_same_shape(fg, bg);
    return glimpse_proportion(excitation(fg, config), excitation(bg, config), config);
}

GlimpseScore score_at_attenuation(const StemPair& stems, double beta_db, const OimConfig& config) {
    return glimpse_proportion(stems.fg, apply_gain_db(stems.bg, -beta_db), config);
}

GlimpseScorer::GlimpseScorer(const StemPair& stems, OimConfig config)
    : config_(std::move(config)), fg_(excitation(stems.fg, config_)), bg_(excitation(stems.bg, config_)) {
    require_same_shape(stems.fg, stems.bg);
}

GlimpseScore GlimpseScorer::score(double beta_db) const { return glimpse_proportion(fg_, bg_, config_, -beta_db); }

}  // namespace dbl
