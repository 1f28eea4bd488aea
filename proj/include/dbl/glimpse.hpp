#pragma once

#include <cstddef>
#include <vector>

#include "dbl/audio.hpp"

namespace dbl {

inline constexpr double kLevelFloorDb = -100.0;

struct OimConfig {
    int bands = 34;
    double fmin_hz = 100.0;
    double fmax_hz = 7500.0;
    double frame_ms = 10.0;
    double glimpse_db = 3.0;
    std::vector<double> weights;  // empty means uniform band weights

    void validate() const;
    double band_weight(std::size_t band) const { return weights.empty() ? 1.0 : weights[band]; }
};

// Glasberg & Moore ERB-rate scale.
double erb_hz(double f_hz);
double erb_rate(double f_hz);
double erb_rate_to_hz(double rate);
std::vector<double> erb_center_frequencies(int bands, double fmin_hz, double fmax_hz);

// Per (channel, band, frame) envelope level in dB. `raw` keeps the unfloored
// value (-inf for an exactly silent unit) so that gain shifts can be applied
// before flooring.
struct ExcitationPattern {
    std::vector<double> center_hz;
    std::size_t channels = 0;
    std::size_t frames = 0;
    double frame_rate = 100.0;
    std::vector<double> raw;

    std::size_t bands() const noexcept { return center_hz.size(); }
    std::size_t index(std::size_t ch, std::size_t band, std::size_t frame) const noexcept {
        return (ch * bands() + band) * frames + frame;
    }
    double raw_level(std::size_t ch, std::size_t band, std::size_t frame) const { return raw[index(ch, band, frame)]; }
    double level(std::size_t ch, std::size_t band, std::size_t frame) const;
};

// Sampled impulse response of one gammatone channel, as produced by the
// recursive implementation (used to validate it against a direct FIR form).
std::vector<double> gammatone_impulse_response(double center_hz, int sample_rate, std::size_t length);

// Gammatone filterbank (4th order) -> half-wave rectification -> 40 Hz
// 2nd-order low-pass -> frame RMS -> dB.
ExcitationPattern excitation(const AudioClip& clip, const OimConfig& config = {});

struct GlimpseScore {
    double value = 0.0;
    std::size_t glimpsed_units = 0;
    std::size_t total_units = 0;
};

// Better-ear glimpse proportion from two excitation patterns. `bg_shift_db`
// is added to every raw background level before flooring.
GlimpseScore glimpse_proportion(const ExcitationPattern& fg, const ExcitationPattern& bg, const OimConfig& config,
                                double bg_shift_db = 0.0);

GlimpseScore glimpse_proportion(const AudioClip& fg, const AudioClip& bg, const OimConfig& config = {});

// glimpse_proportion(fg, apply_gain_db(bg, -beta)), computed from scratch.
GlimpseScore score_at_attenuation(const StemPair& stems, double beta_db, const OimConfig& config = {});

// Caches both excitation patterns so that sweeping the background
// attenuation costs one pass over the units per evaluation.
class GlimpseScorer {
public:
    GlimpseScorer(const StemPair& stems, OimConfig config = {});

    GlimpseScore score(double beta_db) const;
    const OimConfig& config() const noexcept { return config_; }

private:
    OimConfig config_;
    ExcitationPattern fg_;
    ExcitationPattern bg_;
};

}  // namespace dbl
