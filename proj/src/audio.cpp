#include "dbl/audio.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dbl/error.hpp"

namespace dbl {

AudioClip::AudioClip(std::vector<Channel> channels, int sample_rate)
    : channels_(std::move(channels)), sample_rate_(sample_rate) {
    if (sample_rate_ <= 0) {
        throw Error(ErrorCode::InvalidArgument, "sample rate must be positive");
    }
    for (const auto& ch : channels_) {
        if (ch.size() != channels_.front().size()) {
            throw Error(ErrorCode::ShapeMismatch, "channels differ in length");
        }
    }
}

AudioClip AudioClip::zeros(std::size_t channels, std::size_t length, int sample_rate) {
    return AudioClip(std::vector<Channel>(channels, Channel(length, 0.0)), sample_rate);
}

double AudioClip::peak() const noexcept {
    double p = 0.0;
    for (const auto& ch : channels_) {
        for (double x : ch) p = std::max(p, std::abs(x));
    }
    return p;
}

StemPair::StemPair(AudioClip fg_clip, AudioClip bg_clip) : fg(std::move(fg_clip)), bg(std::move(bg_clip)) {
    require_same_shape(fg, bg);
}

void require_same_shape(const AudioClip& a, const AudioClip& b) {
    if (a.sample_rate() != b.sample_rate()) {
        throw Error(ErrorCode::ShapeMismatch, "sample rates differ (" + std::to_string(a.sample_rate()) + " vs " +
                                                  std::to_string(b.sample_rate()) + ")");
    }
    if (a.channel_count() != b.channel_count()) {
        throw Error(ErrorCode::ShapeMismatch, "channel counts differ");
    }
    if (a.length() != b.length()) {
        throw Error(ErrorCode::ShapeMismatch, "lengths differ (" + std::to_string(a.length()) + " vs " +
                                                  std::to_string(b.length()) + ")");
    }
}

double db_to_gain(double db) noexcept { return std::pow(10.0, db / 20.0); }

AudioClip apply_gain_db(const AudioClip& clip, double gain_db) {
    if (!std::isfinite(gain_db)) throw Error(ErrorCode::InvalidArgument, "gain must be finite");
    if (gain_db == 0.0) return clip;
    return scale(clip, db_to_gain(gain_db));
}

AudioClip scale(const AudioClip& clip, double factor) {
    std::vector<Channel> out = clip.channels();
    for (auto& ch : out) {
        for (double& x : ch) x *= factor;
    }
    return AudioClip(std::move(out), clip.sample_rate());
}

namespace {

template <typename Op>
AudioClip zip(const AudioClip& a, const AudioClip& b, Op op) {
    require_same_shape(a, b);
    std::vector<Channel> out = a.channels();
    for (std::size_t c = 0; c < out.size(); ++c) {
        auto rhs = b.channel(c);
        for (std::size_t n = 0; n < out[c].size(); ++n) out[c][n] = op(out[c][n], rhs[n]);
    }
    return AudioClip(std::move(out), a.sample_rate());
}

}  // namespace

AudioClip mix(const AudioClip& a, const AudioClip& b) {
    return zip(a, b, [](double x, double y) { return x + y; });
}

AudioClip subtract(const AudioClip& a, const AudioClip& b) {
    return zip(a, b, [](double x, double y) { return x - y; });
}

double energy(const AudioClip& clip) noexcept {
    double e = 0.0;
    for (const auto& ch : clip.channels()) {
        for (double x : ch) e += x * x;
    }
    return e;
}

double rms(const AudioClip& clip) noexcept {
    const double count = static_cast<double>(clip.length() * clip.channel_count());
    return count > 0 ? std::sqrt(energy(clip) / count) : 0.0;
}

}  // namespace dbl
