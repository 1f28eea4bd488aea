#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dbl {

using Channel = std::vector<double>;

// Multichannel linear PCM signal, nominal range [-1, 1]. Immutable once built;
// every transform returns a new clip.
class AudioClip {
public:
    AudioClip() = default;
    AudioClip(std::vector<Channel> channels, int sample_rate);

    static AudioClip zeros(std::size_t channels, std::size_t length, int sample_rate);

    int sample_rate() const noexcept { return sample_rate_; }
    std::size_t channel_count() const noexcept { return channels_.size(); }
    std::size_t length() const noexcept { return channels_.empty() ? 0 : channels_.front().size(); }
    bool empty() const noexcept { return length() == 0 || channels_.empty(); }
    double duration_s() const noexcept { return static_cast<double>(length()) / sample_rate_; }

    std::span<const double> channel(std::size_t index) const { return channels_.at(index); }
    const std::vector<Channel>& channels() const noexcept { return channels_; }

    double peak() const noexcept;

private:
    std::vector<Channel> channels_;
    int sample_rate_ = 48000;
};

// Dialogue (foreground) and background stems of one item.
struct StemPair {
    AudioClip fg;
    AudioClip bg;

    StemPair() = default;
    StemPair(AudioClip fg_clip, AudioClip bg_clip);
};

// Throws ShapeMismatch unless rate, length and channel count agree.
void require_same_shape(const AudioClip& a, const AudioClip& b);

double db_to_gain(double db) noexcept;

AudioClip apply_gain_db(const AudioClip& clip, double gain_db);
AudioClip scale(const AudioClip& clip, double factor);
AudioClip mix(const AudioClip& a, const AudioClip& b);
AudioClip subtract(const AudioClip& a, const AudioClip& b);

// Sum over channels and samples of x^2.
double energy(const AudioClip& clip) noexcept;
double rms(const AudioClip& clip) noexcept;

}  // namespace dbl
