#pragma once

#include <cstddef>
#include <memory>

#include "dbl/audio.hpp"
#include "dbl/loudness.hpp"

namespace dbl {

inline constexpr std::size_t kDefaultFilterTaps = 512;

struct Decomposition {
    AudioClip fg_part;
    AudioClip bg_part;
    AudioClip artifact;
    std::size_t filter_len = 0;
};

// Least-squares projection onto the span of 0..filter_len-1 sample delays of
// every reference channel (FG and BG channels jointly). Delayed references are
// truncated to the signal length, so the decomposition is exact in R^N:
// fg_part + bg_part + artifact == signal and the artifact is orthogonal to
// every delayed reference up to the Tikhonov term.
//
// The regularized Gram matrix depends only on the references, so one
// Projector factorizes once and serves any number of signals.
class Projector {
public:
    explicit Projector(const StemPair& refs, std::size_t filter_len = kDefaultFilterTaps);
    ~Projector();
    Projector(Projector&&) noexcept;
    Projector& operator=(Projector&&) noexcept;

    Decomposition project(const AudioClip& signal) const;

    std::size_t filter_len() const noexcept;
    // Diagonal loading actually used (after any retries).
    double regularization() const noexcept;

private:
    struct State;
    std::unique_ptr<State> state_;
};

Decomposition project(const AudioClip& signal, const StemPair& refs, std::size_t filter_len = kDefaultFilterTaps);

// LD between the FG and BG parts of an existing decomposition of `mix`.
// NoSignal when the BG part is at or below -120 dB re the mix.
double projected_ld(const Decomposition& parts, const AudioClip& mix, const GatingMask& mask);

// LD between the projected FG and BG components of `mix`.
double projected_ld(const AudioClip& mix, const StemPair& refs, const GatingMask& mask,
                    std::size_t filter_len = kDefaultFilterTaps);

}  // namespace dbl
