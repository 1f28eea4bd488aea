#include "dbl/loudness.hpp"

#include <algorithm>
#include <span>
#include <cmath>
#include <string>

#include "biquad.hpp"
#include "dbl/error.hpp"

namespace dbl {

namespace {

constexpr double kLoudnessOffset = -0.691;

// ITU-R BS.1770 coefficients at 48 kHz.
constexpr detail::Biquad kPreFilter{{1.53512485958697, -2.69169618940638, 1.19839281085285},
                                    {-1.69065929318241, 0.73248077421585}};
constexpr detail::Biquad kRlbFilter{{1.0, -2.0, 1.0}, {-1.99004745483398, 0.99007225036621}};

// Sum of squares over [start, end) of one channel. Summed directly; prefix
// differences lose quiet blocks to cancellation.
double span_energy(std::span<const double> ch, std::size_t start, std::size_t end) {
    double e = 0.0;
    for (std::size_t n = start; n < end; ++n) e += ch[n] * ch[n];
    return e;
}

std::vector<BlockLoudness> block_loudness(const AudioClip& weighted) {
    const std::size_t length = weighted.length();
    const BlockGrid grid = block_grid(length, weighted.sample_rate());
    std::vector<BlockLoudness> blocks(grid.count);
    for (std::size_t b = 0; b < grid.count; ++b) {
        const std::size_t start = b * grid.hop;
        const std::size_t end = std::min(length, start + grid.block_len);
        double sum = 0.0;
        for (const auto& ch : weighted.channels()) sum += span_energy(ch, start, end) / static_cast<double>(end - start);
        blocks[b].start_s = static_cast<double>(start) / weighted.sample_rate();
        if (sum > 0.0) blocks[b].lufs = kLoudnessOffset + 10.0 * std::log10(sum);
    }
    return blocks;
}

void require_rate(const AudioClip& clip) {
    if (clip.sample_rate() != kLoudnessRate) {
        throw Error(ErrorCode::UnsupportedRate,
                    "loudness filters are defined for 48000 Hz, got " + std::to_string(clip.sample_rate()));
    }
}

}  // namespace

std::size_t GatingMask::active_count() const noexcept {
    return static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
}

BlockGrid block_grid(std::size_t length, int sample_rate) {
    BlockGrid grid;
    grid.block_len = static_cast<std::size_t>(std::lround(kBlockSeconds * sample_rate));
    grid.hop = static_cast<std::size_t>(std::lround(kHopSeconds * sample_rate));
    if (length == 0) return grid;
    grid.count = length < grid.block_len ? 1 : 1 + (length - grid.block_len) / grid.hop;
    return grid;
}

AudioClip k_weight(const AudioClip& clip) {
    require_rate(clip);
    std::vector<Channel> out = clip.channels();
    for (auto& ch : out) {
        kPreFilter.run(ch);
        kRlbFilter.run(ch);
    }
    return AudioClip(std::move(out), clip.sample_rate());
}

LoudnessReport integrated_loudness(const AudioClip& clip) {
    if (clip.empty()) throw Error(ErrorCode::NoSignal, "empty clip");
    const AudioClip weighted = k_weight(clip);

    LoudnessReport report;
    report.blocks = block_loudness(weighted);
    double sum = 0.0;
    for (const auto& ch : weighted.channels()) sum += span_energy(ch, 0, ch.size()) / static_cast<double>(clip.length());
    if (!(sum > 0.0)) throw Error(ErrorCode::NoSignal, "clip is silent");
    report.integrated_lufs = kLoudnessOffset + 10.0 * std::log10(sum);
    return report;
}

LoudnessReport integrated_loudness(const AudioClip& clip, const GatingMask& mask) {
    if (clip.empty()) throw Error(ErrorCode::NoSignal, "empty clip");
    if (mask.source_length != clip.length() || mask.sample_rate != clip.sample_rate()) {
        throw Error(ErrorCode::ShapeMismatch, "gating mask was built for a different clip shape");
    }
    const BlockGrid grid = block_grid(clip.length(), clip.sample_rate());
    if (mask.active.size() != grid.count) throw Error(ErrorCode::ShapeMismatch, "gating mask block count mismatch");
    if (mask.active_count() == 0) throw Error(ErrorCode::EmptyMask, "no active dialogue blocks");

    const AudioClip weighted = k_weight(clip);

    // Union of active block spans as disjoint [start, end) runs.
    std::size_t included = 0;
    std::vector<double> channel_sums(weighted.channel_count(), 0.0);
    std::size_t run_start = 0, run_end = 0;
    bool in_run = false;
    auto flush = [&] {
        if (!in_run) return;
        for (std::size_t c = 0; c < channel_sums.size(); ++c) channel_sums[c] += span_energy(weighted.channel(c), run_start, run_end);
        included += run_end - run_start;
        in_run = false;
    };
    for (std::size_t b = 0; b < grid.count; ++b) {
        if (!mask.active[b]) continue;
        const std::size_t start = b * grid.hop;
        const std::size_t end = std::min(clip.length(), start + grid.block_len);
        if (in_run && start <= run_end) {
            run_end = std::max(run_end, end);
        } else {
            flush();
            run_start = start;
            run_end = end;
            in_run = true;
        }
    }
    flush();

    LoudnessReport report;
    report.gated = true;
    report.blocks = block_loudness(weighted);
    double sum = 0.0;
    for (double s : channel_sums) sum += s / static_cast<double>(included);
    if (!(sum > 0.0)) throw Error(ErrorCode::NoSignal, "signal is silent inside the active dialogue region");
    report.integrated_lufs = kLoudnessOffset + 10.0 * std::log10(sum);
    return report;
}

GatingMask dialogue_activity(const AudioClip& fg, double threshold_rel) {
    const LoudnessReport report = integrated_loudness(fg);
    GatingMask mask;
    mask.source_length = fg.length();
    mask.sample_rate = fg.sample_rate();
    mask.threshold_rel = threshold_rel;
    mask.active.reserve(report.blocks.size());
    const double gate = report.integrated_lufs - threshold_rel;
    for (const auto& block : report.blocks) mask.active.push_back(block.lufs.has_value() && *block.lufs >= gate);
    return mask;
}

Normalized normalize_to(const AudioClip& clip, double target_lufs) {
    const double measured = integrated_loudness(clip).integrated_lufs;
    const double gain = target_lufs - measured;
    return {apply_gain_db(clip, gain), gain};
}

double measure_ld(const StemPair& stems, const GatingMask& mask) {
    require_same_shape(stems.fg, stems.bg);
    return integrated_loudness(stems.fg, mask).integrated_lufs - integrated_loudness(stems.bg, mask).integrated_lufs;
}

}  // namespace dbl
