#include "dbl/wav.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "dbl/error.hpp"

namespace dbl {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t le32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

struct FmtChunk {
    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t bits = 0;
};

FmtChunk parse_fmt(const std::uint8_t* p, std::uint32_t size) {
    if (size < 16) throw Error(ErrorCode::CorruptHeader, "fmt chunk too short");
    FmtChunk fmt;
    fmt.format = le16(p);
    fmt.channels = le16(p + 2);
    fmt.sample_rate = le32(p + 4);
    fmt.bits = le16(p + 14);
    if (fmt.format == kFormatExtensible) {
        if (size < 40) throw Error(ErrorCode::CorruptHeader, "extensible fmt chunk too short");
        // The first two bytes of the subformat GUID carry the codec tag.
        fmt.format = le16(p + 24);
    }
    if (fmt.channels == 0) throw Error(ErrorCode::CorruptHeader, "zero channels");
    if (fmt.sample_rate == 0) throw Error(ErrorCode::CorruptHeader, "zero sample rate");
    return fmt;
}

}  // namespace

WavFormat parse_wav_format(std::string_view name) {
    if (name == "pcm16") return WavFormat::pcm16;
    if (name == "pcm24") return WavFormat::pcm24;
    if (name == "float32") return WavFormat::float32;
    throw Error(ErrorCode::InvalidArgument, "unknown wav format '" + std::string(name) + "'");
}

AudioClip read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw Error(ErrorCode::CorruptHeader, path.string() + " is not RIFF/WAVE");
    }

    FmtChunk fmt;
    bool have_fmt = false;
    const std::uint8_t* data = nullptr;
    std::size_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::uint8_t* chunk = bytes.data() + pos;
        const std::uint32_t size = le32(chunk + 4);
        const std::size_t body = pos + 8;
        const std::size_t available = bytes.size() - body;
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (size > available) throw Error(ErrorCode::CorruptHeader, "truncated fmt chunk");
            fmt = parse_fmt(bytes.data() + body, size);
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = bytes.data() + body;
            // Streaming writers sometimes leave the size unpatched; trust the file length.
            data_size = std::min<std::size_t>(size, available);
            break;
        }
        pos = body + size + (size & 1U);
    }
    if (!have_fmt) throw Error(ErrorCode::CorruptHeader, "missing fmt chunk");
    if (data == nullptr) throw Error(ErrorCode::CorruptHeader, "missing data chunk");

    int bytes_per_sample = 0;
    if (fmt.format == kFormatPcm && (fmt.bits == 16 || fmt.bits == 24)) {
        bytes_per_sample = fmt.bits / 8;
    } else if (fmt.format == kFormatFloat && fmt.bits == 32) {
        bytes_per_sample = 4;
    } else {
        throw Error(ErrorCode::UnsupportedFormat,
                    "codec " + std::to_string(fmt.format) + " with " + std::to_string(fmt.bits) + " bits");
    }

    const std::size_t frame_bytes = static_cast<std::size_t>(bytes_per_sample) * fmt.channels;
    const std::size_t frames = data_size / frame_bytes;
    std::vector<Channel> channels(fmt.channels, Channel(frames));
    for (std::size_t n = 0; n < frames; ++n) {
        const std::uint8_t* frame = data + n * frame_bytes;
        for (std::size_t c = 0; c < fmt.channels; ++c) {
            const std::uint8_t* s = frame + c * bytes_per_sample;
            double value = 0.0;
            switch (bytes_per_sample) {
            case 2:
                value = static_cast<std::int16_t>(le16(s)) / 32768.0;
                break;
            case 3: {
                std::int32_t v = s[0] | (s[1] << 8) | (s[2] << 16);
                if (v & 0x800000) v -= 0x1000000;
                value = v / 8388608.0;
                break;
            }
            default:
                value = std::bit_cast<float>(le32(s));
                break;
            }
            channels[c][n] = value;
        }
    }
    return AudioClip(std::move(channels), static_cast<int>(fmt.sample_rate));
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path, WavFormat format) {
    if (clip.channel_count() == 0) throw Error(ErrorCode::InvalidArgument, "clip has no channels");

    const std::uint16_t bits = format == WavFormat::pcm16 ? 16 : (format == WavFormat::pcm24 ? 24 : 32);
    const std::uint16_t codec = format == WavFormat::float32 ? kFormatFloat : kFormatPcm;
    const auto channels = static_cast<std::uint16_t>(clip.channel_count());
    const std::uint16_t block_align = static_cast<std::uint16_t>(channels * bits / 8);
    const std::uint64_t data_size = static_cast<std::uint64_t>(clip.length()) * block_align;
    if (data_size > 0xFFFFFFFFULL - 36) throw Error(ErrorCode::IoError, "clip too long for RIFF");

    std::vector<std::uint8_t> out;
    out.reserve(44 + data_size);
    put_tag(out, "RIFF");
    put32(out, static_cast<std::uint32_t>(36 + data_size));
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put32(out, 16);
    put16(out, codec);
    put16(out, channels);
    put32(out, static_cast<std::uint32_t>(clip.sample_rate()));
    put32(out, static_cast<std::uint32_t>(clip.sample_rate()) * block_align);
    put16(out, block_align);
    put16(out, bits);
    put_tag(out, "data");
    put32(out, static_cast<std::uint32_t>(data_size));

    for (std::size_t n = 0; n < clip.length(); ++n) {
        for (std::size_t c = 0; c < channels; ++c) {
            const double x = clip.channel(c)[n];
            switch (format) {
            case WavFormat::pcm16: {
                const double v = std::clamp(std::round(x * 32768.0), -32767.0, 32767.0);
                put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
                break;
            }
            case WavFormat::pcm24: {
                const double v = std::clamp(std::round(x * 8388608.0), -8388607.0, 8388607.0);
                const auto u = static_cast<std::uint32_t>(static_cast<std::int32_t>(v));
                out.push_back(static_cast<std::uint8_t>(u & 0xFF));
                out.push_back(static_cast<std::uint8_t>((u >> 8) & 0xFF));
                out.push_back(static_cast<std::uint8_t>((u >> 16) & 0xFF));
                break;
            }
            case WavFormat::float32:
                put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
                break;
            }
        }
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!file) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace dbl
