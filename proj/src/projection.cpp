#include "dbl/projection.hpp"

#include <fftw3.h>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <complex>
#include <mutex>
#include <string>
#include <vector>

#include "dbl/error.hpp"

namespace dbl {

namespace {

constexpr double kRelativeLoading = 1e-9;
constexpr int kLoadingRetries = 3;

// FFTW planning is not thread-safe; execution with new-array functions is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

using Spectrum = std::vector<std::complex<double>>;

class RealFft {
public:
    explicit RealFft(std::size_t size) : size_(size), time_(size), freq_(size / 2 + 1) {
        std::lock_guard lock(planner_mutex());
        forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(size_), time_.data(),
                                        reinterpret_cast<fftw_complex*>(freq_.data()), FFTW_ESTIMATE);
        inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(size_), reinterpret_cast<fftw_complex*>(freq_.data()),
                                        time_.data(), FFTW_ESTIMATE);
    }
    ~RealFft() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(inverse_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    std::size_t size() const noexcept { return size_; }

    Spectrum forward(std::span<const double> x) {
        std::fill(time_.begin(), time_.end(), 0.0);
        std::copy(x.begin(), x.end(), time_.begin());
        fftw_execute_dft_r2c(forward_, time_.data(), reinterpret_cast<fftw_complex*>(freq_.data()));
        return freq_;
    }

    // Unnormalized inverse scaled by 1/size.
    std::vector<double> inverse(const Spectrum& spectrum) {
        freq_ = spectrum;
        fftw_execute_dft_c2r(inverse_, reinterpret_cast<fftw_complex*>(freq_.data()), time_.data());
        std::vector<double> out(time_);
        const double s = 1.0 / static_cast<double>(size_);
        for (double& v : out) v *= s;
        return out;
    }

private:
    std::size_t size_;
    std::vector<double> time_;
    Spectrum freq_;
    fftw_plan forward_ = nullptr;
    fftw_plan inverse_ = nullptr;
};

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// r(tau) = sum_m a[m + tau] b[m] for tau in [0, taps), from spectra A and B.
std::vector<double> correlate(RealFft& fft, const Spectrum& a, const Spectrum& b, std::size_t taps) {
    Spectrum prod(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) prod[i] = a[i] * std::conj(b[i]);
    std::vector<double> full = fft.inverse(prod);
    full.resize(taps);
    return full;
}

}  // namespace

struct Projector::State {
    std::size_t taps = 0;
    std::size_t length = 0;
    int sample_rate = 0;
    std::size_t fg_channels = 0;
    std::size_t bg_channels = 0;
    std::unique_ptr<RealFft> fft;
    std::vector<Spectrum> ref_spectra;  // fg channels first, then bg
    Eigen::LLT<Eigen::MatrixXd> llt;
    double loading = 0.0;

    std::size_t refs() const { return fg_channels + bg_channels; }
};

Projector::Projector(const StemPair& refs, std::size_t filter_len) : state_(std::make_unique<State>()) {
    require_same_shape(refs.fg, refs.bg);
    if (filter_len < 1) throw Error(ErrorCode::InvalidArgument, "filter_len must be >= 1");
    if (refs.fg.empty()) throw Error(ErrorCode::InvalidArgument, "empty references");

    State& s = *state_;
    s.taps = filter_len;
    s.length = refs.fg.length();
    s.sample_rate = refs.fg.sample_rate();
    s.fg_channels = refs.fg.channel_count();
    s.bg_channels = refs.bg.channel_count();
    s.fft = std::make_unique<RealFft>(next_pow2(s.length + s.taps));

    std::vector<std::span<const double>> signals;
    for (std::size_t c = 0; c < s.fg_channels; ++c) signals.push_back(refs.fg.channel(c));
    for (std::size_t c = 0; c < s.bg_channels; ++c) signals.push_back(refs.bg.channel(c));
    for (auto sig : signals) s.ref_spectra.push_back(s.fft->forward(sig));

    const std::size_t k_count = s.refs();
    const std::size_t taps = s.taps;
    const std::size_t n = s.length;
    Eigen::MatrixXd gram(k_count * taps, k_count * taps);

    // Entry ((k,t1),(l,t2)) = sum_{n<N} s_k[n-t1] s_l[n-t2]. Row t1 = 0 and
    // column t2 = 0 are plain correlations; moving down a diagonal drops the
    // product that falls off the end of the truncated window.
    for (std::size_t k = 0; k < k_count; ++k) {
        for (std::size_t l = k; l < k_count; ++l) {
            const std::vector<double> r_kl = correlate(*s.fft, s.ref_spectra[k], s.ref_spectra[l], taps);
            const std::vector<double> r_lk = correlate(*s.fft, s.ref_spectra[l], s.ref_spectra[k], taps);
            auto block = gram.block(k * taps, l * taps, taps, taps);
            for (std::size_t t = 0; t < taps; ++t) {
                block(0, t) = r_kl[t];
                block(t, 0) = r_lk[t];
            }
            const auto sk = signals[k];
            const auto sl = signals[l];
            for (std::size_t t1 = 1; t1 < taps; ++t1) {
                for (std::size_t t2 = 1; t2 < taps; ++t2) {
                    const double ak = n >= t1 ? sk[n - t1] : 0.0;
                    const double al = n >= t2 ? sl[n - t2] : 0.0;
                    block(t1, t2) = block(t1 - 1, t2 - 1) - ak * al;
                }
            }
            if (l != k) gram.block(l * taps, k * taps, taps, taps) = block.transpose();
        }
    }
    // Symmetrize diagonal blocks against accumulated rounding.
    gram = 0.5 * (gram + gram.transpose()).eval();

    const double scale = gram.trace() / static_cast<double>(gram.rows());
    if (!(scale > 0.0)) throw Error(ErrorCode::SingularSystem, "reference stems are all zero");

    s.loading = kRelativeLoading * scale;
    for (int attempt = 0; attempt <= kLoadingRetries; ++attempt) {
        Eigen::MatrixXd loaded = gram;
        loaded.diagonal().array() += s.loading;
        s.llt.compute(loaded);
        if (s.llt.info() == Eigen::Success) return;
        s.loading *= 10.0;
    }
    throw Error(ErrorCode::SingularSystem, "Cholesky failed after increasing diagonal loading");
}

Projector::~Projector() = default;
Projector::Projector(Projector&&) noexcept = default;
Projector& Projector::operator=(Projector&&) noexcept = default;

std::size_t Projector::filter_len() const noexcept { return state_->taps; }

double Projector::regularization() const noexcept { return state_->loading; }

Decomposition Projector::project(const AudioClip& signal) const {
    const State& s = *state_;
    if (signal.length() != s.length || signal.sample_rate() != s.sample_rate) {
        throw Error(ErrorCode::ShapeMismatch, "signal must match reference length and rate");
    }
    const std::size_t taps = s.taps;
    const std::size_t k_count = s.refs();

    std::vector<Channel> fg_out, bg_out, art_out;
    for (std::size_t ch = 0; ch < signal.channel_count(); ++ch) {
        const auto x = signal.channel(ch);
        const Spectrum xs = s.fft->forward(x);

        Eigen::VectorXd rhs(k_count * taps);
        for (std::size_t k = 0; k < k_count; ++k) {
            const std::vector<double> r = correlate(*s.fft, xs, s.ref_spectra[k], taps);
            for (std::size_t t = 0; t < taps; ++t) rhs(k * taps + t) = r[t];
        }
        const Eigen::VectorXd coeffs = s.llt.solve(rhs);

        // Filter each reference with its coefficients and sum per source.
        Spectrum fg_acc(s.ref_spectra.front().size()), bg_acc(fg_acc.size());
        for (std::size_t k = 0; k < k_count; ++k) {
            const Spectrum cs = s.fft->forward(std::span<const double>(coeffs.data() + k * taps, taps));
            Spectrum& acc = k < s.fg_channels ? fg_acc : bg_acc;
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += cs[i] * s.ref_spectra[k][i];
        }
        std::vector<double> fg = s.fft->inverse(fg_acc);
        std::vector<double> bg = s.fft->inverse(bg_acc);
        fg.resize(s.length);
        bg.resize(s.length);
        Channel art(s.length);
        for (std::size_t i = 0; i < s.length; ++i) art[i] = x[i] - fg[i] - bg[i];
        fg_out.push_back(std::move(fg));
        bg_out.push_back(std::move(bg));
        art_out.push_back(std::move(art));
    }
    return {AudioClip(std::move(fg_out), s.sample_rate), AudioClip(std::move(bg_out), s.sample_rate),
            AudioClip(std::move(art_out), s.sample_rate), taps};
}

Decomposition project(const AudioClip& signal, const StemPair& refs, std::size_t filter_len) {
    return Projector(refs, filter_len).project(signal);
}

double projected_ld(const Decomposition& parts, const AudioClip& mix, const GatingMask& mask) {
    // Background part at or below -120 dB re the mix is solver residue.
    if (!(energy(parts.bg_part) > 1e-12 * energy(mix))) {
        throw Error(ErrorCode::NoSignal, "no background component in the mix");
    }
    return measure_ld(StemPair(parts.fg_part, parts.bg_part), mask);
}

double projected_ld(const AudioClip& mix, const StemPair& refs, const GatingMask& mask, std::size_t filter_len) {
    return projected_ld(project(mix, refs, filter_len), mix, mask);
}

}  // namespace dbl
