#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>

namespace dbl::detail {

// Direct form I biquad with a0 normalized to 1.
struct Biquad {
    std::array<double, 3> b{1.0, 0.0, 0.0};
    std::array<double, 2> a{0.0, 0.0};  // a1, a2

    void run(std::span<double> x) const {
        double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
        for (double& v : x) {
            const double y = b[0] * v + b[1] * x1 + b[2] * x2 - a[0] * y1 - a[1] * y2;
            x2 = x1;
            x1 = v;
            y2 = y1;
            y1 = y;
            v = y;
        }
    }

    // |H(e^{jw})| at frequency f for sample rate fs.
    double magnitude(double f, double fs) const {
        const double w = 2.0 * std::numbers::pi * f / fs;
        const double c1 = std::cos(w), s1 = std::sin(w), c2 = std::cos(2 * w), s2 = std::sin(2 * w);
        const double nr = b[0] + b[1] * c1 + b[2] * c2, ni = -(b[1] * s1 + b[2] * s2);
        const double dr = 1.0 + a[0] * c1 + a[1] * c2, di = -(a[0] * s1 + a[1] * s2);
        return std::sqrt((nr * nr + ni * ni) / (dr * dr + di * di));
    }
};

// 2nd-order Butterworth low-pass via the bilinear transform.
inline Biquad butterworth_lowpass(double cutoff_hz, double fs) {
    const double w0 = 2.0 * std::numbers::pi * cutoff_hz / fs;
    const double alpha = std::sin(w0) / std::numbers::sqrt2;
    const double cw = std::cos(w0);
    const double a0 = 1.0 + alpha;
    Biquad q;
    q.b = {(1.0 - cw) / 2.0 / a0, (1.0 - cw) / a0, (1.0 - cw) / 2.0 / a0};
    q.a = {-2.0 * cw / a0, (1.0 - alpha) / a0};
    return q;
}

}  // namespace dbl::detail
