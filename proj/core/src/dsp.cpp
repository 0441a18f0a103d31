#include "rlihf/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "rlihf/errors.hpp"

namespace rlihf::dsp {
namespace {

void check_design(int order, double cutoff_hz, double rate_hz) {
    if (order <= 0 || order % 2 != 0) {
        throw ConfigError("butterworth order must be even and positive");
    }
    if (!(cutoff_hz > 0.0) || !(cutoff_hz < rate_hz / 2.0)) {
        throw ConfigError("butterworth cutoff must lie in (0, rate/2)");
    }
}

// Damping coefficients a_k of the analog prototype sections s^2 + a_k s + 1.
std::vector<double> prototype_damping(int order) {
    std::vector<double> a;
    for (int k = 0; k < order / 2; ++k) {
        a.push_back(2.0 * std::sin(std::numbers::pi * (2.0 * k + 1.0) / (2.0 * order)));
    }
    return a;
}

// Steady-state DF2T state for a unit step input; scaled by the input level.
std::pair<double, double> unit_step_state(const Biquad& s) {
    const double gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    return {gain - s.b0, s.b2 - s.a2 * gain};
}

double dc_gain(const Biquad& s) { return (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2); }

void run_section(const Biquad& s, std::span<double> x, double z1, double z2) {
    for (double& v : x) {
        const double in = v;
        const double out = s.b0 * in + z1;
        z1 = s.b1 * in - s.a1 * out + z2;
        z2 = s.b2 * in - s.a2 * out;
        v = out;
    }
}

// Filters `x` through the cascade with each section started at the steady
// state matching a constant input equal to x[0].
void filter_with_initial_state(const Sos& sos, std::span<double> x) {
    if (x.empty()) return;
    double level = x[0];
    for (const auto& s : sos) {
        auto [z1, z2] = unit_step_state(s);
        run_section(s, x, z1 * level, z2 * level);
        level *= dc_gain(s);
    }
}

double kaiser(double t, double beta) {
    if (std::abs(t) > 1.0) return 0.0;
    return std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - t * t)) / std::cyl_bessel_i(0.0, beta);
}

double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

}  // namespace

Sos butterworth_lowpass(int order, double cutoff_hz, double rate_hz) {
    check_design(order, cutoff_hz, rate_hz);
    const double k = std::tan(std::numbers::pi * cutoff_hz / rate_hz);
    Sos sos;
    for (double a : prototype_damping(order)) {
        const double d0 = 1.0 + a * k + k * k;
        Biquad s;
        s.b0 = k * k / d0;
        s.b1 = 2.0 * k * k / d0;
        s.b2 = k * k / d0;
        s.a1 = (2.0 * k * k - 2.0) / d0;
        s.a2 = (1.0 - a * k + k * k) / d0;
        sos.push_back(s);
    }
    return sos;
}

Sos butterworth_highpass(int order, double cutoff_hz, double rate_hz) {
    check_design(order, cutoff_hz, rate_hz);
    const double k = std::tan(std::numbers::pi * cutoff_hz / rate_hz);
    Sos sos;
    for (double a : prototype_damping(order)) {
        const double d0 = 1.0 + a * k + k * k;
        Biquad s;
        s.b0 = 1.0 / d0;
        s.b1 = -2.0 / d0;
        s.b2 = 1.0 / d0;
        s.a1 = (2.0 * k * k - 2.0) / d0;
        s.a2 = (1.0 - a * k + k * k) / d0;
        sos.push_back(s);
    }
    return sos;
}

Sos butterworth_bandpass(int order, double low_hz, double high_hz, double rate_hz) {
    if (!(low_hz > 0.0) || !(low_hz < high_hz) || !(high_hz < rate_hz / 2.0)) {
        throw ConfigError("band-pass requires 0 < low < high < rate/2");
    }
    Sos sos = butterworth_highpass(order, low_hz, rate_hz);
    Sos lp = butterworth_lowpass(order, high_hz, rate_hz);
    sos.insert(sos.end(), lp.begin(), lp.end());
    return sos;
}

std::complex<double> frequency_response(const Sos& sos, double freq_hz, double rate_hz) {
    const double w = 2.0 * std::numbers::pi * freq_hz / rate_hz;
    const std::complex<double> zi = std::polar(1.0, -w);
    const std::complex<double> zi2 = zi * zi;
    std::complex<double> h = 1.0;
    for (const auto& s : sos) {
        h *= (s.b0 + s.b1 * zi + s.b2 * zi2) / (1.0 + s.a1 * zi + s.a2 * zi2);
    }
    return h;
}

void sosfilt(const Sos& sos, std::span<double> x) {
    for (const auto& s : sos) run_section(s, x, 0.0, 0.0);
}

void sosfiltfilt(const Sos& sos, std::span<double> x) {
    const std::size_t n = x.size();
    if (n < 2) return;
    const std::size_t pad = std::min<std::size_t>(n - 1, 3 * (2 * sos.size() + 1));

    std::vector<double> ext(n + 2 * pad);
    for (std::size_t i = 0; i < pad; ++i) {
        ext[i] = 2.0 * x[0] - x[pad - i];
        ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];
    }
    std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));

    filter_with_initial_state(sos, ext);
    std::reverse(ext.begin(), ext.end());
    filter_with_initial_state(sos, ext);
    std::reverse(ext.begin(), ext.end());

    std::copy_n(ext.begin() + static_cast<std::ptrdiff_t>(pad), n, x.begin());
}

RationalResampler::RationalResampler(int from_rate, int to_rate, int zero_crossings,
                                     double rolloff, double kaiser_beta)
    : from_rate_(from_rate), to_rate_(to_rate) {
    if (from_rate <= 0 || to_rate <= 0) throw ConfigError("resample rates must be positive");
    if (to_rate >= from_rate) throw ConfigError("resample target rate must be below the source rate");
    const int g = std::gcd(from_rate, to_rate);
    up_ = to_rate / g;
    down_ = from_rate / g;

    // Cutoff in cycles per input sample.
    const double fc = 0.5 * rolloff * static_cast<double>(to_rate) / from_rate;
    const double half_width = zero_crossings / (2.0 * fc);
    half_taps_ = static_cast<int>(std::ceil(half_width));

    phases_.resize(static_cast<std::size_t>(up_));
    for (int r = 0; r < up_; ++r) {
        const double frac = static_cast<double>(r) / up_;
        auto& taps = phases_[static_cast<std::size_t>(r)];
        taps.resize(static_cast<std::size_t>(2 * half_taps_));
        // Tap i multiplies input j = floor(tau) + k with k = i - half_taps_ + 1.
        for (int i = 0; i < 2 * half_taps_; ++i) {
            const int k = i - half_taps_ + 1;
            const double t = frac - k;
            taps[static_cast<std::size_t>(i)] = 2.0 * fc * sinc(2.0 * fc * t) * kaiser(t / half_width, kaiser_beta);
        }
        const double sum = std::accumulate(taps.begin(), taps.end(), 0.0);
        for (double& v : taps) v /= sum;
    }
}

std::size_t RationalResampler::output_length(std::size_t input_length) const {
    return static_cast<std::size_t>(
        std::llround(static_cast<double>(input_length) * to_rate_ / from_rate_));
}

std::vector<double> RationalResampler::apply(std::span<const double> x) const {
    const std::size_t n_out = output_length(x.size());
    std::vector<double> y(n_out, 0.0);
    if (x.empty()) return y;
    const auto last = static_cast<std::ptrdiff_t>(x.size()) - 1;
    for (std::size_t m = 0; m < n_out; ++m) {
        const auto num = static_cast<std::int64_t>(m) * down_;
        const auto base = static_cast<std::ptrdiff_t>(num / up_);
        const auto& taps = phases_[static_cast<std::size_t>(num % up_)];
        const std::ptrdiff_t j0 = base - half_taps_ + 1;
        double acc = 0.0;
        if (j0 >= 0 && j0 + 2 * half_taps_ - 1 <= last) {
            const double* px = x.data() + j0;
            for (std::size_t i = 0; i < taps.size(); ++i) acc += taps[i] * px[i];
        } else {
            for (std::size_t i = 0; i < taps.size(); ++i) {
                const std::ptrdiff_t j = std::clamp<std::ptrdiff_t>(j0 + static_cast<std::ptrdiff_t>(i), 0, last);
                acc += taps[i] * x[static_cast<std::size_t>(j)];
            }
        }
        y[m] = acc;
    }
    return y;
}

double RationalResampler::passband_gain(double freq_hz) const {
    // Average over phases of the per-phase DTFT magnitude at freq_hz.
    const double w = 2.0 * std::numbers::pi * freq_hz / from_rate_;
    double total = 0.0;
    for (int r = 0; r < up_; ++r) {
        const auto& taps = phases_[static_cast<std::size_t>(r)];
        const double frac = static_cast<double>(r) / up_;
        std::complex<double> h = 0.0;
        for (int i = 0; i < 2 * half_taps_; ++i) {
            const int k = i - half_taps_ + 1;
            h += taps[static_cast<std::size_t>(i)] * std::polar(1.0, w * (frac - k));
        }
        total += std::abs(h);
    }
    return total / up_;
}

}  // namespace rlihf::dsp
