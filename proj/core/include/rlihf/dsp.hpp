#pragma once

#include <complex>
#include <span>
#include <vector>

namespace rlihf::dsp {

// Second-order section in direct form II transposed, a0 normalized to 1.
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;
};

using Sos = std::vector<Biquad>;

// Butterworth designs by bilinear transform with frequency prewarping.
// `order` must be even and positive.
Sos butterworth_lowpass(int order, double cutoff_hz, double rate_hz);
Sos butterworth_highpass(int order, double cutoff_hz, double rate_hz);

// High-pass at `low_hz` cascaded with low-pass at `high_hz`, each of `order`.
Sos butterworth_bandpass(int order, double low_hz, double high_hz, double rate_hz);

std::complex<double> frequency_response(const Sos& sos, double freq_hz, double rate_hz);

// Single forward pass starting from rest.
void sosfilt(const Sos& sos, std::span<double> x);

// Forward-backward (zero phase) filtering with odd-extension padding and
// steady-state initial conditions, like scipy.signal.sosfiltfilt.
void sosfiltfilt(const Sos& sos, std::span<double> x);

// Rational-ratio resampler with a Kaiser-windowed sinc anti-alias filter.
// Zero group delay: output sample m sits at input time m * from / to.
class RationalResampler {
public:
    RationalResampler(int from_rate, int to_rate, int zero_crossings = 10,
                      double rolloff = 0.9, double kaiser_beta = 8.0);

    int up() const { return up_; }
    int down() const { return down_; }
    std::size_t output_length(std::size_t input_length) const;

    std::vector<double> apply(std::span<const double> x) const;

    // Magnitude of the averaged phase response at `freq_hz`; test helper.
    double passband_gain(double freq_hz) const;

private:
    int from_rate_;
    int to_rate_;
    int up_;
    int down_;
    int half_taps_;
    std::vector<std::vector<double>> phases_;
};

}  // namespace rlihf::dsp
