#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "rlihf/dsp.hpp"
#include "rlihf/signal.hpp"

using namespace rlihf;

namespace {

std::vector<double> sine(double freq, double rate, std::size_t n, double phase = 0.0) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2.0 * std::numbers::pi * freq * i / rate + phase);
    return x;
}

// Amplitude of the `freq` component by least squares on [a, b).
double fitted_amplitude(const std::vector<double>& y, double freq, double rate, std::size_t a, std::size_t b) {
    double ss = 0, cc = 0, sc = 0, ys = 0, yc = 0;
    for (std::size_t i = a; i < b; ++i) {
        const double w = 2.0 * std::numbers::pi * freq * i / rate;
        const double s = std::sin(w), c = std::cos(w);
        ss += s * s, cc += c * c, sc += s * c, ys += y[i] * s, yc += y[i] * c;
    }
    const double det = ss * cc - sc * sc;
    const double bs = (ys * cc - yc * sc) / det;
    const double bc = (yc * ss - ys * sc) / det;
    return std::hypot(bs, bc);
}

}  // namespace

TEST_CASE("butterworth magnitude response") {
    const auto sos = dsp::butterworth_bandpass(4, 1.0, 20.0, 256.0);
    // Closed form for the cascade: |H|^2 = 1/(1+(wl/w)^2n) * 1/(1+(w/wh)^2n) on
    // prewarped frequencies.
    auto analog = [](double f) {
        const double fs = 256.0;
        const double w = std::tan(std::numbers::pi * f / fs);
        const double wl = std::tan(std::numbers::pi * 1.0 / fs);
        const double wh = std::tan(std::numbers::pi * 20.0 / fs);
        return 1.0 / std::sqrt((1.0 + std::pow(wl / w, 8)) * (1.0 + std::pow(w / wh, 8)));
    };
    for (double f : {0.5, 1.0, 5.0, 10.0, 20.0, 40.0, 60.0}) {
        CHECK(std::abs(dsp::frequency_response(sos, f, 256.0)) == doctest::Approx(analog(f)).epsilon(1e-9));
    }
    // filtfilt squares the magnitude.
    const double g10 = std::norm(dsp::frequency_response(sos, 10.0, 256.0));
    CHECK(std::abs(g10 - 1.0) < 0.05);
    const double g60 = std::norm(dsp::frequency_response(sos, 60.0, 256.0));
    CHECK(20.0 * std::log10(g60) <= -40.0);
}

TEST_CASE("lowpass and highpass corner is -3 dB") {
    const auto lp = dsp::butterworth_lowpass(4, 20.0, 256.0);
    const auto hp = dsp::butterworth_highpass(4, 1.0, 256.0);
    CHECK(std::abs(dsp::frequency_response(lp, 20.0, 256.0)) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
    CHECK(std::abs(dsp::frequency_response(hp, 1.0, 256.0)) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
    CHECK(std::abs(dsp::frequency_response(lp, 0.0, 256.0)) == doctest::Approx(1.0));
    CHECK(std::abs(dsp::frequency_response(hp, 0.0, 256.0)) < 1e-12);
}

TEST_CASE("bandpass rejects DC and keeps 10 Hz") {
    EegEpoch e;
    e.rate = 256.0;
    e.data = ChannelMatrix::Constant(2, 512, 3.0);
    const auto dc = bandpass_filter(e);
    const int edge = static_cast<int>(0.1 * e.rate);
    const double peak = dc.data.middleCols(edge, 512 - 2 * edge).cwiseAbs().maxCoeff();
    CHECK(peak < 0.01 * 3.0);

    const auto s10 = sine(10.0, 256.0, 512);
    for (int i = 0; i < 512; ++i) e.data(0, i) = e.data(1, i) = s10[i];
    const auto out = bandpass_filter(e);
    std::vector<double> y(out.data.row(0).begin(), out.data.row(0).end());
    CHECK(fitted_amplitude(y, 10.0, 256.0, 64, 448) == doctest::Approx(1.0).epsilon(0.05));

    const auto s60 = sine(60.0, 256.0, 512);
    for (int i = 0; i < 512; ++i) e.data(0, i) = e.data(1, i) = s60[i];
    const auto out60 = bandpass_filter(e);
    std::vector<double> y60(out60.data.row(0).begin(), out60.data.row(0).end());
    CHECK(20.0 * std::log10(fitted_amplitude(y60, 60.0, 256.0, 64, 448)) <= -40.0);
}

TEST_CASE("filtfilt is zero phase") {
    auto x = sine(8.0, 256.0, 1024);
    const auto ref = x;
    dsp::sosfiltfilt(dsp::butterworth_bandpass(4, 1.0, 20.0, 256.0), x);
    // Peak cross-correlation sits at lag zero.
    double best = -1e9;
    int best_lag = 99;
    for (int lag = -5; lag <= 5; ++lag) {
        double acc = 0;
        for (int i = 200; i < 800; ++i) acc += x[i] * ref[i + lag];
        if (acc > best) best = acc, best_lag = lag;
    }
    CHECK(best_lag == 0);
}

TEST_CASE("invalid band is a configuration error") {
    EegEpoch e;
    e.rate = 256.0;
    e.data = ChannelMatrix::Zero(2, 512);
    CHECK_THROWS(bandpass_filter(e, 20.0, 1.0));
    CHECK_THROWS(bandpass_filter(e, 0.0, 20.0));
    CHECK_THROWS(bandpass_filter(e, 1.0, 128.0));
}

TEST_CASE("resampler length, DC and sine") {
    dsp::RationalResampler rs(1000, 256);
    CHECK(rs.up() == 32);
    CHECK(rs.down() == 125);
    CHECK(rs.output_length(2000) == 512);

    const std::vector<double> ones(2000, 1.0);
    for (double v : rs.apply(ones)) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));

    const auto x = sine(5.0, 1000.0, 2000, 0.3);
    const auto y = rs.apply(x);
    REQUIRE(y.size() == 512);
    double worst = 0.0;
    for (std::size_t m = 26; m < 512 - 26; ++m) {
        const double t = static_cast<double>(m) / 256.0;
        worst = std::max(worst, std::abs(y[m] - std::sin(2.0 * std::numbers::pi * 5.0 * t + 0.3)));
    }
    CHECK(worst < 0.01);
}

TEST_CASE("resample epoch updates rate and rejects upsampling") {
    EegEpoch e;
    e.rate = 1000.0;
    e.data = ChannelMatrix::Constant(3, 2000, -2.5);
    const auto r = resample(e, 256.0);
    CHECK(r.rate == 256.0);
    CHECK(r.samples() == 512);
    CHECK(r.data.maxCoeff() == doctest::Approx(-2.5).epsilon(1e-9));
    CHECK_THROWS(resample(e, 1000.0));
    CHECK_THROWS(resample(e, 2000.0));
}
