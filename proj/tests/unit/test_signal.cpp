#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <vector>

#include "rlihf/signal.hpp"

using namespace rlihf;

namespace {

SubjectProfile quiet(double gain = 1.0) {
    SubjectProfile p;
    p.errp_gain = gain;
    p.noise_amp = 1e-300;  // noise_amp must be > 0; this is numerically zero
    p.latency_jitter_ms = 0.0;
    return p;
}

EegEpoch random_epoch(Rng& rng, int channels, int samples, double rate) {
    std::normal_distribution<double> n;
    EegEpoch e;
    e.rate = rate;
    e.data.resize(channels, samples);
    for (int c = 0; c < channels; ++c)
        for (int s = 0; s < samples; ++s) e.data(c, s) = n(rng);
    return e;
}

}  // namespace

TEST_CASE("noise-free epochs equal the templates") {
    Rng rng(1);
    const auto p = quiet();
    const auto err = generate_epoch(p, EpochLabel::Error, rng);
    CHECK(err.samples() == 2000);
    CHECK(err.rate == 1000.0);
    CHECK(err.label == EpochLabel::Error);
    CHECK((err.data - clean_waveform(p, EpochLabel::Error)).cwiseAbs().maxCoeff() < 1e-12);

    const auto base = generate_epoch(p, EpochLabel::NonError, rng);
    CHECK((base.data - clean_waveform(p, EpochLabel::NonError)).cwiseAbs().maxCoeff() < 1e-12);

    const auto fc = fronto_central_channels(32);
    const double diff = window_mean(err, fc, 250, 350) - window_mean(base, fc, 250, 350);
    // Difference of the two clean templates over the same window.
    EegEpoch ce, cb;
    ce.rate = cb.rate = 1000.0;
    ce.data = clean_waveform(p, EpochLabel::Error);
    cb.data = clean_waveform(p, EpochLabel::NonError);
    CHECK(diff == doctest::Approx(window_mean(ce, fc, 250, 350) - window_mean(cb, fc, 250, 350)));
    CHECK(diff < -1.0);
}

TEST_CASE("error template is biphasic and fronto-central") {
    const auto p = quiet();
    EegEpoch e;
    e.rate = 1000.0;
    e.data = clean_waveform(p, EpochLabel::Error);
    const int fz = 1;
    CHECK(spatial_weight(fz) == doctest::Approx(1.0));
    // Negative peak near 250 ms, positive near 320 ms.
    Eigen::Index neg = 0, pos = 0;
    e.data.row(fz).head(600).minCoeff(&neg);
    e.data.row(fz).head(600).maxCoeff(&pos);
    CHECK(std::abs(static_cast<double>(neg) - 250.0) <= 25.0);
    CHECK(std::abs(static_cast<double>(pos) - 320.0) <= 25.0);
    CHECK(e.data(fz, neg) < 0.0);
    CHECK(e.data(fz, pos) > 0.0);
    // Weaker away from the fronto-central cluster.
    const auto fc = fronto_central_channels(32);
    CHECK(fc.size() >= 3);
    for (int c = 0; c < 32; ++c) CHECK(spatial_weight(c) <= spatial_weight(fz));
    Rng rng(2);
    CHECK(generate_epoch(quiet(0.0), EpochLabel::Error, rng).data.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("grand average separates labels by 3 standard errors") {
    const auto profiles = default_subject_profiles();
    const auto& p = profiles[5];
    Rng rng(11);
    const auto fc = fronto_central_channels(32);
    std::vector<double> a, b;
    for (int i = 0; i < 200; ++i) {
        a.push_back(window_mean(generate_epoch(p, EpochLabel::Error, rng), fc, 250, 350));
        b.push_back(window_mean(generate_epoch(p, EpochLabel::NonError, rng), fc, 250, 350));
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / v.size();
    };
    auto var = [&](const std::vector<double>& v) {
        const double m = mean(v);
        double s = 0;
        for (double x : v) s += (x - m) * (x - m);
        return s / (v.size() - 1);
    };
    const double se = std::sqrt(var(a) / a.size() + var(b) / b.size());
    CHECK(mean(a) - mean(b) < -3.0 * se);
}

TEST_CASE("window threshold discriminates every default subject") {
    const auto fc = fronto_central_channels(32);
    for (const auto& p : default_subject_profiles()) {
        Rng rng(hash_combine(99, static_cast<std::uint64_t>(p.id)));
        std::vector<std::pair<double, int>> v;
        for (int i = 0; i < 500; ++i) {
            v.push_back({window_mean(generate_epoch(p, EpochLabel::Error, rng), fc, 250, 350), 1});
            v.push_back({window_mean(generate_epoch(p, EpochLabel::NonError, rng), fc, 250, 350), 0});
        }
        // Best single threshold: error when the window mean is below it.
        std::sort(v.begin(), v.end());
        int errors_below = 0, best = 0;
        const int total_non = 500;
        for (std::size_t i = 0; i < v.size(); ++i) {
            errors_below += v[i].second;
            const int correct = errors_below + (total_non - static_cast<int>(i + 1 - errors_below));
            best = std::max(best, correct);
        }
        CAPTURE(p.id);
        CHECK(best / 1000.0 > 0.6);
    }
}

TEST_CASE("common average reference") {
    EegEpoch e;
    e.rate = 256;
    e.data = ChannelMatrix::Zero(4, 10);
    for (int c = 0; c < 4; ++c) e.data.row(c).setLinSpaced(10, 1.0, 5.0);
    CHECK(rereference_car(e).data.cwiseAbs().maxCoeff() == 0.0);

    Rng rng(3);
    const auto r = rereference_car(random_epoch(rng, 8, 100, 256));
    CHECK(r.data.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);

    EegEpoch two;
    two.rate = 256;
    two.data.resize(2, 3);
    two.data << 1, 2, 3, 7, -1, 0.5;
    const auto t = rereference_car(two);
    for (int s = 0; s < 3; ++s) {
        CHECK(t.data(0, s) == doctest::Approx((two.data(0, s) - two.data(1, s)) / 2));
        CHECK(t.data(1, s) == doctest::Approx((two.data(1, s) - two.data(0, s)) / 2));
    }
    two.data.resize(1, 3);
    CHECK_THROWS(rereference_car(two));
}

TEST_CASE("feature extraction") {
    EegEpoch e;
    e.rate = 256;
    e.data = ChannelMatrix::Zero(32, 512);
    auto f = extract_features(e);
    CHECK(f.size() == 2048);
    for (double v : f) CHECK(v == 0.0);
    e.data.setConstant(-1.75);
    f = extract_features(e);
    for (double v : f) CHECK(v == -1.75);

    EegEpoch odd;
    odd.rate = 256;
    odd.data.resize(2, 10);
    odd.data.row(0) << 0, 1, 2, 3, 4, 5, 6, 7, 8, 10;
    odd.data.row(1).setZero();
    f = extract_features(odd);
    REQUIRE(f.size() == 4);
    CHECK(f[0] == doctest::Approx(3.5));
    CHECK(f[1] == doctest::Approx(9.0));  // trailing partial bin
}

TEST_CASE("filtering and re-referencing are linear") {
    Rng rng(5);
    const auto x = random_epoch(rng, 4, 512, 256);
    const auto y = random_epoch(rng, 4, 512, 256);
    const double a = 1.7, b = -0.4;
    EegEpoch mix = x;
    mix.data = a * x.data + b * y.data;
    const auto lhs = bandpass_filter(mix);
    const ChannelMatrix rhs = a * bandpass_filter(x).data + b * bandpass_filter(y).data;
    CHECK((lhs.data - rhs).cwiseAbs().maxCoeff() < 1e-9);
    const ChannelMatrix rr = a * rereference_car(x).data + b * rereference_car(y).data;
    CHECK((rereference_car(mix).data - rr).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("preprocessing chain is deterministic and sized") {
    Rng rng(8);
    const auto e = generate_epoch(default_subject_profiles()[0], EpochLabel::Error, rng);
    const Preprocessor pre;
    const auto f1 = pre.features(e);
    const auto f2 = pre.features(e);
    CHECK(f1.size() == 2048);
    CHECK(pre.feature_dim(32, 2000) == 2048);
    CHECK(std::memcmp(f1.data(), f2.data(), f1.size() * sizeof(double)) == 0);
    const auto run = pre.run(e);
    CHECK(run.rate == 256.0);
    CHECK(run.samples() == 512);
}

TEST_CASE("epoch containers round-trip") {
    Rng rng(4);
    auto e = generate_epoch(default_subject_profiles()[2], EpochLabel::NonError, rng);
    std::stringstream buf;
    write_epoch_binary(buf, e);
    const std::string bytes = buf.str();
    CHECK(bytes.substr(0, 4) == "EEGE");
    CHECK(bytes.size() == 4 + 2 + 2 + 4 + 4 + 1 + 32 * 2000 * 4);
    const auto back = read_epoch_binary(buf);
    CHECK(back.label == EpochLabel::NonError);
    CHECK(back.rate == 1000.0);
    CHECK(back.channels() == 32);
    CHECK((back.data - e.data.cast<float>().cast<double>()).cwiseAbs().maxCoeff() == 0.0);

    std::stringstream csv;
    write_epoch_csv(csv, e);
    int lines = 0;
    for (std::string line; std::getline(csv, line);) ++lines;
    CHECK(lines >= 32);

    std::stringstream bad("XXXX");
    CHECK_THROWS(read_epoch_binary(bad));
}

TEST_CASE("profile validation") {
    SubjectProfile p;
    p.noise_amp = 0.0;
    CHECK_THROWS(p.validate());
    p = {};
    p.errp_gain = -1;
    CHECK_THROWS(p.validate());
    p = {};
    p.n_channels = 1;
    CHECK_THROWS(p.validate());
    CHECK(default_subject_profiles().size() == 12);
}
