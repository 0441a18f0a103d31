#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rlihf/dsp.hpp"
#include "rlihf/rng.hpp"

namespace rlihf {

using ChannelMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class EpochLabel : std::uint8_t { NonError = 0, Error = 1, Unknown = 2 };

std::string to_string(EpochLabel label);

struct SubjectProfile {
    int id = 1;
    double errp_gain = 1.0;          // template amplitude scale
    double noise_amp = 10.0;         // background noise std, uV
    double latency_jitter_ms = 20.0; // std of component latency shift
    int n_channels = 32;

    void validate() const;
};

// One Gaussian-shaped component of an evoked waveform.
struct WaveComponent {
    double latency_ms = 0.0;
    double width_ms = 1.0;   // Gaussian sigma
    double amplitude_uv = 0.0;
};

// Evoked responses time-locked to the feedback onset (t = 0 at sample 0).
struct ErrpTemplate {
    std::vector<WaveComponent> error;     // biphasic N/P complex
    std::vector<WaveComponent> baseline;  // low-amplitude non-error response

    static ErrpTemplate standard();
};

struct SignalConfig {
    double raw_rate = 1000.0;
    double epoch_seconds = 2.0;
    double correlated_fraction = 0.3;  // share of noise std common to all channels
    ErrpTemplate waveform = ErrpTemplate::standard();
};

struct PreprocessConfig {
    double target_rate = 256.0;
    double band_low = 1.0;
    double band_high = 20.0;
    int filter_order = 4;
    int feature_bin = 8;
};

struct EegEpoch {
    ChannelMatrix data;  // channels x samples, uV
    double rate = 1000.0;
    std::int64_t onset_step = 0;
    EpochLabel label = EpochLabel::Unknown;

    Eigen::Index channels() const { return data.rows(); }
    Eigen::Index samples() const { return data.cols(); }
};

// Montage weight of channel `c` in the fronto-central ErrP projection.
double spatial_weight(int channel);
const std::vector<std::string>& channel_names();
// Channels with the strongest template projection (Fz, FC1, FC2, Cz).
std::vector<int> fronto_central_channels(int n_channels);

// Twelve default synthetic subjects ordered roughly from strongest to weakest SNR.
std::vector<SubjectProfile> default_subject_profiles();

// Noise-free evoked response for `label`, at the subject's nominal latency.
ChannelMatrix clean_waveform(const SubjectProfile& profile, EpochLabel label,
                             const SignalConfig& cfg = {}, double latency_shift_ms = 0.0);

EegEpoch generate_epoch(const SubjectProfile& profile, EpochLabel label, Rng& rng,
                        const SignalConfig& cfg = {});

EegEpoch bandpass_filter(const EegEpoch& epoch, double low = 1.0, double high = 20.0, int order = 4);
EegEpoch resample(const EegEpoch& epoch, double to_rate = 256.0);
EegEpoch rereference_car(const EegEpoch& epoch);
std::vector<double> extract_features(const EegEpoch& epoch, int bin = 8);

// Mean amplitude over `channels` and the [t0, t1) post-onset window.
double window_mean(const EegEpoch& epoch, std::span<const int> channels, double t0_ms, double t1_ms);

// Cached resample -> band-pass -> common-average chain for one input rate.
class Preprocessor {
public:
    explicit Preprocessor(PreprocessConfig cfg = {}, double input_rate = 1000.0);

    EegEpoch run(const EegEpoch& raw) const;
    std::vector<double> features(const EegEpoch& raw) const;
    std::size_t feature_dim(int n_channels, std::size_t raw_samples) const;

    const PreprocessConfig& config() const { return cfg_; }

private:
    PreprocessConfig cfg_;
    double input_rate_;
    dsp::RationalResampler resampler_;
    dsp::Sos sos_;
};

// Binary container: "EEGE", u16 version, u16 channels, u32 samples, f32 rate,
// u8 label, then row-major little-endian float32 samples.
void write_epoch_binary(std::ostream& out, const EegEpoch& epoch);
EegEpoch read_epoch_binary(std::istream& in);
void write_epoch_csv(std::ostream& out, const EegEpoch& epoch);

}  // namespace rlihf
