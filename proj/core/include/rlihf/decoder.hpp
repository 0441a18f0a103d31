#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rlihf/signal.hpp"

namespace rlihf {

struct DecoderHyper {
    double l2 = 0.05;
    int epochs = 40;
    double lr = 0.05;
    int batch = 64;
    std::uint64_t seed = 7;
};

// Rows are examples; labels are 1 for error, 0 for non-error.
struct LabeledSet {
    Eigen::MatrixXd features;
    std::vector<std::uint8_t> labels;
    int subject_id = 0;

    Eigen::Index size() const { return features.rows(); }
    void validate(bool for_training) const;
};

LabeledSet concatenate(std::span<const LabeledSet> sets);

// Two-class linear softmax over standardized features. Row 1 of `weights`
// (and bias[1]) is the error-class logit.
struct DecoderModel {
    Eigen::MatrixXd weights;  // 2 x d
    Eigen::Vector2d bias = Eigen::Vector2d::Zero();
    Eigen::VectorXd feature_mean;
    Eigen::VectorXd feature_std;
    std::vector<int> training_subjects;
    DecoderHyper hyper;
    double final_loss = 0.0;

    std::size_t dim() const { return static_cast<std::size_t>(weights.cols()); }
    static DecoderModel zeros(std::size_t dim);
};

Eigen::Vector2d decoder_logits(const DecoderModel& model, std::span<const double> features);
// Returns {p(non-error), p(error)} from one shared pair of logits.
Eigen::Vector2d class_distribution(const DecoderModel& model, std::span<const double> features);
double predict_proba(const DecoderModel& model, std::span<const double> features);

struct DecoderLoss {
    double value = 0.0;
    Eigen::MatrixXd grad_weights;
    Eigen::Vector2d grad_bias;
};

// Mean cross-entropy plus l2 * ||W||^2 over already standardized rows.
DecoderLoss decoder_objective(const Eigen::MatrixXd& weights, const Eigen::Vector2d& bias,
                              const Eigen::MatrixXd& standardized,
                              std::span<const std::uint8_t> labels, double l2);

// Loss trace of each epoch's end, for monotonicity checks.
struct TrainingTrace {
    std::vector<double> epoch_loss;
};

DecoderModel train_decoder(const LabeledSet& train, const DecoderHyper& hyper,
                           TrainingTrace* trace = nullptr);

double accuracy(const DecoderModel& model, const LabeledSet& set);

// Balanced labeled set generated from a synthetic subject.
LabeledSet make_subject_set(const SubjectProfile& profile, int per_class, Rng& rng,
                            const Preprocessor& pre, const SignalConfig& signal = {});

struct SubjectSplits {
    LabeledSet calibration;
    LabeledSet online;
};

struct LosoResult {
    int subject_id = 0;
    double pretrain_acc = 0.0;
    double online_acc = 0.0;
};

// Holds out each subject in turn and trains on the pooled calibration splits
// of the others.
std::vector<LosoResult> loso_evaluate(std::span<const SubjectSplits> subjects, const DecoderHyper& hyper);

struct DatasetConfig {
    int calibration_per_class = 100;
    int online_per_class = 100;
    std::uint64_t seed = 2024;
};

std::vector<SubjectSplits> generate_cohort(std::span<const SubjectProfile> profiles, const DatasetConfig& data,
                                           const Preprocessor& pre, const SignalConfig& signal = {});

// Trains the decoder used for `held_out`'s feedback: pooled calibration of all
// other subjects.
DecoderModel train_loso_decoder(std::span<const SubjectSplits> cohort, int held_out, const DecoderHyper& hyper);

void write_csv(std::ostream& out, std::span<const LosoResult> results);

// Length-prefixed JSON header followed by little-endian float64 parameters.
void save_decoder(std::ostream& out, const DecoderModel& model);
DecoderModel load_decoder(std::istream& in);
std::string decoder_bytes(const DecoderModel& model);

// Model-agnostic view used by the feedback channel: raw epoch in, P(error) out.
class ErrorDecoder {
public:
    virtual ~ErrorDecoder() = default;
    virtual double error_probability(const EegEpoch& raw) const = 0;
};

class LinearErrorDecoder final : public ErrorDecoder {
public:
    LinearErrorDecoder(std::shared_ptr<const DecoderModel> model, PreprocessConfig pre = {},
                       double input_rate = 1000.0);
    double error_probability(const EegEpoch& raw) const override;
    const DecoderModel& model() const { return *model_; }

private:
    std::shared_ptr<const DecoderModel> model_;
    Preprocessor pre_;
};

// Reads the ground-truth label: p = 1 for error epochs, 0 otherwise.
class OracleErrorDecoder final : public ErrorDecoder {
public:
    double error_probability(const EegEpoch& raw) const override;
};

}  // namespace rlihf
