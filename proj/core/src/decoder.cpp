#include "rlihf/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "rlihf/blob.hpp"
#include "rlihf/errors.hpp"

namespace rlihf {
namespace {

constexpr char kDecoderMagic[9] = "RLDEC001";

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> x) {
    return {x.data(), static_cast<Eigen::Index>(x.size())};
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& x, const Eigen::VectorXd& mean, const Eigen::VectorXd& std) {
    return (x.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
}

// Row-wise softmax over two logits, computed from their difference.
double error_prob_from_logits(double non_error, double error) {
    const double d = error - non_error;
    if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
    const double e = std::exp(d);
    return e / (1.0 + e);
}

}  // namespace

void LabeledSet::validate(bool for_training) const {
    if (features.rows() < 1) throw ContractError("labeled set is empty");
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw ContractError("labeled set features/labels size mismatch");
    }
    if (!features.allFinite()) throw ContractError("labeled set has non-finite features");
    if (for_training) {
        const auto errors = std::count(labels.begin(), labels.end(), std::uint8_t{1});
        if (errors == 0 || errors == static_cast<std::ptrdiff_t>(labels.size())) {
            throw TrainingError("training set must contain both classes");
        }
    }
}

LabeledSet concatenate(std::span<const LabeledSet> sets) {
    if (sets.empty()) throw ContractError("nothing to concatenate");
    Eigen::Index rows = 0;
    for (const auto& s : sets) rows += s.size();
    LabeledSet out;
    out.subject_id = -1;
    out.features.resize(rows, sets.front().features.cols());
    Eigen::Index r = 0;
    for (const auto& s : sets) {
        if (s.features.cols() != out.features.cols()) throw ContractError("feature dimension mismatch");
        out.features.middleRows(r, s.size()) = s.features;
        out.labels.insert(out.labels.end(), s.labels.begin(), s.labels.end());
        r += s.size();
    }
    return out;
}

DecoderModel DecoderModel::zeros(std::size_t dim) {
    DecoderModel m;
    const auto d = static_cast<Eigen::Index>(dim);
    m.weights = Eigen::MatrixXd::Zero(2, d);
    m.feature_mean = Eigen::VectorXd::Zero(d);
    m.feature_std = Eigen::VectorXd::Ones(d);
    return m;
}

Eigen::Vector2d decoder_logits(const DecoderModel& model, std::span<const double> features) {
    if (features.size() != model.dim()) {
        throw ContractError("decoder expects " + std::to_string(model.dim()) + " features, got " +
                            std::to_string(features.size()));
    }
    const Eigen::VectorXd z = ((as_vector(features) - model.feature_mean).array() / model.feature_std.array()).matrix();
    return model.weights * z + model.bias;
}

Eigen::Vector2d class_distribution(const DecoderModel& model, std::span<const double> features) {
    const Eigen::Vector2d l = decoder_logits(model, features);
    const double p_error = error_prob_from_logits(l[0], l[1]);
    return {1.0 - p_error, p_error};
}

double predict_proba(const DecoderModel& model, std::span<const double> features) {
    const Eigen::Vector2d l = decoder_logits(model, features);
    return error_prob_from_logits(l[0], l[1]);
}

DecoderLoss decoder_objective(const Eigen::MatrixXd& weights, const Eigen::Vector2d& bias,
                              const Eigen::MatrixXd& standardized,
                              std::span<const std::uint8_t> labels, double l2) {
    const Eigen::Index n = standardized.rows();
    const Eigen::MatrixXd logits = (standardized * weights.transpose()).rowwise() + bias.transpose();
    Eigen::MatrixXd g(n, 2);
    double ce = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = std::max(logits(i, 0), logits(i, 1));
        const double e0 = std::exp(logits(i, 0) - m);
        const double e1 = std::exp(logits(i, 1) - m);
        const double lse = m + std::log(e0 + e1);
        const int y = labels[static_cast<std::size_t>(i)];
        ce += lse - logits(i, y);
        g(i, 0) = e0 / (e0 + e1) - (y == 0 ? 1.0 : 0.0);
        g(i, 1) = e1 / (e0 + e1) - (y == 1 ? 1.0 : 0.0);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    DecoderLoss out;
    out.value = ce * inv_n + l2 * weights.squaredNorm();
    out.grad_weights = inv_n * g.transpose() * standardized + 2.0 * l2 * weights;
    out.grad_bias = inv_n * g.colwise().sum().transpose();
    return out;
}

DecoderModel train_decoder(const LabeledSet& train, const DecoderHyper& hyper, TrainingTrace* trace) {
    train.validate(true);
    if (hyper.epochs < 1 || hyper.batch < 1 || !(hyper.lr > 0.0) || !(hyper.l2 >= 0.0)) {
        throw ConfigError("invalid decoder hyperparameters");
    }
    const Eigen::Index n = train.size();
    const Eigen::Index d = train.features.cols();

    DecoderModel model = DecoderModel::zeros(static_cast<std::size_t>(d));
    model.hyper = hyper;
    model.feature_mean = train.features.colwise().mean().transpose();
    const Eigen::MatrixXd centered = train.features.rowwise() - model.feature_mean.transpose();
    model.feature_std = (centered.array().square().colwise().sum() / static_cast<double>(n)).sqrt().transpose();
    for (auto& s : model.feature_std) {
        if (!(s > 1e-12)) s = 1.0;
    }
    const Eigen::MatrixXd z = standardize(train.features, model.feature_mean, model.feature_std);

    Rng rng(hyper.seed);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const Eigen::Index batch = std::min<Eigen::Index>(hyper.batch, n);

    Eigen::MatrixXd xb;
    std::vector<std::uint8_t> yb;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        if (batch < n) std::shuffle(order.begin(), order.end(), rng);
        for (Eigen::Index start = 0; start < n; start += batch) {
            const Eigen::Index len = std::min(batch, n - start);
            xb.resize(len, d);
            yb.resize(static_cast<std::size_t>(len));
            for (Eigen::Index i = 0; i < len; ++i) {
                const Eigen::Index src = order[static_cast<std::size_t>(start + i)];
                xb.row(i) = z.row(src);
                yb[static_cast<std::size_t>(i)] = train.labels[static_cast<std::size_t>(src)];
            }
            // Proximal step: explicit on cross-entropy, exact on the l2 term,
            // so any l2 magnitude stays stable.
            const DecoderLoss step = decoder_objective(model.weights, model.bias, xb, yb, 0.0);
            model.weights = (model.weights - hyper.lr * step.grad_weights) / (1.0 + 2.0 * hyper.lr * hyper.l2);
            model.bias -= hyper.lr * step.grad_bias;
        }
        if (trace != nullptr || epoch + 1 == hyper.epochs) {
            const double loss = decoder_objective(model.weights, model.bias, z, train.labels, hyper.l2).value;
            if (trace != nullptr) trace->epoch_loss.push_back(loss);
            model.final_loss = loss;
        }
    }
    return model;
}

double accuracy(const DecoderModel& model, const LabeledSet& set) {
    set.validate(false);
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < set.size(); ++i) {
        const Eigen::VectorXd row = set.features.row(i).transpose();
        const bool said_error = predict_proba(model, {row.data(), static_cast<std::size_t>(row.size())}) >= 0.5;
        correct += (said_error == (set.labels[static_cast<std::size_t>(i)] == 1)) ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(set.size());
}

LabeledSet make_subject_set(const SubjectProfile& profile, int per_class, Rng& rng, const Preprocessor& pre,
                            const SignalConfig& signal) {
    if (per_class < 1) throw ConfigError("per_class must be >= 1");
    const auto raw_samples = static_cast<std::size_t>(std::llround(signal.raw_rate * signal.epoch_seconds));
    const auto dim = pre.feature_dim(profile.n_channels, raw_samples);
    LabeledSet set;
    set.subject_id = profile.id;
    set.features.resize(2 * per_class, static_cast<Eigen::Index>(dim));
    Eigen::Index row = 0;
    // Interleave labels so any prefix is balanced.
    for (int i = 0; i < per_class; ++i) {
        for (EpochLabel label : {EpochLabel::Error, EpochLabel::NonError}) {
            const auto f = pre.features(generate_epoch(profile, label, rng, signal));
            set.features.row(row++) = Eigen::Map<const Eigen::RowVectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
            set.labels.push_back(label == EpochLabel::Error ? 1 : 0);
        }
    }
    return set;
}

std::vector<LosoResult> loso_evaluate(std::span<const SubjectSplits> subjects, const DecoderHyper& hyper) {
    if (subjects.size() < 2) throw ConfigError("leave-one-subject-out needs at least 2 subjects");
    std::vector<LosoResult> out;
    for (std::size_t held = 0; held < subjects.size(); ++held) {
        const int id = subjects[held].calibration.subject_id;
        const DecoderModel model = train_loso_decoder(subjects, id, hyper);
        out.push_back({id, accuracy(model, subjects[held].calibration), accuracy(model, subjects[held].online)});
    }
    return out;
}

std::vector<SubjectSplits> generate_cohort(std::span<const SubjectProfile> profiles, const DatasetConfig& data,
                                           const Preprocessor& pre, const SignalConfig& signal) {
    std::vector<SubjectSplits> out;
    for (const auto& p : profiles) {
        Rng calib_rng(hash_combine(hash_combine(data.seed, std::uint64_t(p.id)), std::string_view("calibration")));
        Rng online_rng(hash_combine(hash_combine(data.seed, std::uint64_t(p.id)), std::string_view("online")));
        SubjectSplits s;
        s.calibration = make_subject_set(p, data.calibration_per_class, calib_rng, pre, signal);
        s.online = make_subject_set(p, data.online_per_class, online_rng, pre, signal);
        out.push_back(std::move(s));
    }
    return out;
}

DecoderModel train_loso_decoder(std::span<const SubjectSplits> cohort, int held_out, const DecoderHyper& hyper) {
    std::vector<LabeledSet> pool;
    std::vector<int> ids;
    for (const auto& s : cohort) {
        if (s.calibration.subject_id == held_out) continue;
        pool.push_back(s.calibration);
        ids.push_back(s.calibration.subject_id);
    }
    if (pool.empty()) throw ConfigError("no training subjects left after holding out " + std::to_string(held_out));
    DecoderModel model = train_decoder(concatenate(pool), hyper);
    model.training_subjects = ids;
    return model;
}

void write_csv(std::ostream& out, std::span<const LosoResult> results) {
    out << "subject,pretrain_acc,online_acc\n";
    for (const auto& r : results) out << r.subject_id << ',' << r.pretrain_acc << ',' << r.online_acc << '\n';
}

void save_decoder(std::ostream& out, const DecoderModel& model) {
    nlohmann::json h;
    h["kind"] = "linear-softmax-decoder";
    h["dim"] = model.dim();
    h["training_subjects"] = model.training_subjects;
    h["final_loss"] = model.final_loss;
    h["hyper"] = {{"l2", model.hyper.l2}, {"epochs", model.hyper.epochs}, {"lr", model.hyper.lr},
                  {"batch", model.hyper.batch}, {"seed", model.hyper.seed}};
    h["blocks"] = {"weights(2xd,row-major)", "bias(2)", "feature_mean(d)", "feature_std(d)"};
    Blob blob;
    blob.header_json = h.dump();
    const auto d = static_cast<Eigen::Index>(model.dim());
    blob.values.reserve(static_cast<std::size_t>(4 * d + 2));
    for (Eigen::Index r = 0; r < 2; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) blob.values.push_back(model.weights(r, c));
    }
    blob.values.push_back(model.bias[0]);
    blob.values.push_back(model.bias[1]);
    for (Eigen::Index c = 0; c < d; ++c) blob.values.push_back(model.feature_mean[c]);
    for (Eigen::Index c = 0; c < d; ++c) blob.values.push_back(model.feature_std[c]);
    write_blob(out, kDecoderMagic, blob);
}

DecoderModel load_decoder(std::istream& in) {
    const Blob blob = read_blob(in, kDecoderMagic);
    const auto h = nlohmann::json::parse(blob.header_json);
    const auto d = h.at("dim").get<Eigen::Index>();
    if (blob.values.size() != static_cast<std::size_t>(4 * d + 2)) throw ConfigError("decoder blob size mismatch");
    DecoderModel m = DecoderModel::zeros(static_cast<std::size_t>(d));
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < 2; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) m.weights(r, c) = blob.values[k++];
    }
    m.bias[0] = blob.values[k++];
    m.bias[1] = blob.values[k++];
    for (Eigen::Index c = 0; c < d; ++c) m.feature_mean[c] = blob.values[k++];
    for (Eigen::Index c = 0; c < d; ++c) m.feature_std[c] = blob.values[k++];
    m.training_subjects = h.at("training_subjects").get<std::vector<int>>();
    m.final_loss = h.at("final_loss").get<double>();
    const auto& hy = h.at("hyper");
    m.hyper = {hy.at("l2").get<double>(), hy.at("epochs").get<int>(), hy.at("lr").get<double>(),
               hy.at("batch").get<int>(), hy.at("seed").get<std::uint64_t>()};
    return m;
}

std::string decoder_bytes(const DecoderModel& model) {
    std::ostringstream out;
    save_decoder(out, model);
    return out.str();
}

LinearErrorDecoder::LinearErrorDecoder(std::shared_ptr<const DecoderModel> model, PreprocessConfig pre,
                                       double input_rate)
    : model_(std::move(model)), pre_(pre, input_rate) {
    if (!model_) throw ContractError("LinearErrorDecoder needs a model");
}

double LinearErrorDecoder::error_probability(const EegEpoch& raw) const {
    const auto f = pre_.features(raw);
    return predict_proba(*model_, f);
}

double OracleErrorDecoder::error_probability(const EegEpoch& raw) const {
    return raw.label == EpochLabel::Error ? 1.0 : 0.0;
}

}  // namespace rlihf
