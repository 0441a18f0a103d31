#include "rlihf/feedback.hpp"

#include <cmath>
#include <ostream>

#include "rlihf/errors.hpp"

namespace rlihf {

std::string to_string(Judgment j) {
    switch (j) {
        case Judgment::Error: return "error";
        case Judgment::NonError: return "non-error";
        case Judgment::None: break;
    }
    return "none";
}

void ObserverParams::validate() const {
    if (cadence_k < 1) throw ConfigError("cadence_k must be >= 1");
    if (!(regress_tol >= 0.0)) throw ConfigError("regress_tol must be >= 0");
    if (!(d_safe > 0.0)) throw ConfigError("observer d_safe must be positive");
}

Judgment observer_judgment(const EnvEvents& events, int step_index, const ObserverParams& params) {
    if (step_index % params.cadence_k != 0) return Judgment::None;
    const bool error = events.collision || events.clearance < params.d_safe ||
                       events.progress_delta < -params.regress_tol;
    return error ? Judgment::Error : Judgment::NonError;
}

EpochRing::EpochRing(std::size_t capacity) : slots_(capacity) {
    if (capacity == 0) throw ConfigError("ring capacity must be >= 1");
}

void EpochRing::push(EegEpoch epoch, std::int64_t onset_step) {
    ++pushes_;
    if (size_ == slots_.size()) {
        head_ = (head_ + 1) % slots_.size();
        --size_;
        ++dropped_;
    }
    slots_[(head_ + size_) % slots_.size()] = Entry{std::move(epoch), onset_step};
    ++size_;
}

std::optional<EpochRing::Entry> EpochRing::poll() {
    if (size_ == 0) return std::nullopt;
    Entry out = std::move(slots_[head_]);
    head_ = (head_ + 1) % slots_.size();
    --size_;
    ++polls_;
    return out;
}

double errp_reward(double p_errp) {
    if (!(p_errp >= 0.0 && p_errp <= 1.0)) throw ContractError("p_errp must lie in [0, 1]");
    return 1.0 - p_errp;
}

double composite_reward(double r_sparse, std::optional<double> r_errp, double w_hf, bool center_errp) {
    if (!(w_hf >= 0.0)) throw ConfigError("w_hf must be >= 0");
    if (!r_errp) return r_sparse;
    const double neural = center_errp ? 2.0 * *r_errp - 1.0 : *r_errp;
    return r_sparse + w_hf * neural;
}

RewardBreakdown environment_breakdown(const EnvEvents& events, int step_index, const RewardConfig& rewards) {
    RewardBreakdown b;
    b.step = step_index;
    b.r_sparse = env_reward(events, RewardMode::Sparse, rewards);
    b.r_unified_eval = env_reward(events, RewardMode::Dense, rewards);
    b.r_dense_shaping = b.r_unified_eval - b.r_sparse;
    b.r_composite = b.r_sparse;
    return b;
}

void FeedbackConfig::validate() const {
    observer.validate();
    if (!(w_hf >= 0.0)) throw ConfigError("w_hf must be >= 0");
    if (ring_capacity == 0) throw ConfigError("ring_capacity must be >= 1");
}

FeedbackChannel::FeedbackChannel(SubjectProfile subject, std::shared_ptr<const ErrorDecoder> decoder,
                                 FeedbackConfig cfg, RewardConfig rewards, SignalConfig signal, std::uint64_t seed)
    : subject_(subject),
      decoder_(std::move(decoder)),
      cfg_(cfg),
      rewards_(rewards),
      signal_(std::move(signal)),
      rng_(seed),
      ring_(cfg.ring_capacity) {
    subject_.validate();
    cfg_.validate();
    if (!decoder_) throw ContractError("feedback channel needs a decoder");
}

RewardBreakdown FeedbackChannel::tick(const EnvEvents& events, int step_index) {
    RewardBreakdown b = environment_breakdown(events, step_index, rewards_);
    b.judgment = observer_judgment(events, step_index, cfg_.observer);
    if (b.judgment == Judgment::None) return b;

    ++judgments_;
    const auto label = b.judgment == Judgment::Error ? EpochLabel::Error : EpochLabel::NonError;
    EegEpoch epoch = generate_epoch(subject_, label, rng_, signal_);
    epoch.onset_step = step_index;
    ring_.push(std::move(epoch), step_index);

    // Zero modeled decoding latency: the epoch pushed for this step is the
    // one consumed now.
    auto entry = ring_.poll();
    if (!entry) throw ContractError("epoch ring unexpectedly empty");
    const double p = decoder_->error_probability(entry->epoch);
    b.p_errp = p;
    b.r_errp = errp_reward(p);
    b.r_composite = composite_reward(b.r_sparse, b.r_errp, cfg_.w_hf, cfg_.center_errp);
    return b;
}

double FeedbackChannel::tail_reward(const EnvEvents& rest, int done_step, int horizon) {
    EnvEvents still;
    still.clearance = rest.clearance;
    double total = 0.0;
    for (int step = done_step + 1; step <= horizon; ++step) {
        const RewardBreakdown b = tick(still, step);
        total += b.r_composite - b.r_sparse;
    }
    return total;
}

void write_breakdown_csv_header(std::ostream& out) {
    out << "step,judgment,p_errp,r_errp,r_sparse,r_composite,r_unified_eval\n";
}

void write_breakdown_csv_row(std::ostream& out, const RewardBreakdown& b) {
    out << b.step << ',' << to_string(b.judgment) << ',';
    if (b.p_errp) out << *b.p_errp;
    out << ',';
    if (b.r_errp) out << *b.r_errp;
    out << ',' << b.r_sparse << ',' << b.r_composite << ',' << b.r_unified_eval << '\n';
}

}  // namespace rlihf
