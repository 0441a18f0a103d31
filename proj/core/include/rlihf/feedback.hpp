#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "rlihf/decoder.hpp"
#include "rlihf/envsim.hpp"
#include "rlihf/signal.hpp"

namespace rlihf {

enum class Judgment : std::uint8_t { None = 0, NonError = 1, Error = 2 };
std::string to_string(Judgment j);

struct ObserverParams {
    int cadence_k = 8;
    double d_safe = 0.05;
    double regress_tol = 0.0;

    void validate() const;
};

// Judges the step that produced `events` and landed on `step_index`.
Judgment observer_judgment(const EnvEvents& events, int step_index, const ObserverParams& params);

// Bounded FIFO of epochs awaiting decoding; drops the oldest when full.
class EpochRing {
public:
    struct Entry {
        EegEpoch epoch;
        std::int64_t onset_step = 0;
    };

    explicit EpochRing(std::size_t capacity);

    void push(EegEpoch epoch, std::int64_t onset_step);
    std::optional<Entry> poll();

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return slots_.size(); }
    bool empty() const { return size_ == 0; }
    std::uint64_t dropped() const { return dropped_; }
    std::uint64_t pushes() const { return pushes_; }
    std::uint64_t polls() const { return polls_; }

private:
    std::vector<Entry> slots_;
    std::size_t head_ = 0;  // oldest entry
    std::size_t size_ = 0;
    std::uint64_t dropped_ = 0;
    std::uint64_t pushes_ = 0;
    std::uint64_t polls_ = 0;
};

// r = 1 - p for p in [0, 1].
double errp_reward(double p_errp);

// r_sparse + w_hf * r_errp (or w_hf * (2 r_errp - 1) when centered) when a
// decoded epoch is credited to this step, r_sparse otherwise.
double composite_reward(double r_sparse, std::optional<double> r_errp, double w_hf, bool center_errp = false);

struct RewardBreakdown {
    int step = 0;
    Judgment judgment = Judgment::None;
    double r_sparse = 0.0;
    double r_dense_shaping = 0.0;
    std::optional<double> p_errp;
    std::optional<double> r_errp;
    double r_composite = 0.0;
    double r_unified_eval = 0.0;
};

// Environment-only part of the breakdown; r_composite = r_sparse.
RewardBreakdown environment_breakdown(const EnvEvents& events, int step_index, const RewardConfig& rewards);

struct FeedbackConfig {
    ObserverParams observer;
    double w_hf = 0.1;
    bool center_errp = false;
    // On early success, judge the rest of the horizon as a robot resting at
    // the goal and credit it to the terminal step.
    bool absorbing_tail = true;
    std::size_t ring_capacity = 16;

    void validate() const;
};

// Simulated observer + EEG stream + frozen decoder for one run.
class FeedbackChannel {
public:
    FeedbackChannel(SubjectProfile subject, std::shared_ptr<const ErrorDecoder> decoder, FeedbackConfig cfg,
                    RewardConfig rewards, SignalConfig signal, std::uint64_t seed);

    RewardBreakdown tick(const EnvEvents& events, int step_index);

    // Feedback part of the reward for judgment steps in (done_step, horizon]
    // with the robot motionless; `rest` carries its clearance.
    double tail_reward(const EnvEvents& rest, int done_step, int horizon);

    const EpochRing& ring() const { return ring_; }
    const FeedbackConfig& config() const { return cfg_; }
    std::uint64_t judgments() const { return judgments_; }

private:
    SubjectProfile subject_;
    std::shared_ptr<const ErrorDecoder> decoder_;
    FeedbackConfig cfg_;
    RewardConfig rewards_;
    SignalConfig signal_;
    Rng rng_;
    EpochRing ring_;
    std::uint64_t judgments_ = 0;
};

void write_breakdown_csv_header(std::ostream& out);
void write_breakdown_csv_row(std::ostream& out, const RewardBreakdown& b);

}  // namespace rlihf
