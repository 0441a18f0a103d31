#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "rlihf/geometry.hpp"

namespace rlihf {

struct EpisodeRecord {
    int episode_index = 0;
    std::int64_t step_begin = 0;
    std::int64_t step_end = 0;
    bool success = false;
    Polyline trajectory;
    double eval_return = 0.0;
    int collisions = 0;
};

double success_rate(std::span<const EpisodeRecord> records);
double success_rate(std::span<const bool> outcomes);

// length(ideal) / length(actual), unclamped.
double path_efficiency(const Polyline& actual, const Polyline& ideal);
// RMS over actual vertices of the distance to the ideal polyline.
double path_deviation(const Polyline& actual, const Polyline& ideal);

struct EvalRollout {
    double unified_return = 0.0;
    bool success = false;
    std::optional<double> path_efficiency;  // absent for a motionless rollout
    double path_deviation = 0.0;
    int collisions = 0;
    int steps = 0;
};

struct EvalPoint {
    std::int64_t global_step = 0;
    int episode = 0;
    std::vector<EvalRollout> rollouts;
    double mean_return = 0.0;
    double std_return = 0.0;
};

struct TrainEpisode {
    int index = 0;
    std::int64_t step_begin = 0;
    int steps = 0;
    double train_return = 0.0;
    double unified_return = 0.0;
    bool success = false;
    int collisions = 0;
    int judgments = 0;
    int error_judgments = 0;
    int decoded_correct = 0;  // judgments where p_errp >= 0.5 matched the observer
};

struct RunSummary {
    std::string condition;  // sparse | dense | rlihf
    int subject_id = 0;
    double w_hf = 0.0;
    int seed_index = 0;
    std::uint64_t seed = 0;
    std::int64_t total_steps = 0;
    std::vector<EvalPoint> evals;
    std::vector<TrainEpisode> episodes;

    // "sparse", "dense", or "rlihf w_hf=<w>"
    std::string condition_key() const;
};

enum class TrainingPhase { Early = 0, Mid = 1, Late = 2 };
std::string to_string(TrainingPhase p);

struct PhaseBounds {
    std::int64_t mid_start = 50000;
    std::int64_t late_start = 100000;
};

// Half-open cells [0, mid) [mid, late) [late, end].
TrainingPhase phase_of(std::int64_t global_step, const PhaseBounds& bounds = {});

struct Stat {
    double mean = 0.0;
    double std = 0.0;  // population
    std::size_t n = 0;
};

Stat population_stat(std::span<const double> values);

inline const std::vector<std::string>& phase_metrics() {
    static const std::vector<std::string> m{"success_rate", "path_efficiency", "path_deviation"};
    return m;
}

struct PhaseTable {
    std::vector<std::string> conditions;  // first-seen order
    // (phase, condition, metric) -> stat; missing key means an empty cell.
    std::map<std::tuple<TrainingPhase, std::string, std::string>, Stat> cells;
    // evaluation points per (phase, condition)
    std::map<std::pair<TrainingPhase, std::string>, std::size_t> points;

    std::optional<Stat> get(TrainingPhase p, const std::string& condition, const std::string& metric) const;
};

// Pools every rollout of every run by condition and phase.
PhaseTable aggregate_phases(std::span<const RunSummary> runs, const PhaseBounds& bounds = {});

// Mean +- std of the per-rollout unified return over one phase.
std::optional<Stat> phase_return(std::span<const RunSummary> runs, const std::string& condition_key,
                                 TrainingPhase phase, const PhaseBounds& bounds = {});

struct CurvePoint {
    std::int64_t step = 0;
    Stat value;
};

// Across runs of one condition: per evaluation step, stats of the run-level
// mean returns.
std::vector<CurvePoint> learning_curve(std::span<const RunSummary> runs, const std::string& condition_key);

// Fixed-format decimal used in every emitted table.
std::string format_number(double v);

void write_phase_csv(std::ostream& out, const PhaseTable& table);
std::string format_phase_table(const PhaseTable& table);
void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve);

}  // namespace rlihf
