#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "rlihf/envsim.hpp"
#include "rlihf/eval.hpp"
#include "rlihf/feedback.hpp"
#include "rlihf/sac.hpp"

namespace rlihf {

enum class ConditionKind { Sparse, Dense, Rlihf };
std::string to_string(ConditionKind kind);
ConditionKind parse_condition(const std::string& name);

struct TrainConfig {
    std::int64_t total_steps = 150000;  // 150 episodes x 1000 steps
    int eval_interval_episodes = 5;     // in units of episode_length steps
    int eval_rollouts = 5;
    double eval_start_jitter = 0.02;

    void validate(int episode_length) const;
};

// Everything the rlihf condition needs beyond the environment.
struct FeedbackSetup {
    SubjectProfile subject;
    std::shared_ptr<const ErrorDecoder> decoder;
    FeedbackConfig feedback;
    SignalConfig signal;
};

struct TrainHooks {
    std::function<void(const RewardBreakdown&)> on_step;
    std::function<void(const TrainEpisode&)> on_episode;
    std::function<void(const EvalPoint&)> on_eval;
    std::function<void(std::int64_t, const UpdateStats&)> on_update;
};

struct RunSpec {
    ConditionKind condition = ConditionKind::Sparse;
    int subject_id = 0;
    double w_hf = 0.0;
    int seed_index = 0;
    std::uint64_t seed = 0;
};

// Deterministic rollouts of the mean action, scored by the dense formula.
EvalPoint evaluate_policy(const Environment& eval_env, const SacAgent& agent, const RewardConfig& rewards,
                          int rollouts, std::uint64_t seed);

// Episodes end on success or after episode_length steps; training stops
// after total_steps environment steps.
RunSummary train_run(const Environment& env, const RunSpec& spec, const RewardConfig& rewards,
                     const SacConfig& sac, const TrainConfig& train, const FeedbackSetup* feedback = nullptr,
                     const TrainHooks* hooks = nullptr);

}  // namespace rlihf
