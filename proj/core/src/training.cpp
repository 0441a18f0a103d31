#include "rlihf/training.hpp"

#include <cmath>
#include <optional>

#include "rlihf/errors.hpp"

namespace rlihf {

std::string to_string(ConditionKind kind) {
    switch (kind) {
        case ConditionKind::Sparse: return "sparse";
        case ConditionKind::Dense: return "dense";
        case ConditionKind::Rlihf: return "rlihf";
    }
    return "?";
}

ConditionKind parse_condition(const std::string& name) {
    if (name == "sparse") return ConditionKind::Sparse;
    if (name == "dense") return ConditionKind::Dense;
    if (name == "rlihf") return ConditionKind::Rlihf;
    throw ConfigError("unknown condition '" + name + "' (expected sparse, dense or rlihf)");
}

void TrainConfig::validate(int episode_length) const {
    if (total_steps < 1) throw ConfigError("train.total_steps must be >= 1");
    if (eval_interval_episodes < 1) throw ConfigError("train.eval_interval_episodes must be >= 1");
    if (eval_rollouts < 1) throw ConfigError("train.eval_rollouts must be >= 1");
    if (!(eval_start_jitter >= 0.0)) throw ConfigError("train.eval_start_jitter must be >= 0");
    if (episode_length < 1) throw ConfigError("env.episode_length must be >= 1");
}

EvalPoint evaluate_policy(const Environment& eval_env, const SacAgent& agent, const RewardConfig& rewards,
                          int rollouts, std::uint64_t seed) {
    EvalPoint point;
    Rng unused(0);  // deterministic actions draw nothing
    const int horizon = eval_env.config().episode_length;
    std::vector<double> returns;
    for (int k = 0; k < rollouts; ++k) {
        EnvState state = eval_env.reset(hash_combine(seed, static_cast<std::uint64_t>(k)));
        EvalRollout r;
        while (state.phase != Phase::Done && state.step_index < horizon) {
            const Observation obs = eval_env.observe(state);
            const auto a = agent.select_action(obs, ActionMode::Deterministic, unused);
            EnvEvents ev;
            state = eval_env.step(std::move(state), Vec2(a[0], a[1]), ev);
            r.unified_return += env_reward(ev, RewardMode::Dense, rewards);
            r.collisions += ev.collision ? 1 : 0;
        }
        r.steps = state.step_index;
        r.success = state.phase == Phase::Done;
        if (polyline_length(state.trajectory) > 0.0) {
            r.path_efficiency = path_efficiency(state.trajectory, eval_env.ideal());
        }
        r.path_deviation = path_deviation(state.trajectory, eval_env.ideal());
        returns.push_back(r.unified_return);
        point.rollouts.push_back(std::move(r));
    }
    const Stat s = population_stat(returns);
    point.mean_return = s.mean;
    point.std_return = s.std;
    return point;
}

RunSummary train_run(const Environment& env, const RunSpec& spec, const RewardConfig& rewards,
                     const SacConfig& sac, const TrainConfig& train, const FeedbackSetup* feedback,
                     const TrainHooks* hooks) {
    const int horizon = env.config().episode_length;
    train.validate(horizon);
    sac.validate();

    std::optional<FeedbackChannel> channel;
    if (spec.condition == ConditionKind::Rlihf) {
        if (feedback == nullptr || !feedback->decoder) {
            throw ConfigError("rlihf condition requires a subject and a decoder");
        }
        FeedbackConfig fc = feedback->feedback;
        fc.w_hf = spec.w_hf;
        channel.emplace(feedback->subject, feedback->decoder, fc, rewards, feedback->signal,
                        make_stream_seed(spec.seed, "feedback"));
    }

    EnvConfig eval_cfg = env.config();
    eval_cfg.start_jitter = train.eval_start_jitter;
    const Environment eval_env(env.layout(), eval_cfg);

    Rng explore = make_stream(spec.seed, "explore");
    Rng learner = make_stream(spec.seed, "learner");
    SacAgent agent(kObservationDim, 2, sac, make_stream_seed(spec.seed, "init"));
    ReplayBuffer buffer(sac.buffer_capacity, kObservationDim, 2);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);

    RunSummary out;
    out.condition = to_string(spec.condition);
    out.subject_id = spec.subject_id;
    out.w_hf = spec.condition == ConditionKind::Rlihf ? spec.w_hf : 0.0;
    out.seed_index = spec.seed_index;
    out.seed = spec.seed;
    out.total_steps = train.total_steps;

    const std::int64_t eval_every = static_cast<std::int64_t>(train.eval_interval_episodes) * horizon;
    const std::uint64_t reset_seed = make_stream_seed(spec.seed, "reset");
    const std::uint64_t eval_seed = make_stream_seed(spec.seed, "eval");

    std::int64_t global = 0;
    int episode = 0;
    while (global < train.total_steps) {
        EnvState state = env.reset(hash_combine(reset_seed, static_cast<std::uint64_t>(episode)));
        Observation obs = env.observe(state);
        TrainEpisode rec;
        rec.index = episode;
        rec.step_begin = global;
        while (true) {
            std::vector<double> action;
            if (global < sac.warmup_steps) {
                action = {uniform(explore), uniform(explore)};
            } else {
                action = agent.select_action(obs, ActionMode::Stochastic, explore);
            }
            EnvEvents ev;
            state = env.step(std::move(state), Vec2(action[0], action[1]), ev);
            const Observation next = env.observe(state);

            RewardBreakdown b = channel ? channel->tick(ev, state.step_index)
                                        : environment_breakdown(ev, state.step_index, rewards);
            double reward = 0.0;
            switch (spec.condition) {
                case ConditionKind::Sparse: reward = b.r_sparse; break;
                case ConditionKind::Dense: reward = b.r_unified_eval; break;
                case ConditionKind::Rlihf: reward = b.r_composite; break;
            }
            if (hooks && hooks->on_step) hooks->on_step(b);

            const bool terminal = state.phase == Phase::Done;
            if (terminal && channel && channel->config().absorbing_tail && spec.w_hf != 0.0) {
                reward += channel->tail_reward(ev, state.step_index, horizon);
            }
            buffer.push(obs, action, reward, next, terminal);
            ++global;

            rec.train_return += reward;
            rec.unified_return += b.r_unified_eval;
            rec.collisions += ev.collision ? 1 : 0;
            if (b.judgment != Judgment::None) {
                ++rec.judgments;
                const bool err = b.judgment == Judgment::Error;
                rec.error_judgments += err ? 1 : 0;
                if (b.p_errp && ((*b.p_errp >= 0.5) == err)) ++rec.decoded_correct;
            }

            if (global >= sac.warmup_steps && buffer.size() >= static_cast<std::size_t>(sac.batch)) {
                for (int u = 0; u < sac.updates_per_step; ++u) {
                    const UpdateStats st = agent.update(buffer, learner);
                    if (hooks && hooks->on_update) hooks->on_update(global, st);
                }
            }
            if (global % eval_every == 0) {
                EvalPoint p = evaluate_policy(eval_env, agent, rewards, train.eval_rollouts,
                                              hash_combine(eval_seed, static_cast<std::uint64_t>(global)));
                p.global_step = global;
                p.episode = episode;
                if (hooks && hooks->on_eval) hooks->on_eval(p);
                out.evals.push_back(std::move(p));
            }
            obs = next;
            if (terminal || state.step_index >= horizon || global >= train.total_steps) break;
        }
        rec.steps = state.step_index;
        rec.success = state.phase == Phase::Done;
        if (hooks && hooks->on_episode) hooks->on_episode(rec);
        out.episodes.push_back(rec);
        ++episode;
    }
    return out;
}

}  // namespace rlihf
