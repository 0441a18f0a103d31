#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "rlihf/nn.hpp"
#include "rlihf/rng.hpp"

namespace rlihf {

struct SacConfig {
    double gamma = 0.99;
    double tau = 0.005;
    double lr = 3e-4;  // actor, critics and temperature
    int batch = 256;
    std::size_t buffer_capacity = 150000;
    int warmup_steps = 1000;
    std::vector<int> hidden{64, 64};
    double target_entropy = 0.0;  // 0 selects -action_dim
    bool auto_target_entropy = true;
    double init_alpha = 1.0;
    int updates_per_step = 1;

    void validate() const;
};

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

struct ReplayBatch {
    nn::Matrix obs;       // obs_dim x B
    nn::Matrix action;    // act_dim x B
    nn::Vector reward;    // B
    nn::Matrix next_obs;  // obs_dim x B
    nn::Vector done;      // 1 for terminal transitions (no bootstrap)

    Eigen::Index size() const { return reward.size(); }
};

class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, int obs_dim, int act_dim);

    void push(std::span<const double> obs, std::span<const double> action, double reward,
              std::span<const double> next_obs, bool done);
    // Uniform with replacement; requires size() >= batch.
    ReplayBatch sample(int batch, Rng& rng) const;
    std::vector<std::size_t> sample_indices(int batch, Rng& rng) const;

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    double reward_at(std::size_t i) const { return reward_[static_cast<Eigen::Index>(i)]; }

private:
    std::size_t capacity_;
    int obs_dim_, act_dim_;
    std::size_t cursor_ = 0;
    std::size_t size_ = 0;
    nn::Matrix obs_, action_, next_obs_;
    nn::Vector reward_, done_;
};

// Reparameterized tanh-Gaussian draw: a = tanh(mean + std * noise).
struct PolicySample {
    nn::Matrix action;
    nn::Vector log_prob;
    nn::Matrix pre_tanh;
    nn::Matrix mean;
    nn::Matrix log_std;  // clamped
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> log_std_active;  // inside clamp range
    nn::Mlp::Cache cache;
};

PolicySample sample_policy(const nn::Mlp& actor, const nn::Matrix& obs, const nn::Matrix& noise);

// y = r + gamma (1 - done) (min(Q1', Q2')(s', a') - alpha log pi(a'|s')).
nn::Vector bellman_targets(const ReplayBatch& batch, const nn::Mlp& actor, const nn::Mlp& q1_target,
                           const nn::Mlp& q2_target, const nn::Matrix& next_noise, double alpha, double gamma);

struct LossGrad {
    double value = 0.0;
    nn::Vector grad;
};

// mean (Q(s,a) - y)^2
LossGrad critic_loss(const nn::Mlp& critic, const ReplayBatch& batch, const nn::Vector& targets);

struct ActorLoss {
    double value = 0.0;
    nn::Vector grad;
    nn::Vector log_prob;
};

// mean (alpha log pi(a~|s) - min(Q1, Q2)(s, a~)) with a~ reparameterized by `noise`.
ActorLoss actor_loss(const nn::Mlp& actor, const nn::Mlp& q1, const nn::Mlp& q2, const nn::Matrix& obs,
                     const nn::Matrix& noise, double alpha);

struct AlphaLoss {
    double value = 0.0;
    double grad = 0.0;  // d/d log_alpha
};

// -log_alpha * mean(log_prob + target_entropy)
AlphaLoss alpha_loss(double log_alpha, const nn::Vector& log_prob, double target_entropy);

// target <- tau * online + (1 - tau) * target
void soft_update(nn::Vector& target, const nn::Vector& online, double tau);

struct UpdateStats {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double alpha_loss = 0.0;
    double alpha = 0.0;
    double entropy = 0.0;  // -mean log pi of the actor sample
};

enum class ActionMode { Stochastic, Deterministic };

class SacAgent {
public:
    SacAgent(int obs_dim, int act_dim, SacConfig cfg, std::uint64_t seed);

    std::vector<double> select_action(std::span<const double> obs, ActionMode mode, Rng& rng) const;

    // Samples a batch and performs one update; requires warmup to be met.
    UpdateStats update(const ReplayBuffer& buffer, Rng& rng);
    UpdateStats update_on_batch(const ReplayBatch& batch, Rng& rng);
    UpdateStats update_with_noise(const ReplayBatch& batch, const nn::Matrix& next_noise,
                                  const nn::Matrix& current_noise);

    double alpha() const;
    double log_alpha() const { return log_alpha_[0]; }
    double target_entropy() const { return target_entropy_; }
    const SacConfig& config() const { return cfg_; }
    int obs_dim() const { return obs_dim_; }
    int act_dim() const { return act_dim_; }

    nn::Mlp& actor() { return actor_; }
    nn::Mlp& critic1() { return q1_; }
    nn::Mlp& critic2() { return q2_; }
    nn::Mlp& target1() { return q1_target_; }
    nn::Mlp& target2() { return q2_target_; }
    const nn::Mlp& actor() const { return actor_; }
    const nn::Mlp& critic1() const { return q1_; }
    const nn::Mlp& critic2() const { return q2_; }
    const nn::Mlp& target1() const { return q1_target_; }
    const nn::Mlp& target2() const { return q2_target_; }

    void save_checkpoint(std::ostream& out) const;
    void load_checkpoint(std::istream& in);

private:
    int obs_dim_;
    int act_dim_;
    SacConfig cfg_;
    double target_entropy_;
    nn::Mlp actor_, q1_, q2_, q1_target_, q2_target_;
    nn::Adam actor_opt_, q1_opt_, q2_opt_, alpha_opt_;
    nn::Vector log_alpha_;
};

}  // namespace rlihf
