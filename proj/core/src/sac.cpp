#include "rlihf/sac.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>

#include <json.hpp>

#include "rlihf/blob.hpp"
#include "rlihf/errors.hpp"

namespace rlihf {
namespace {

constexpr char kCheckpointMagic[9] = "RLSAC001";

using nn::Matrix;
using nn::Mlp;
using nn::Vector;

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// log(1 - tanh(u)^2) without cancellation.
double log_tanh_jacobian(double u) { return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u)); }

Matrix stack(const Matrix& top, const Matrix& bottom) {
    Matrix out(top.rows() + bottom.rows(), top.cols());
    out.topRows(top.rows()) = top;
    out.bottomRows(bottom.rows()) = bottom;
    return out;
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = n(rng);
    }
    return m;
}

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> s{in};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(out);
    return s;
}

}  // namespace

void SacConfig::validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (buffer_capacity < static_cast<std::size_t>(batch)) throw ConfigError("buffer_capacity must be >= batch");
    if (warmup_steps < 0) throw ConfigError("warmup_steps must be >= 0");
    if (hidden.empty()) throw ConfigError("at least one hidden layer is required");
    if (!(init_alpha > 0.0)) throw ConfigError("init_alpha must be positive");
    if (updates_per_step < 1) throw ConfigError("updates_per_step must be >= 1");
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, int obs_dim, int act_dim)
    : capacity_(capacity),
      obs_dim_(obs_dim),
      act_dim_(act_dim),
      obs_(obs_dim, static_cast<Eigen::Index>(capacity)),
      action_(act_dim, static_cast<Eigen::Index>(capacity)),
      next_obs_(obs_dim, static_cast<Eigen::Index>(capacity)),
      reward_(static_cast<Eigen::Index>(capacity)),
      done_(static_cast<Eigen::Index>(capacity)) {
    if (capacity == 0) throw ConfigError("replay capacity must be >= 1");
}

void ReplayBuffer::push(std::span<const double> obs, std::span<const double> action, double reward,
                        std::span<const double> next_obs, bool done) {
    if (obs.size() != static_cast<std::size_t>(obs_dim_) || next_obs.size() != static_cast<std::size_t>(obs_dim_) ||
        action.size() != static_cast<std::size_t>(act_dim_)) {
        throw ContractError("replay transition has wrong dimensions");
    }
    const auto c = static_cast<Eigen::Index>(cursor_);
    obs_.col(c) = Eigen::Map<const Vector>(obs.data(), obs_dim_);
    action_.col(c) = Eigen::Map<const Vector>(action.data(), act_dim_);
    next_obs_.col(c) = Eigen::Map<const Vector>(next_obs.data(), obs_dim_);
    reward_[c] = reward;
    done_[c] = done ? 1.0 : 0.0;
    cursor_ = (cursor_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
}

std::vector<std::size_t> ReplayBuffer::sample_indices(int batch, Rng& rng) const {
    if (batch < 1 || size_ < static_cast<std::size_t>(batch)) {
        throw ContractError("replay buffer holds fewer transitions than the batch size");
    }
    std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
    std::vector<std::size_t> idx(static_cast<std::size_t>(batch));
    for (auto& i : idx) i = pick(rng);
    return idx;
}

ReplayBatch ReplayBuffer::sample(int batch, Rng& rng) const {
    const auto idx = sample_indices(batch, rng);
    ReplayBatch b;
    b.obs.resize(obs_dim_, batch);
    b.action.resize(act_dim_, batch);
    b.next_obs.resize(obs_dim_, batch);
    b.reward.resize(batch);
    b.done.resize(batch);
    for (int k = 0; k < batch; ++k) {
        const auto i = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(k)]);
        b.obs.col(k) = obs_.col(i);
        b.action.col(k) = action_.col(i);
        b.next_obs.col(k) = next_obs_.col(i);
        b.reward[k] = reward_[i];
        b.done[k] = done_[i];
    }
    return b;
}

PolicySample sample_policy(const Mlp& actor, const Matrix& obs, const Matrix& noise) {
    const int ad = actor.output_dim() / 2;
    PolicySample s;
    const Matrix out = actor.forward(obs, &s.cache);
    s.mean = out.topRows(ad);
    const Matrix raw = out.bottomRows(ad);
    s.log_std = raw.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
    s.log_std_active = (raw.array() >= kLogStdMin) && (raw.array() <= kLogStdMax);
    if (noise.rows() != ad || noise.cols() != obs.cols()) throw ContractError("policy noise has wrong shape");

    const Matrix std = s.log_std.array().exp().matrix();
    s.pre_tanh = s.mean + std.cwiseProduct(noise);
    s.action = s.pre_tanh.array().tanh().matrix();
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    s.log_prob.resize(obs.cols());
    for (Eigen::Index c = 0; c < obs.cols(); ++c) {
        double lp = 0.0;
        for (Eigen::Index j = 0; j < ad; ++j) {
            const double xi = noise(j, c);
            lp += -0.5 * xi * xi - s.log_std(j, c) - half_log_2pi - log_tanh_jacobian(s.pre_tanh(j, c));
        }
        s.log_prob[c] = lp;
    }
    return s;
}

Vector bellman_targets(const ReplayBatch& batch, const Mlp& actor, const Mlp& q1_target, const Mlp& q2_target,
                       const Matrix& next_noise, double alpha, double gamma) {
    const PolicySample next = sample_policy(actor, batch.next_obs, next_noise);
    const Matrix in = stack(batch.next_obs, next.action);
    const Matrix q1 = q1_target.forward(in);
    const Matrix q2 = q2_target.forward(in);
    const Vector soft_value = q1.cwiseMin(q2).row(0).transpose() - alpha * next.log_prob;
    return batch.reward + gamma * (Vector::Ones(batch.size()) - batch.done).cwiseProduct(soft_value);
}

LossGrad critic_loss(const Mlp& critic, const ReplayBatch& batch, const Vector& targets) {
    Mlp::Cache cache;
    const Matrix q = critic.forward(stack(batch.obs, batch.action), &cache);
    const Eigen::RowVectorXd diff = q.row(0) - targets.transpose();
    const double n = static_cast<double>(batch.size());
    LossGrad out;
    out.value = diff.squaredNorm() / n;
    out.grad = Vector::Zero(critic.param_count());
    critic.backward(cache, (2.0 / n) * diff, &out.grad);
    return out;
}

ActorLoss actor_loss(const Mlp& actor, const Mlp& q1, const Mlp& q2, const Matrix& obs, const Matrix& noise,
                     double alpha) {
    const PolicySample s = sample_policy(actor, obs, noise);
    const Eigen::Index ad = s.action.rows();
    const Eigen::Index b = obs.cols();
    const double inv_b = 1.0 / static_cast<double>(b);

    const Matrix in = stack(obs, s.action);
    Mlp::Cache c1, c2;
    const Matrix v1 = q1.forward(in, &c1);
    const Matrix v2 = q2.forward(in, &c2);

    Matrix g1 = Matrix::Zero(1, b);
    Matrix g2 = Matrix::Zero(1, b);
    double total = 0.0;
    for (Eigen::Index c = 0; c < b; ++c) {
        const bool first = v1(0, c) <= v2(0, c);
        total += alpha * s.log_prob[c] - (first ? v1(0, c) : v2(0, c));
        (first ? g1 : g2)(0, c) = -inv_b;
    }
    const Matrix dq_da = q1.backward(c1, g1, nullptr).bottomRows(ad) + q2.backward(c2, g2, nullptr).bottomRows(ad);

    const Matrix one_minus_a2 = (1.0 - s.action.array().square()).matrix();
    const Matrix d_pre = (alpha * inv_b) * 2.0 * s.action + dq_da.cwiseProduct(one_minus_a2);
    const Matrix std = s.log_std.array().exp().matrix();
    // noise = (pre_tanh - mean) / std, recovered exactly from the inputs.
    Matrix d_log_std = (d_pre.array() * std.array() * noise.array() - alpha * inv_b).matrix();
    d_log_std = s.log_std_active.select(d_log_std, 0.0);

    ActorLoss out;
    out.value = total * inv_b;
    out.log_prob = s.log_prob;
    out.grad = Vector::Zero(actor.param_count());
    actor.backward(s.cache, stack(d_pre, d_log_std), &out.grad);
    return out;
}

AlphaLoss alpha_loss(double log_alpha, const Vector& log_prob, double target_entropy) {
    const double m = (log_prob.array() + target_entropy).mean();
    return {-log_alpha * m, -m};
}

void soft_update(Vector& target, const Vector& online, double tau) {
    if (tau == 1.0) {
        target = online;
        return;
    }
    target = tau * online + (1.0 - tau) * target;
}

SacAgent::SacAgent(int obs_dim, int act_dim, SacConfig cfg, std::uint64_t seed)
    : obs_dim_(obs_dim), act_dim_(act_dim), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (obs_dim < 1 || act_dim < 1) throw ConfigError("observation and action dims must be positive");
    target_entropy_ = cfg_.auto_target_entropy ? -static_cast<double>(act_dim) : cfg_.target_entropy;
    Rng rng = make_stream(seed, "sac-init");
    actor_ = Mlp(layer_sizes(obs_dim, cfg_.hidden, 2 * act_dim), rng);
    q1_ = Mlp(layer_sizes(obs_dim + act_dim, cfg_.hidden, 1), rng);
    q2_ = Mlp(layer_sizes(obs_dim + act_dim, cfg_.hidden, 1), rng);
    q1_target_ = q1_;
    q2_target_ = q2_;
    actor_opt_ = nn::Adam(actor_.param_count(), cfg_.lr);
    q1_opt_ = nn::Adam(q1_.param_count(), cfg_.lr);
    q2_opt_ = nn::Adam(q2_.param_count(), cfg_.lr);
    alpha_opt_ = nn::Adam(1, cfg_.lr);
    log_alpha_ = Vector::Constant(1, std::log(cfg_.init_alpha));
}

double SacAgent::alpha() const { return std::exp(log_alpha_[0]); }

std::vector<double> SacAgent::select_action(std::span<const double> obs, ActionMode mode, Rng& rng) const {
    if (obs.size() != static_cast<std::size_t>(obs_dim_)) throw ContractError("observation dimension mismatch");
    const Matrix x = Eigen::Map<const Matrix>(obs.data(), obs_dim_, 1);
    std::vector<double> out(static_cast<std::size_t>(act_dim_));
    if (mode == ActionMode::Deterministic) {
        const Matrix y = actor_.forward(x);
        for (int j = 0; j < act_dim_; ++j) out[static_cast<std::size_t>(j)] = std::tanh(y(j, 0));
        return out;
    }
    const PolicySample s = sample_policy(actor_, x, standard_normal(act_dim_, 1, rng));
    for (int j = 0; j < act_dim_; ++j) out[static_cast<std::size_t>(j)] = s.action(j, 0);
    return out;
}

UpdateStats SacAgent::update(const ReplayBuffer& buffer, Rng& rng) {
    const auto need = std::max<std::size_t>(static_cast<std::size_t>(cfg_.batch), static_cast<std::size_t>(cfg_.warmup_steps));
    if (buffer.size() < need) throw ContractError("SAC update requested before warmup completed");
    return update_on_batch(buffer.sample(cfg_.batch, rng), rng);
}

UpdateStats SacAgent::update_on_batch(const ReplayBatch& batch, Rng& rng) {
    if (batch.size() != cfg_.batch) throw ContractError("batch size differs from the configured batch");
    const Matrix next_noise = standard_normal(act_dim_, batch.size(), rng);
    const Matrix current_noise = standard_normal(act_dim_, batch.size(), rng);
    return update_with_noise(batch, next_noise, current_noise);
}

UpdateStats SacAgent::update_with_noise(const ReplayBatch& batch, const Matrix& next_noise,
                                        const Matrix& current_noise) {
    UpdateStats stats;
    const double alpha = this->alpha();
    const Vector y = bellman_targets(batch, actor_, q1_target_, q2_target_, next_noise, alpha, cfg_.gamma);

    const LossGrad l1 = critic_loss(q1_, batch, y);
    const LossGrad l2 = critic_loss(q2_, batch, y);
    q1_opt_.step(q1_.params(), l1.grad);
    q2_opt_.step(q2_.params(), l2.grad);
    stats.critic_loss = 0.5 * (l1.value + l2.value);

    const ActorLoss la = actor_loss(actor_, q1_, q2_, batch.obs, current_noise, alpha);
    actor_opt_.step(actor_.params(), la.grad);
    stats.actor_loss = la.value;
    stats.entropy = -la.log_prob.mean();

    const AlphaLoss lt = alpha_loss(log_alpha_[0], la.log_prob, target_entropy_);
    alpha_opt_.step(log_alpha_, Vector::Constant(1, lt.grad));
    stats.alpha_loss = lt.value;
    stats.alpha = this->alpha();

    soft_update(q1_target_.params(), q1_.params(), cfg_.tau);
    soft_update(q2_target_.params(), q2_.params(), cfg_.tau);
    return stats;
}

void SacAgent::save_checkpoint(std::ostream& out) const {
    nlohmann::json h;
    h["kind"] = "sac-agent";
    h["obs_dim"] = obs_dim_;
    h["act_dim"] = act_dim_;
    h["hidden"] = cfg_.hidden;
    h["gamma"] = cfg_.gamma;
    h["tau"] = cfg_.tau;
    h["lr"] = cfg_.lr;
    h["target_entropy"] = target_entropy_;
    h["blocks"] = {{{"name", "actor"}, {"count", actor_.param_count()}},
                   {{"name", "critic1"}, {"count", q1_.param_count()}},
                   {{"name", "critic2"}, {"count", q2_.param_count()}},
                   {{"name", "target1"}, {"count", q1_target_.param_count()}},
                   {{"name", "target2"}, {"count", q2_target_.param_count()}},
                   {{"name", "log_alpha"}, {"count", 1}}};
    Blob blob;
    blob.header_json = h.dump();
    for (const Mlp* m : {&actor_, &q1_, &q2_, &q1_target_, &q2_target_}) {
        blob.values.insert(blob.values.end(), m->params().data(), m->params().data() + m->param_count());
    }
    blob.values.push_back(log_alpha_[0]);
    write_blob(out, kCheckpointMagic, blob);
}

void SacAgent::load_checkpoint(std::istream& in) {
    const Blob blob = read_blob(in, kCheckpointMagic);
    const auto h = nlohmann::json::parse(blob.header_json);
    if (h.at("obs_dim").get<int>() != obs_dim_ || h.at("act_dim").get<int>() != act_dim_ ||
        h.at("hidden").get<std::vector<int>>() != cfg_.hidden) {
        throw ConfigError("checkpoint architecture does not match this agent");
    }
    std::size_t k = 0;
    for (Mlp* m : {&actor_, &q1_, &q2_, &q1_target_, &q2_target_}) {
        if (k + static_cast<std::size_t>(m->param_count()) > blob.values.size()) throw ConfigError("checkpoint truncated");
        for (Eigen::Index i = 0; i < m->param_count(); ++i) m->params()[i] = blob.values[k++];
    }
    if (k + 1 != blob.values.size()) throw ConfigError("checkpoint size mismatch");
    log_alpha_[0] = blob.values[k];
}

}  // namespace rlihf
