#include "rlihf/nn.hpp"

#include <cmath>

#include "rlihf/errors.hpp"

namespace rlihf::nn {

Mlp::Mlp(std::vector<int> sizes, Rng& rng) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ConfigError("an MLP needs at least input and output sizes");
    Eigen::Index total = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw ConfigError("layer sizes must be positive");
        offsets_.push_back(total);
        total += static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
    }
    params_.resize(total);
    // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
    for (std::size_t l = 0; l < layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
        std::uniform_real_distribution<double> u(-bound, bound);
        const Eigen::Index n = static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
        for (Eigen::Index k = 0; k < n; ++k) params_[offsets_[l] + k] = u(rng);
    }
}

Eigen::Map<const Matrix> Mlp::weight(std::size_t l) const {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}

Eigen::Map<const Vector> Mlp::bias(std::size_t l) const {
    return {params_.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]};
}

Matrix Mlp::forward(const Matrix& x, Cache* cache) const {
    if (x.rows() != sizes_.front()) throw ContractError("MLP input dimension mismatch");
    if (cache) {
        cache->activations.resize(layers());
        cache->activations[0] = x;
    }
    Matrix a = x;
    for (std::size_t l = 0; l < layers(); ++l) {
        Matrix z = weight(l) * a;
        z.colwise() += bias(l);
        if (l + 1 < layers()) {
            z = z.cwiseMax(0.0);
            if (cache) cache->activations[l + 1] = z;
        }
        a = std::move(z);
    }
    return a;
}

Matrix Mlp::backward(const Cache& cache, const Matrix& grad_out, Vector* grad_params) const {
    Matrix delta = grad_out;
    for (std::size_t l = layers(); l-- > 0;) {
        const Matrix& in = cache.activations[l];
        if (grad_params) {
            Eigen::Map<Matrix> gw(grad_params->data() + offsets_[l], sizes_[l + 1], sizes_[l]);
            Eigen::Map<Vector> gb(grad_params->data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l + 1]) * sizes_[l],
                                  sizes_[l + 1]);
            gw.noalias() += delta * in.transpose();
            gb += delta.rowwise().sum();
        }
        Matrix prev = weight(l).transpose() * delta;
        if (l > 0) prev = (in.array() > 0.0).select(prev, 0.0);
        delta = std::move(prev);
    }
    return delta;
}

Adam::Adam(Eigen::Index n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(Vector::Zero(n)), v_(Vector::Zero(n)) {}

void Adam::step(Vector& params, const Vector& grad) {
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace rlihf::nn
