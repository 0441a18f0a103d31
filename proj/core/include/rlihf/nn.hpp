#pragma once

#include <vector>

#include <Eigen/Core>

#include "rlihf/rng.hpp"

namespace rlihf::nn {

using Matrix = Eigen::MatrixXd;  // features x batch
using Vector = Eigen::VectorXd;

// Fully connected ReLU network with a linear output layer. All parameters
// live in one flat vector: per layer, W (out x in, column-major) then b.
class Mlp {
public:
    Mlp() = default;
    Mlp(std::vector<int> sizes, Rng& rng);

    struct Cache {
        std::vector<Matrix> activations;  // input, then each hidden output
    };

    Matrix forward(const Matrix& x, Cache* cache = nullptr) const;

    // Backpropagates `grad_out` (out x batch). Adds parameter gradients into
    // `grad_params` when non-null; returns the gradient w.r.t. the input.
    Matrix backward(const Cache& cache, const Matrix& grad_out, Vector* grad_params) const;

    Vector& params() { return params_; }
    const Vector& params() const { return params_; }
    Eigen::Index param_count() const { return params_.size(); }
    const std::vector<int>& sizes() const { return sizes_; }
    int input_dim() const { return sizes_.front(); }
    int output_dim() const { return sizes_.back(); }

private:
    std::size_t layers() const { return sizes_.size() - 1; }
    Eigen::Map<const Matrix> weight(std::size_t l) const;
    Eigen::Map<const Vector> bias(std::size_t l) const;

    std::vector<int> sizes_;
    std::vector<Eigen::Index> offsets_;
    Vector params_;
};

class Adam {
public:
    Adam() = default;
    Adam(Eigen::Index n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(Vector& params, const Vector& grad);
    long steps() const { return t_; }

    Vector& first_moment() { return m_; }
    Vector& second_moment() { return v_; }

private:
    double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
    Vector m_, v_;
};

}  // namespace rlihf::nn
