#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "schedlab/rng.hpp"

namespace schedlab::nn {

// A named window into the flat parameter vector. All layer weights live
// in one contiguous buffer so the optimizer, gradient clipping,
// finite-difference checks and checkpoints can treat parameters as a
// single vector.
struct Slice {
    std::string name;
    int offset = 0;
    int rows = 0;
    int cols = 0;
    int size() const { return rows * cols; }
};

class ParamStore {
  public:
    Slice alloc(std::string name, int rows, int cols) {
        Slice s{std::move(name), static_cast<int>(values_.size()), rows, cols};
        values_.resize(values_.size() + static_cast<std::size_t>(s.size()), 0.0);
        layout_.push_back(s);
        return s;
    }

    int size() const { return static_cast<int>(values_.size()); }
    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    double* at(const Slice& s) { return values_.data() + s.offset; }
    const double* at(const Slice& s) const { return values_.data() + s.offset; }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    const std::vector<Slice>& layout() const { return layout_; }

  private:
    std::vector<double> values_;
    std::vector<Slice> layout_;
};

// Gradient buffer with the same layout as a ParamStore.
using GradVec = std::vector<double>;

// Row-major matrix scratch buffer.
struct Matv {
    std::vector<double> a;
    int r = 0, c = 0;

    void resize(int rows, int cols) {
        r = rows;
        c = cols;
        a.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    }
    double* row(int i) { return a.data() + static_cast<std::size_t>(i) * c; }
    const double* row(int i) const { return a.data() + static_cast<std::size_t>(i) * c; }
};

// Y (n x out) = X (n x in) * W^T + b, with W stored row-major (out x in).
inline void linear_fwd(const double* W, const double* b, int in, int out, const double* X,
                       int n, double* Y) {
    for (int i = 0; i < n; ++i) {
        const double* x = X + static_cast<std::size_t>(i) * in;
        double* y = Y + static_cast<std::size_t>(i) * out;
        for (int o = 0; o < out; ++o) {
            const double* w = W + static_cast<std::size_t>(o) * in;
            double acc = b[o];
            for (int k = 0; k < in; ++k) acc += w[k] * x[k];
            y[o] = acc;
        }
    }
}

// Accumulates dW/db and writes dX (overwritten, not accumulated) unless null.
inline void linear_bwd(const double* W, int in, int out, const double* X, const double* dY,
                       int n, double* dW, double* db, double* dX) {
    if (dX)
        for (std::size_t i = 0; i < static_cast<std::size_t>(n) * in; ++i) dX[i] = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* x = X + static_cast<std::size_t>(i) * in;
        const double* dy = dY + static_cast<std::size_t>(i) * out;
        double* dx = dX ? dX + static_cast<std::size_t>(i) * in : nullptr;
        for (int o = 0; o < out; ++o) {
            double g = dy[o];
            if (g == 0.0) continue;
            double* dw = dW + static_cast<std::size_t>(o) * in;
            const double* w = W + static_cast<std::size_t>(o) * in;
            for (int k = 0; k < in; ++k) dw[k] += g * x[k];
            db[o] += g;
            if (dx)
                for (int k = 0; k < in; ++k) dx[k] += g * w[k];
        }
    }
}

inline void relu_fwd(const double* X, std::size_t n, double* Y) {
    for (std::size_t i = 0; i < n; ++i) Y[i] = X[i] > 0.0 ? X[i] : 0.0;
}

// dX (overwritten) from the pre-activation X.
inline void relu_bwd(const double* X, const double* dY, std::size_t n, double* dX) {
    for (std::size_t i = 0; i < n; ++i) dX[i] = X[i] > 0.0 ? dY[i] : 0.0;
}

inline double l2_norm(const GradVec& g) {
    double s = 0.0;
    for (double x : g) s += x * x;
    return std::sqrt(s);
}

// Adam on the flat parameter vector.
class Adam {
  public:
    Adam(int dim, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(dim, 0.0), v_(dim, 0.0) {}

    void step(std::vector<double>& params, const GradVec& grads) {
        if (params.size() != m_.size() || grads.size() != m_.size())
            throw std::invalid_argument("Adam::step: dimension mismatch");
        ++t_;
        double c1 = 1.0 - std::pow(beta1_, t_);
        double c2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
            params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
        }
    }

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

  private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<double> m_, v_;
};

}  // namespace schedlab::nn
