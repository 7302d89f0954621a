#pragma once

#include <cstddef>

#include "lcl/core/matrix.hpp"
#include "lcl/core/rng.hpp"

namespace lcl {

enum class Activation { Identity, Tanh, Relu };

double apply_activation(Activation a, double x);
double activation_grad(Activation a, double pre, double post);

// One dense layer y = W'x + b with manual backprop. Weights are stored
// in x out so a row of a batch matrix maps through matmul directly.
struct DenseLayer {
    Matrix w;  // in x out
    Vector b;  // out
    Activation act = Activation::Identity;

    DenseLayer() = default;
    DenseLayer(std::size_t in, std::size_t out, Activation a) : w(in, out), b(out, 0.0), act(a) {}

    std::size_t in_dim() const { return w.rows; }
    std::size_t out_dim() const { return w.cols; }

    // uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
    void init(Rng& rng);

    Vector forward(const Vector& x, Vector* pre_out = nullptr) const;
    // Given upstream dL/dy and the cached input/pre-activation, accumulates
    // parameter gradients and returns dL/dx.
    Vector backward(const Vector& x, const Vector& pre, const Vector& upstream, Matrix& dw,
                    Vector& db) const;

    // Batched variants: rows are samples.
    Matrix forward_batch(const Matrix& x, Matrix* pre_out = nullptr) const;
    Matrix backward_batch(const Matrix& x, const Matrix& pre, const Matrix& upstream, Matrix& dw,
                          Vector& db) const;
};

struct DenseGrad {
    Matrix dw;
    Vector db;

    DenseGrad() = default;
    explicit DenseGrad(const DenseLayer& l) : dw(l.w.rows, l.w.cols), db(l.b.size(), 0.0) {}
    void zero();
    double max_abs() const;
};

void sgd_step(DenseLayer& layer, const DenseGrad& grad, double lr);

}  // namespace lcl
