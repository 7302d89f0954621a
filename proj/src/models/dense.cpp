#include "lcl/models/dense.hpp"

#include <cmath>

namespace lcl {

double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::Tanh:
            return std::tanh(x);
        case Activation::Relu:
            return x > 0.0 ? x : 0.0;
        default:
            return x;
    }
}

double activation_grad(Activation a, double pre, double post) {
    switch (a) {
        case Activation::Tanh:
            return 1.0 - post * post;
        case Activation::Relu:
            return pre > 0.0 ? 1.0 : 0.0;
        default:
            return 1.0;
    }
}

void DenseLayer::init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.rows));
    for (double& x : w.data) x = rng.uniform(-bound, bound);
    for (double& x : b) x = rng.uniform(-bound, bound);
}

Vector DenseLayer::forward(const Vector& x, Vector* pre_out) const {
    Vector pre = matvec_t(w, x);
    for (std::size_t j = 0; j < pre.size(); ++j) pre[j] += b[j];
    Vector post(pre.size());
    for (std::size_t j = 0; j < pre.size(); ++j) post[j] = apply_activation(act, pre[j]);
    if (pre_out) *pre_out = std::move(pre);
    return post;
}

Vector DenseLayer::backward(const Vector& x, const Vector& pre, const Vector& upstream, Matrix& dw,
                            Vector& db) const {
    Vector dpre(pre.size());
    for (std::size_t j = 0; j < pre.size(); ++j)
        dpre[j] = upstream[j] * activation_grad(act, pre[j], apply_activation(act, pre[j]));
    for (std::size_t i = 0; i < w.rows; ++i)
        for (std::size_t j = 0; j < w.cols; ++j) dw(i, j) += x[i] * dpre[j];
    for (std::size_t j = 0; j < w.cols; ++j) db[j] += dpre[j];
    return matvec(w, dpre);
}

Matrix DenseLayer::forward_batch(const Matrix& x, Matrix* pre_out) const {
    Matrix pre = matmul(x, w);
    for (std::size_t i = 0; i < pre.rows; ++i)
        for (std::size_t j = 0; j < pre.cols; ++j) pre(i, j) += b[j];
    Matrix post(pre.rows, pre.cols);
    for (std::size_t i = 0; i < pre.data.size(); ++i)
        post.data[i] = apply_activation(act, pre.data[i]);
    if (pre_out) *pre_out = std::move(pre);
    return post;
}

Matrix DenseLayer::backward_batch(const Matrix& x, const Matrix& pre, const Matrix& upstream,
                                  Matrix& dw, Vector& db) const {
    Matrix dpre(pre.rows, pre.cols);
    for (std::size_t i = 0; i < pre.data.size(); ++i)
        dpre.data[i] =
            upstream.data[i] * activation_grad(act, pre.data[i], apply_activation(act, pre.data[i]));
    const Matrix dwi = matmul(transpose(x), dpre);
    for (std::size_t i = 0; i < dw.data.size(); ++i) dw.data[i] += dwi.data[i];
    for (std::size_t i = 0; i < dpre.rows; ++i)
        for (std::size_t j = 0; j < dpre.cols; ++j) db[j] += dpre(i, j);
    return matmul(dpre, transpose(w));
}

void DenseGrad::zero() {
    for (double& x : dw.data) x = 0.0;
    for (double& x : db) x = 0.0;
}

double DenseGrad::max_abs() const {
    double best = lcl::max_abs(dw);
    for (double x : db) best = std::max(best, std::abs(x));
    return best;
}

void sgd_step(DenseLayer& layer, const DenseGrad& grad, double lr) {
    add_scaled_inplace(layer.w, grad.dw, -lr);
    add_scaled_inplace(layer.b, grad.db, -lr);
}

}  // namespace lcl
