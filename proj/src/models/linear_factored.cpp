#include "lcl/models/linear_factored.hpp"

#include <cmath>

#include "lcl/core/errors.hpp"

namespace lcl {

void LinearFactoredModel::init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(phi.rows));
    for (double& x : phi.data) x = rng.uniform(-bound, bound);
}

void LinearFactoredModel::add_task(const std::string& task, Rng& rng) {
    coefficients[task] = rng.uniform_vec(phi.cols, -0.01, 0.01);
}

const Vector& LinearFactoredModel::coeffs(const std::string& task) const {
    const auto it = coefficients.find(task);
    if (it == coefficients.end()) throw UnknownTask("unknown task: " + task);
    return it->second;
}

double LinearFactoredModel::forward(const std::string& task, const Vector& x) const {
    const Vector& s = coeffs(task);
    double acc = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        double col = 0.0;
        for (std::size_t i = 0; i < phi.rows; ++i) col += phi(i, j) * x[i];
        acc += s[j] * col;
    }
    return acc;
}

void LinearFactoredModel::backward(const std::string& task, const Vector& x, double upstream,
                                   Matrix* dphi, Vector* ds) const {
    const Vector& s = coeffs(task);
    if (dphi)
        for (std::size_t i = 0; i < phi.rows; ++i)
            for (std::size_t j = 0; j < s.size(); ++j) (*dphi)(i, j) += upstream * x[i] * s[j];
    if (ds)
        for (std::size_t j = 0; j < s.size(); ++j) {
            double col = 0.0;
            for (std::size_t i = 0; i < phi.rows; ++i) col += phi(i, j) * x[i];
            (*ds)[j] += upstream * col;
        }
}

std::size_t LinearFactoredModel::add_component(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(phi.rows));
    Matrix grown(phi.rows, phi.cols + 1);
    for (std::size_t i = 0; i < phi.rows; ++i) {
        for (std::size_t j = 0; j < phi.cols; ++j) grown(i, j) = phi(i, j);
        grown(i, phi.cols) = rng.uniform(-bound, bound);
    }
    phi = std::move(grown);
    return phi.cols - 1;
}

void LinearFactoredModel::remove_last_component() {
    Matrix shrunk(phi.rows, phi.cols - 1);
    for (std::size_t i = 0; i < shrunk.rows; ++i)
        for (std::size_t j = 0; j < shrunk.cols; ++j) shrunk(i, j) = phi(i, j);
    phi = std::move(shrunk);
    for (auto& [task, s] : coefficients)
        if (s.size() > shrunk.cols) s.resize(shrunk.cols);
}

}  // namespace lcl
