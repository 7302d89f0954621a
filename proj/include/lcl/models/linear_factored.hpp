#pragma once

#include <map>
#include <string>

#include "lcl/core/matrix.hpp"
#include "lcl/core/rng.hpp"

namespace lcl {

// Linear factored predictor f(x) = s(t)' (Phi' x): columns of the shared
// dictionary are components, per-task coefficients pick the combination.
struct LinearFactoredModel {
    Matrix phi;  // d x k
    std::map<std::string, Vector> coefficients;

    LinearFactoredModel() = default;
    LinearFactoredModel(std::size_t d, std::size_t k) : phi(d, k) {}

    std::size_t d() const { return phi.rows; }
    std::size_t k() const { return phi.cols; }

    void init(Rng& rng);
    void add_task(const std::string& task, Rng& rng);
    const Vector& coeffs(const std::string& task) const;  // throws UnknownTask

    double forward(const std::string& task, const Vector& x) const;

    // Gradient of the prediction wrt phi is upstream * x s'; wrt s it is
    // upstream * Phi' x. Accumulated into the provided buffers.
    void backward(const std::string& task, const Vector& x, double upstream, Matrix* dphi,
                  Vector* ds) const;

    // Expansion support: appends a random column; existing tasks keep their
    // shorter coefficient vectors (implicit zero weight on the new column).
    std::size_t add_component(Rng& rng);
    void remove_last_component();
};

}  // namespace lcl
