#include "clustergcf/dense.hpp"

#include <cmath>

namespace cgcf {

void axpy(Real a, const DenseMatrix& x, DenseMatrix& y) {
    if (!x.same_shape(y)) throw InvalidArgumentError("axpy: shape mismatch");
    const std::size_t n = x.data.size();
    for (std::size_t i = 0; i < n; ++i) y.data[i] += a * x.data[i];
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) throw InvalidArgumentError("add: shape mismatch");
    DenseMatrix out(a.n_rows, a.n_cols);
    for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
    return out;
}

Real dot(std::span<const Real> a, std::span<const Real> b) {
    Real acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

Real squared_norm(const DenseMatrix& m) {
    Real acc = 0.0;
    for (const Real v : m.data) acc += v * v;
    return acc;
}

bool all_finite(const DenseMatrix& m) {
    for (const Real v : m.data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Real max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) throw InvalidArgumentError("max_abs_diff: shape mismatch");
    Real worst = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const Real d = std::abs(a.data[i] - b.data[i]);
        if (d > worst) worst = d;
    }
    return worst;
}

}  // namespace cgcf
