#pragma once

#include <span>
#include <vector>

#include "clustergcf/types.hpp"

namespace cgcf {

// Row-major dense matrix of 64-bit reals. Carrier for all embedding
// matrices; immutable sharing across threads is safe once filled.
struct DenseMatrix {
    Index n_rows = 0;
    Index n_cols = 0;
    std::vector<Real> data;

    DenseMatrix() = default;
    DenseMatrix(Index rows, Index cols)
        : n_rows(rows), n_cols(cols), data(static_cast<std::size_t>(rows * cols), 0.0) {}

    Real& operator()(Index r, Index c) { return data[static_cast<std::size_t>(r * n_cols + c)]; }
    Real operator()(Index r, Index c) const {
        return data[static_cast<std::size_t>(r * n_cols + c)];
    }

    std::span<Real> row(Index r) {
        return {data.data() + r * n_cols, static_cast<std::size_t>(n_cols)};
    }
    std::span<const Real> row(Index r) const {
        return {data.data() + r * n_cols, static_cast<std::size_t>(n_cols)};
    }

    bool empty() const { return data.empty(); }
    bool same_shape(const DenseMatrix& other) const {
        return n_rows == other.n_rows && n_cols == other.n_cols;
    }
};

// y += a * x, elementwise over whole matrices; shapes must match.
void axpy(Real a, const DenseMatrix& x, DenseMatrix& y);

// elementwise sum
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);

Real dot(std::span<const Real> a, std::span<const Real> b);

// squared Frobenius norm
Real squared_norm(const DenseMatrix& m);

bool all_finite(const DenseMatrix& m);

// max |a - b| over entries; shapes must match
Real max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace cgcf
