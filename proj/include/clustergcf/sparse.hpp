#pragma once

#include <tuple>
#include <vector>

#include "clustergcf/dense.hpp"
#include "clustergcf/types.hpp"

namespace cgcf {

// Compressed sparse row matrix in canonical form: within each row the column
// indices are strictly increasing, duplicates are merged and explicit zeros
// dropped at construction. Kernels assume canonical form, so inner loops are
// branch-free and accumulation order is fixed by col_idx order.
struct CsrMatrix {
    Index n_rows = 0;
    Index n_cols = 0;
    std::vector<Index> row_ptr;  // length n_rows+1, non-decreasing
    std::vector<Index> col_idx;  // per nonzero
    std::vector<Real> values;    // per nonzero, never 0

    Index nnz() const { return static_cast<Index>(values.size()); }

    // Canonicalizes: sorts, merges duplicate coordinates by summation,
    // drops entries that end up exactly zero.
    static CsrMatrix from_triplets(Index n_rows, Index n_cols,
                                   std::vector<std::tuple<Index, Index, Real>> entries);

    static CsrMatrix identity(Index n);

    // Invariant check; throws InvalidArgumentError on violation.
    void validate() const;
};

// Y = A * X. Parallel over output rows; within a row the accumulation order
// follows col_idx, so the result is bit-identical for any thread count.
// Throws InvalidArgumentError on dimension mismatch and NumericError if any
// output entry is non-finite.
DenseMatrix spmm(const CsrMatrix& a, const DenseMatrix& x);

// Y = A^T * X without materializing A^T. Builds a transient column-major
// ordering of A's entries (counting sort), then gathers per output row in
// source-row order; deterministic across thread counts.
DenseMatrix spmm_transpose(const CsrMatrix& a, const DenseMatrix& x);

// out[r,:] = w[r] * x[r,:]
DenseMatrix row_scale(const DenseMatrix& x, const std::vector<Real>& w);

// Same, taking w as column c of a dense matrix (avoids the copy).
DenseMatrix row_scale_by_column(const DenseMatrix& x, const DenseMatrix& cols, Index c);

}  // namespace cgcf
