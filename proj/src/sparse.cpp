#include "clustergcf/sparse.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "clustergcf/parallel.hpp"

namespace cgcf {

CsrMatrix CsrMatrix::from_triplets(Index n_rows, Index n_cols,
                                   std::vector<std::tuple<Index, Index, Real>> entries) {
    if (n_rows < 0 || n_cols < 0) throw InvalidArgumentError("from_triplets: negative dimension");
    for (const auto& [r, c, v] : entries) {
        (void)v;
        if (r < 0 || r >= n_rows || c < 0 || c >= n_cols)
            throw InvalidArgumentError("from_triplets: coordinate out of range");
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });

    CsrMatrix m;
    m.n_rows = n_rows;
    m.n_cols = n_cols;
    m.row_ptr.assign(static_cast<std::size_t>(n_rows) + 1, 0);

    std::size_t i = 0;
    while (i < entries.size()) {
        const Index r = std::get<0>(entries[i]);
        const Index c = std::get<1>(entries[i]);
        Real sum = 0.0;
        while (i < entries.size() && std::get<0>(entries[i]) == r && std::get<1>(entries[i]) == c) {
            sum += std::get<2>(entries[i]);
            ++i;
        }
        if (sum != 0.0) {
            m.col_idx.push_back(c);
            m.values.push_back(sum);
            ++m.row_ptr[static_cast<std::size_t>(r) + 1];
        }
    }
    for (std::size_t r = 0; r < static_cast<std::size_t>(n_rows); ++r)
        m.row_ptr[r + 1] += m.row_ptr[r];
    return m;
}

CsrMatrix CsrMatrix::identity(Index n) {
    CsrMatrix m;
    m.n_rows = n;
    m.n_cols = n;
    m.row_ptr.resize(static_cast<std::size_t>(n) + 1);
    m.col_idx.resize(static_cast<std::size_t>(n));
    m.values.assign(static_cast<std::size_t>(n), 1.0);
    for (Index i = 0; i <= n; ++i) m.row_ptr[static_cast<std::size_t>(i)] = i;
    for (Index i = 0; i < n; ++i) m.col_idx[static_cast<std::size_t>(i)] = i;
    return m;
}

void CsrMatrix::validate() const {
    if (row_ptr.size() != static_cast<std::size_t>(n_rows) + 1)
        throw InvalidArgumentError("csr: row_ptr length");
    if (row_ptr.front() != 0 || row_ptr.back() != nnz())
        throw InvalidArgumentError("csr: row_ptr endpoints");
    if (col_idx.size() != values.size()) throw InvalidArgumentError("csr: col/value length");
    for (Index r = 0; r < n_rows; ++r) {
        const Index begin = row_ptr[static_cast<std::size_t>(r)];
        const Index end = row_ptr[static_cast<std::size_t>(r) + 1];
        if (begin > end) throw InvalidArgumentError("csr: row_ptr not monotone");
        for (Index k = begin; k < end; ++k) {
            const Index c = col_idx[static_cast<std::size_t>(k)];
            if (c < 0 || c >= n_cols) throw InvalidArgumentError("csr: column out of range");
            if (k > begin && c <= col_idx[static_cast<std::size_t>(k) - 1])
                throw InvalidArgumentError("csr: columns not strictly increasing");
            if (values[static_cast<std::size_t>(k)] == 0.0)
                throw InvalidArgumentError("csr: explicit zero stored");
        }
    }
}

DenseMatrix spmm(const CsrMatrix& a, const DenseMatrix& x) {
    if (a.n_cols != x.n_rows) throw InvalidArgumentError("spmm: dimension mismatch");
    DenseMatrix y(a.n_rows, x.n_cols);
    const Index d = x.n_cols;
    std::atomic<bool> bad{false};

    parallel_rows(a.n_rows, [&](Index r) {
        Real* out = y.data.data() + r * d;
        const Index begin = a.row_ptr[static_cast<std::size_t>(r)];
        const Index end = a.row_ptr[static_cast<std::size_t>(r) + 1];
        for (Index k = begin; k < end; ++k) {
            const Real w = a.values[static_cast<std::size_t>(k)];
            const Real* src = x.data.data() + a.col_idx[static_cast<std::size_t>(k)] * d;
            for (Index j = 0; j < d; ++j) out[j] += w * src[j];
        }
        for (Index j = 0; j < d; ++j) {
            if (!std::isfinite(out[j])) bad.store(true, std::memory_order_relaxed);
        }
    });
    if (bad.load()) throw NumericError("spmm: non-finite output entry");
    return y;
}

DenseMatrix spmm_transpose(const CsrMatrix& a, const DenseMatrix& x) {
    if (a.n_rows != x.n_rows) throw InvalidArgumentError("spmm_transpose: dimension mismatch");
    const Index d = x.n_cols;
    const Index nnz = a.nnz();

    // Counting sort of entry indices into column-major order. Scanning rows
    // in order keeps each column's entries sorted by source row, fixing the
    // accumulation order independent of threading.
    std::vector<Index> col_start(static_cast<std::size_t>(a.n_cols) + 1, 0);
    for (Index k = 0; k < nnz; ++k) ++col_start[static_cast<std::size_t>(a.col_idx[static_cast<std::size_t>(k)]) + 1];
    for (Index c = 0; c < a.n_cols; ++c)
        col_start[static_cast<std::size_t>(c) + 1] += col_start[static_cast<std::size_t>(c)];

    std::vector<Index> entry_of(static_cast<std::size_t>(nnz));
    std::vector<Index> row_of(static_cast<std::size_t>(nnz));
    {
        std::vector<Index> cursor(col_start.begin(), col_start.end() - 1);
        for (Index r = 0; r < a.n_rows; ++r) {
            for (Index k = a.row_ptr[static_cast<std::size_t>(r)];
                 k < a.row_ptr[static_cast<std::size_t>(r) + 1]; ++k) {
                const Index c = a.col_idx[static_cast<std::size_t>(k)];
                const Index slot = cursor[static_cast<std::size_t>(c)]++;
                entry_of[static_cast<std::size_t>(slot)] = k;
                row_of[static_cast<std::size_t>(slot)] = r;
            }
        }
    }

    DenseMatrix y(a.n_cols, d);
    parallel_rows(a.n_cols, [&](Index c) {
        Real* out = y.data.data() + c * d;
        for (Index s = col_start[static_cast<std::size_t>(c)];
             s < col_start[static_cast<std::size_t>(c) + 1]; ++s) {
            const Real w = a.values[static_cast<std::size_t>(entry_of[static_cast<std::size_t>(s)])];
            const Real* src = x.data.data() + row_of[static_cast<std::size_t>(s)] * d;
            for (Index j = 0; j < d; ++j) out[j] += w * src[j];
        }
    });
    return y;
}

DenseMatrix row_scale(const DenseMatrix& x, const std::vector<Real>& w) {
    if (static_cast<Index>(w.size()) != x.n_rows)
        throw InvalidArgumentError("row_scale: length mismatch");
    DenseMatrix y(x.n_rows, x.n_cols);
    const Index d = x.n_cols;
    parallel_rows(x.n_rows, [&](Index r) {
        const Real s = w[static_cast<std::size_t>(r)];
        const Real* src = x.data.data() + r * d;
        Real* out = y.data.data() + r * d;
        for (Index j = 0; j < d; ++j) out[j] = s * src[j];
    });
    return y;
}

DenseMatrix row_scale_by_column(const DenseMatrix& x, const DenseMatrix& cols, Index c) {
    if (cols.n_rows != x.n_rows) throw InvalidArgumentError("row_scale: length mismatch");
    if (c < 0 || c >= cols.n_cols) throw InvalidArgumentError("row_scale: column out of range");
    DenseMatrix y(x.n_rows, x.n_cols);
    const Index d = x.n_cols;
    parallel_rows(x.n_rows, [&](Index r) {
        const Real s = cols(r, c);
        const Real* src = x.data.data() + r * d;
        Real* out = y.data.data() + r * d;
        for (Index j = 0; j < d; ++j) out[j] = s * src[j];
    });
    return y;
}

}  // namespace cgcf
