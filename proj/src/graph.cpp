#include "clustergcf/graph.hpp"

#include <algorithm>
#include <cmath>

namespace cgcf {

BipartiteGraph build_graph(const InteractionDataset& ds) {
    BipartiteGraph g;
    g.n_users = ds.n_users;
    g.n_items = ds.n_items;
    const Index n = g.n_nodes();
    g.degrees.assign(static_cast<std::size_t>(n), 0);

    for (const auto& p : ds.train) {
        if (p.user < 0 || p.user >= ds.n_users || p.item < 0 || p.item >= ds.n_items)
            throw InvalidArgumentError("build_graph: id out of range");
        ++g.degrees[static_cast<std::size_t>(p.user)];
        ++g.degrees[static_cast<std::size_t>(ds.n_users + p.item)];
    }
    for (Index v = 0; v < n; ++v) {
        if (g.degrees[static_cast<std::size_t>(v)] == 0)
            throw DataError("build_graph: node " + std::to_string(v) + " has no train edge");
    }

    // Adjacency pattern first; the weight of entry (r,c) depends only on the
    // endpoint degrees, so both directions get bit-identical values.
    CsrMatrix& L = g.laplacian;
    L.n_rows = n;
    L.n_cols = n;
    L.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
    for (Index v = 0; v < n; ++v)
        L.row_ptr[static_cast<std::size_t>(v) + 1] =
            L.row_ptr[static_cast<std::size_t>(v)] + g.degrees[static_cast<std::size_t>(v)];

    L.col_idx.assign(static_cast<std::size_t>(L.row_ptr.back()), 0);
    std::vector<Index> cursor(L.row_ptr.begin(), L.row_ptr.end() - 1);
    for (const auto& p : ds.train) {
        const Index unode = p.user;
        const Index inode = ds.n_users + p.item;
        L.col_idx[static_cast<std::size_t>(cursor[static_cast<std::size_t>(unode)]++)] = inode;
        L.col_idx[static_cast<std::size_t>(cursor[static_cast<std::size_t>(inode)]++)] = unode;
    }
    for (Index v = 0; v < n; ++v) {
        std::sort(L.col_idx.begin() + L.row_ptr[static_cast<std::size_t>(v)],
                  L.col_idx.begin() + L.row_ptr[static_cast<std::size_t>(v) + 1]);
    }

    L.values.resize(L.col_idx.size());
    for (Index v = 0; v < n; ++v) {
        const auto dv = static_cast<Real>(g.degrees[static_cast<std::size_t>(v)]);
        for (Index k = L.row_ptr[static_cast<std::size_t>(v)];
             k < L.row_ptr[static_cast<std::size_t>(v) + 1]; ++k) {
            const Index w = L.col_idx[static_cast<std::size_t>(k)];
            const auto dw = static_cast<Real>(g.degrees[static_cast<std::size_t>(w)]);
            L.values[static_cast<std::size_t>(k)] = 1.0 / std::sqrt(dv * dw);
        }
    }
    return g;
}

}  // namespace cgcf
