#pragma once

#include <vector>

#include "clustergcf/dataset.hpp"
#include "clustergcf/sparse.hpp"

namespace cgcf {

// Bipartite user-item graph as one symmetric (N+M)x(N+M) normalized
// adjacency: users occupy node ids [0,N), items [N,N+M). Edge (u, N+i)
// carries 1/sqrt(|N_u|*|N_i|); diagonal empty. Built from train edges only.
struct BipartiteGraph {
    Index n_users = 0;
    Index n_items = 0;
    CsrMatrix laplacian;
    std::vector<Index> degrees;  // train degree per node, users then items

    Index n_nodes() const { return n_users + n_items; }
};

// Throws DataError when some user or item has no train edge.
BipartiteGraph build_graph(const InteractionDataset& ds);

}  // namespace cgcf
