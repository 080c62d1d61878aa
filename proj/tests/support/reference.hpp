#pragma once

// Test-only reference implementations. Everything here is written directly
// from the definitions (per-node sums, naive sorts, finite differences) and
// stays independent of the kernel/model code paths it checks.

#include <vector>

#include "clustergcf/dataset.hpp"
#include "clustergcf/dense.hpp"
#include "clustergcf/evaluation.hpp"
#include "clustergcf/graph.hpp"
#include "clustergcf/sparse.hpp"
#include "clustergcf/training.hpp"

namespace cgcf::testref {

DenseMatrix dense_from(const std::vector<std::vector<Real>>& rows);

DenseMatrix to_dense(const CsrMatrix& a);

CsrMatrix explicit_transpose(const CsrMatrix& a);

DenseMatrix dense_mm(const DenseMatrix& a, const DenseMatrix& b);

// Per-node forward: first-order sums on the full graph, cluster chains with
// the source-node probability factor from layer s, per-layer cluster sums,
// uniform layer combination. Returns E^(0..K); final is the alpha-weighted
// sum. Probabilities are taken as given.
struct NodeFormResult {
    std::vector<DenseMatrix> layers;
    DenseMatrix final;
};
NodeFormResult node_form_forward(const InteractionDataset& ds, const DenseMatrix& e0,
                                 const DenseMatrix& probs, Index n_layers, Index start_layer);

// Pure repeated spmm with uniform 1/(K+1) combination.
struct LightGcnResult {
    std::vector<DenseMatrix> layers;
    DenseMatrix final;
};
LightGcnResult lightgcn_forward(const BipartiteGraph& graph, const DenseMatrix& e0,
                                Index n_layers);

// BPR loss and dE0 for the LightGCN reference: margins from final, adjoint
// pulled down the layer stack through the symmetric laplacian. L2 over the
// distinct touched E0 rows, matching the stated loss definition.
Real lightgcn_loss(const LightGcnResult& fwd, const BipartiteGraph& graph,
                   const std::vector<BprTriplet>& batch, const DenseMatrix& e0, Real lambda);
DenseMatrix lightgcn_grad_e0(const LightGcnResult& fwd, const BipartiteGraph& graph,
                             const std::vector<BprTriplet>& batch, const DenseMatrix& e0,
                             Real lambda);

// Naive full-sort evaluation; same tie-break (score desc, id asc).
EvalResult naive_evaluate(const DenseMatrix& final, const InteractionDataset& ds, EvalSplit split,
                          Index k);

// Central finite differences of a loss functional over every parameter
// coordinate. Returns max |analytic - fd| / max(|analytic|,|fd|) excess over
// the tolerance rule |diff| <= abs_floor + rel_tol*max(...); also reports
// the worst offender through worst_* for diagnostics.
struct FdReport {
    bool ok = true;
    Real worst_rel = 0.0;
    std::string worst_name;
};
FdReport check_gradients(const BipartiteGraph& graph, ModelParams params,
                         const PropagationConfig& cfg, const std::vector<BprTriplet>& batch,
                         const DenseMatrix& noise, Real lambda, Real h, Real rel_tol,
                         Real abs_floor);

// Planted two-block dataset: users and items split into halves, each user
// drawing interactions from its own block with probability within_prob.
std::vector<RawPair> planted_partition(Index n_users, Index n_items, Index per_user,
                                       Real within_prob, std::uint64_t seed);

// Office-shaped fixture: exact user/item/interaction counts, already 5-core.
std::vector<RawPair> office_shaped_fixture(std::uint64_t seed);

}  // namespace cgcf::testref
