#pragma once

#include <string>
#include <vector>

#include "clustergcf/cluster_net.hpp"
#include "clustergcf/graph.hpp"

namespace cgcf {

// K total convolution layers; cluster-specific convolution starts at layer s
// (s=2 is the main model, s=1 the _F variant, s=3 the _T variant). Layer
// weights are fixed at 1/(K+1).
struct PropagationConfig {
    Index n_layers = 6;     // K; 0 means no propagation (final = E0)
    Index n_clusters = 2;   // C
    Index start_layer = 2;  // s

    Real layer_weight() const { return 1.0 / static_cast<Real>(n_layers + 1); }
    bool clustering_active() const { return start_layer <= n_layers; }
    void validate() const;
};

// Everything the reverse pass needs: per-layer embeddings, per-cluster
// chains from layer s up, the assignment with its noise, the clustering
// trace, and the combined final embeddings.
struct ForwardTrace {
    std::vector<DenseMatrix> layers;           // E^(0..K); empty in eval mode
    std::vector<std::vector<DenseMatrix>> cluster_chains;  // [c][k-s] = E_c^(k), k in [s,K]
    ClusterAssignment assignment;
    ClusterTrace cluster_trace;
    DenseMatrix clustering_e1;  // the E^(1) fed to feature fusion (s=1 computes it separately)
    DenseMatrix final;
    Index n_users = 0;      // item rows sit at n_users + item_id
    bool retained = false;  // true when intermediates were kept (train mode)
};

struct ModelParams;  // training.hpp

// Runs the full model. Train mode retains all intermediates and samples
// fresh Gumbel noise from noise_seed; eval mode streams layers (only final,
// probs and the clustering trace survive) with g = 0. fixed_noise, when
// given, replaces sampling (frozen draws for gradient checks).
ForwardTrace forward(const BipartiteGraph& graph, const ModelParams& params,
                     const PropagationConfig& cfg, std::uint64_t noise_seed, NoiseMode mode,
                     const DenseMatrix* fixed_noise = nullptr);

// Propagation only, with a caller-supplied assignment (tests freeze P here).
ForwardTrace propagate_with_assignment(const BipartiteGraph& graph, const DenseMatrix& e0,
                                       const PropagationConfig& cfg,
                                       const ClusterAssignment& assignment, bool retain);

// r_hat = final[u] . final[N + i]
Real score(const DenseMatrix& final, Index n_users, Index user, Index item);

// All-item scores for one user, one pass over the item block.
std::vector<Real> score_all_items(const DenseMatrix& final, Index n_users, Index user);

// CSV: node_id,node_type,e0..e{d-1}.
void write_embeddings_csv(const DenseMatrix& final, Index n_users, const std::string& path);

// Binary cache, magic "CGCFEMB1"; fp32=true stores 32-bit values.
void save_embeddings(const DenseMatrix& final, Index n_users, const std::string& path,
                     bool fp32 = false);

struct EmbeddingFile {
    DenseMatrix embeddings;
    Index n_users = 0;
};
EmbeddingFile load_embeddings(const std::string& path);

}  // namespace cgcf
