#pragma once

#include <string>

#include "clustergcf/dense.hpp"
#include "clustergcf/rng.hpp"
#include "clustergcf/types.hpp"

namespace cgcf {

// Weights of the soft node-clustering network: feature fusion (W1, b1),
// cluster projection (W2, b2, one column per cluster), the LeakyReLU slope
// and the Gumbel-Softmax temperature.
struct ClusterNetParams {
    DenseMatrix W1;        // d x d
    std::vector<Real> b1;  // d
    DenseMatrix W2;        // d x C
    std::vector<Real> b2;  // C
    Real leaky_slope = 0.2;
    Real tau = 0.1;

    Index dim() const { return W1.n_rows; }
    Index n_clusters() const { return W2.n_cols; }
    void validate() const;
};

// Row-stochastic soft assignments plus the Gumbel draws that produced them.
struct ClusterAssignment {
    DenseMatrix probs;  // (N+M) x C, rows sum to 1, entries strictly in (0,1)
    DenseMatrix noise;  // Gumbel draws used this step; empty in eval mode
};

// Pre- and post-activation values retained for the reverse pass.
struct ClusterTrace {
    DenseMatrix fused_pre;   // Z1 = (E0+E1) W1 + b1
    DenseMatrix fused;       // F = LeakyReLU(Z1)
    DenseMatrix logits_pre;  // Z2 = F W2 + b2
    DenseMatrix logits;      // H = LeakyReLU(Z2)
};

Real leaky_relu(Real x, Real slope);
Real leaky_relu_grad(Real pre, Real slope);

// F = LeakyReLU((E0 + E1) W1 + b1) row-wise; fills trace.fused_pre/fused.
void fuse_features(const DenseMatrix& e0, const DenseMatrix& e1, const ClusterNetParams& p,
                   ClusterTrace& trace);

// H = LeakyReLU(F W2 + b2); fills trace.logits_pre/logits.
void cluster_logits(const ClusterNetParams& p, ClusterTrace& trace);

// Keeps every probability strictly inside (0,1): p' = (p + delta)/(1 + C*delta).
// Affine, so gradients stay exact and C=1 still yields exactly 1.0.
constexpr Real kProbSmoothing = 1e-12;

enum class NoiseMode { Train, Eval };

// Row-wise softmax of (H + g)/tau. Train mode samples g per entry from the
// per-row substream (thread-count independent); eval mode uses g = 0.
ClusterAssignment gumbel_softmax(const DenseMatrix& logits, Real tau, std::uint64_t noise_seed,
                                 NoiseMode mode);

// Same, with caller-provided noise (frozen draws for gradient checks).
ClusterAssignment gumbel_softmax_with_noise(const DenseMatrix& logits, Real tau,
                                            const DenseMatrix& noise);

// fuse_features -> cluster_logits -> gumbel_softmax.
ClusterAssignment assign_clusters(const DenseMatrix& e0, const DenseMatrix& e1,
                                  const ClusterNetParams& p, std::uint64_t noise_seed,
                                  NoiseMode mode, ClusterTrace& trace);

// Standalone Gumbel noise matrix keyed by (seed, row); matches what train
// mode draws internally.
DenseMatrix sample_gumbel_noise(Index rows, Index cols, std::uint64_t seed);

// CSV: node_id,node_type,p_0..p_{C-1}; node_type is "user" for the first
// n_users rows and "item" after.
void write_clusters_csv(const DenseMatrix& probs, Index n_users, const std::string& path);

}  // namespace cgcf
