#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "clustergcf/dataset.hpp"
#include "clustergcf/evaluation.hpp"
#include "clustergcf/propagation.hpp"

namespace cgcf {

// All learnable parameters: the ID embedding table and the clustering net.
struct ModelParams {
    DenseMatrix E0;  // (N+M) x d
    ClusterNetParams cluster;

    Index dim() const { return E0.n_cols; }
};

// Mirrors ModelParams.
struct Gradients {
    DenseMatrix dE0;
    DenseMatrix dW1;
    std::vector<Real> db1;
    DenseMatrix dW2;
    std::vector<Real> db2;
};

struct TrainConfig {
    Real learning_rate = 0.001;
    Real lambda = 1e-4;  // L2 weight
    Index batch_size = 1024;
    Index max_epochs = 1000;
    Index eval_every = 10;   // epochs between validation evaluations
    Index patience = 5;      // evaluations without improvement before stopping
    Index eval_k = 20;
    std::uint64_t seed = 42;

    void validate() const;
};

// Model hyperparameters not owned by PropagationConfig.
struct ModelConfig {
    Index dim = 64;
    Real tau = 0.1;
    Real leaky_slope = 0.2;

    void validate() const;
};

// first/second moment accumulators; beta1=0.9, beta2=0.999, eps=1e-8.
struct AdamState {
    DenseMatrix mE0, vE0;
    DenseMatrix mW1, vW1;
    std::vector<Real> mb1, vb1;
    DenseMatrix mW2, vW2;
    std::vector<Real> mb2, vb2;
    Index step = 0;

    static AdamState zeros_like(const ModelParams& p);
};

// Xavier-uniform init: entries in +-sqrt(6/(fan_in+fan_out)); embedding rows
// use fan (1, d); biases zero. Draw order is fixed (E0, W1, W2).
ModelParams init_params(Index n_nodes, Index d, Index n_clusters, std::uint64_t seed,
                        Real tau = 0.1, Real leaky_slope = 0.2);

// Mean over triplets of softplus(-(r+ - r-)) plus lambda * (|E0 rows touched
// by the batch|^2, each distinct row once, + clustering weights).
Real bpr_loss(const ForwardTrace& trace, const std::vector<BprTriplet>& batch, Real lambda,
              const ModelParams& params);

// Exact reverse-mode gradients of bpr_loss w.r.t. all parameters, through
// both the embedding chains and the assignment probabilities.
Gradients backward(const BipartiteGraph& graph, const ForwardTrace& trace,
                   const std::vector<BprTriplet>& batch, const PropagationConfig& cfg,
                   const ModelParams& params, Real lambda);

// Standard Adam with bias correction; increments state.step.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, Real lr);

struct EpochRecord {
    Index epoch;
    Real mean_loss;
    Real lr;
};

struct EvalRecord {
    Index epoch;
    EvalResult metrics;
    bool best_so_far;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    std::vector<EvalRecord> evals;
    Index best_epoch = 0;
    Real best_recall = 0.0;
};

struct TrainResult {
    ModelParams params;  // best validation checkpoint
    AdamState adam;      // optimizer state at the end of training
    TrainLog log;
    Index epochs_run = 0;
};

// Epoch loop: ceil(|train|/batch) steps per epoch, fresh Gumbel noise per
// step keyed by (seed, epoch, batch), validation Recall@eval_k every
// eval_every epochs, early stop after `patience` evaluations without
// improvement. Returns the best-checkpoint parameters.
// progress, when set, is called after each epoch record and each eval record.
TrainResult train(const InteractionDataset& ds, const BipartiteGraph& graph,
                  const TrainConfig& cfg, const PropagationConfig& prop_cfg,
                  const ModelConfig& model_cfg,
                  const std::function<void(const TrainLog&)>& progress = nullptr);

// Checkpoint file, magic "CGCFCKPT1": hyperparameters, params, Adam state
// and the rng cursor (root seed + next epoch).
struct Checkpoint {
    ModelParams params;
    AdamState adam;
    PropagationConfig prop;
    Index n_users = 0;
    Index n_items = 0;
    std::uint64_t seed = 0;
    Index next_epoch = 0;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cgcf
