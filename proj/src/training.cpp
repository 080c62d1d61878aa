#include "clustergcf/training.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "clustergcf/serialize.hpp"

namespace cgcf {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw InvalidArgumentError("train: learning_rate must be > 0");
    if (lambda < 0.0) throw InvalidArgumentError("train: lambda must be >= 0");
    if (batch_size < 1) throw InvalidArgumentError("train: batch_size must be >= 1");
    if (max_epochs < 0) throw InvalidArgumentError("train: max_epochs must be >= 0");
    if (eval_every < 1) throw InvalidArgumentError("train: eval_every must be >= 1");
    if (patience < 1) throw InvalidArgumentError("train: patience must be >= 1");
    if (eval_k < 1) throw InvalidArgumentError("train: eval_k must be >= 1");
}

void ModelConfig::validate() const {
    if (dim < 1) throw InvalidArgumentError("model: dim must be >= 1");
    if (!(tau > 0.0)) throw InvalidArgumentError("model: tau must be > 0");
}

AdamState AdamState::zeros_like(const ModelParams& p) {
    AdamState s;
    s.mE0 = DenseMatrix(p.E0.n_rows, p.E0.n_cols);
    s.vE0 = DenseMatrix(p.E0.n_rows, p.E0.n_cols);
    s.mW1 = DenseMatrix(p.cluster.W1.n_rows, p.cluster.W1.n_cols);
    s.vW1 = DenseMatrix(p.cluster.W1.n_rows, p.cluster.W1.n_cols);
    s.mb1.assign(p.cluster.b1.size(), 0.0);
    s.vb1.assign(p.cluster.b1.size(), 0.0);
    s.mW2 = DenseMatrix(p.cluster.W2.n_rows, p.cluster.W2.n_cols);
    s.vW2 = DenseMatrix(p.cluster.W2.n_rows, p.cluster.W2.n_cols);
    s.mb2.assign(p.cluster.b2.size(), 0.0);
    s.vb2.assign(p.cluster.b2.size(), 0.0);
    return s;
}

ModelParams init_params(Index n_nodes, Index d, Index n_clusters, std::uint64_t seed, Real tau,
                        Real leaky_slope) {
    if (n_nodes < 1 || d < 1 || n_clusters < 1)
        throw InvalidArgumentError("init_params: bad dimensions");
    Rng rng(derive_seed(seed, "init"));
    ModelParams p;
    p.E0 = DenseMatrix(n_nodes, d);
    const Real e0_bound = std::sqrt(6.0 / static_cast<Real>(1 + d));
    for (Real& v : p.E0.data) v = rng.uniform_symmetric(e0_bound);

    p.cluster.W1 = DenseMatrix(d, d);
    const Real w1_bound = std::sqrt(6.0 / static_cast<Real>(d + d));
    for (Real& v : p.cluster.W1.data) v = rng.uniform_symmetric(w1_bound);
    p.cluster.b1.assign(static_cast<std::size_t>(d), 0.0);

    p.cluster.W2 = DenseMatrix(d, n_clusters);
    const Real w2_bound = std::sqrt(6.0 / static_cast<Real>(d + n_clusters));
    for (Real& v : p.cluster.W2.data) v = rng.uniform_symmetric(w2_bound);
    p.cluster.b2.assign(static_cast<std::size_t>(n_clusters), 0.0);

    p.cluster.tau = tau;
    p.cluster.leaky_slope = leaky_slope;
    return p;
}

namespace {

Real softplus(Real x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

Real sigmoid(Real x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<Index> touched_rows(const std::vector<BprTriplet>& batch, Index n_users) {
    std::unordered_set<Index> rows;
    for (const auto& t : batch) {
        rows.insert(t.user);
        rows.insert(n_users + t.item_pos);
        rows.insert(n_users + t.item_neg);
    }
    std::vector<Index> out(rows.begin(), rows.end());
    std::sort(out.begin(), out.end());
    return out;
}

Real clustering_l2(const ClusterNetParams& c) {
    Real acc = squared_norm(c.W1) + squared_norm(c.W2);
    for (const Real v : c.b1) acc += v * v;
    for (const Real v : c.b2) acc += v * v;
    return acc;
}

}  // namespace

Real bpr_loss(const ForwardTrace& trace, const std::vector<BprTriplet>& batch, Real lambda,
              const ModelParams& params) {
    if (batch.empty()) throw InvalidArgumentError("bpr_loss: empty batch");
    const Index n_users = trace.n_users;
    Real acc = 0.0;
    for (const auto& t : batch) {
        const Real margin = dot(trace.final.row(t.user), trace.final.row(n_users + t.item_pos)) -
                            dot(trace.final.row(t.user), trace.final.row(n_users + t.item_neg));
        acc += softplus(-margin);
    }
    Real loss = acc / static_cast<Real>(batch.size());
    if (lambda > 0.0) {
        Real reg = clustering_l2(params.cluster);
        for (const Index r : touched_rows(batch, n_users)) {
            const auto row = params.E0.row(r);
            reg += dot(row, row);
        }
        loss += lambda * reg;
    }
    return loss;
}

Gradients backward(const BipartiteGraph& graph, const ForwardTrace& trace,
                   const std::vector<BprTriplet>& batch, const PropagationConfig& cfg,
                   const ModelParams& params, Real lambda) {
    cfg.validate();
    if (!trace.retained)
        throw InvalidStateError("backward: trace was not produced in train mode");
    if (batch.empty()) throw InvalidArgumentError("backward: empty batch");
    const Index K = cfg.n_layers;
    const Index s = cfg.start_layer;
    const Index C = cfg.n_clusters;
    const bool clustered = cfg.clustering_active();
    if (static_cast<Index>(trace.layers.size()) != K + 1)
        throw InvalidStateError("backward: missing layer intermediates");

    const Index n = trace.final.n_rows;
    const Index d = trace.final.n_cols;
    const Index n_users = trace.n_users;
    const Real inv_batch = 1.0 / static_cast<Real>(batch.size());

    // Adjoint of the final embeddings from the pairwise loss.
    DenseMatrix d_final(n, d);
    for (const auto& t : batch) {
        const Index u = t.user;
        const Index ip = n_users + t.item_pos;
        const Index in = n_users + t.item_neg;
        const Real margin =
            dot(trace.final.row(u), trace.final.row(ip)) -
            dot(trace.final.row(u), trace.final.row(in));
        const Real coeff = -sigmoid(-margin) * inv_batch;
        for (Index j = 0; j < d; ++j) {
            d_final(u, j) += coeff * (trace.final(ip, j) - trace.final(in, j));
            d_final(ip, j) += coeff * trace.final(u, j);
            d_final(in, j) -= coeff * trace.final(u, j);
        }
    }

    // final = sum_k alpha * E^(k), so each layer adjoint starts at
    // alpha * d_final and picks up pullbacks from the layers above it.
    const Real alpha = cfg.layer_weight();
    std::vector<DenseMatrix> d_layers(static_cast<std::size_t>(K) + 1);
    for (Index k = 0; k <= K; ++k) {
        d_layers[static_cast<std::size_t>(k)] = DenseMatrix(n, d);
        axpy(alpha, d_final, d_layers[static_cast<std::size_t>(k)]);
    }

    Gradients g;
    g.dE0 = DenseMatrix(n, d);
    g.dW1 = DenseMatrix(params.cluster.W1.n_rows, params.cluster.W1.n_cols);
    g.db1.assign(params.cluster.b1.size(), 0.0);
    g.dW2 = DenseMatrix(params.cluster.W2.n_rows, params.cluster.W2.n_cols);
    g.db2.assign(params.cluster.b2.size(), 0.0);

    DenseMatrix d_probs;
    if (clustered) {
        d_probs = DenseMatrix(n, C);
        // Pull each cluster chain back from layer K to layer s. The adjoint
        // of E_c^(k) is the shared layer adjoint plus what the next chain
        // step pushed down. L is symmetric, so the spmm adjoint reuses spmm.
        for (Index c = 0; c < C; ++c) {
            DenseMatrix chain_adj(n, d);
            for (Index k = K; k >= s; --k) {
                axpy(1.0, d_layers[static_cast<std::size_t>(k)], chain_adj);
                DenseMatrix pulled = spmm(graph.laplacian, chain_adj);
                const DenseMatrix& source =
                    (k > s) ? trace.cluster_chains[static_cast<std::size_t>(c)]
                                                  [static_cast<std::size_t>(k - 1 - s)]
                            : trace.layers[static_cast<std::size_t>(s - 1)];
                for (Index r = 0; r < n; ++r)
                    d_probs(r, c) += dot(pulled.row(r), source.row(r));
                chain_adj = row_scale_by_column(pulled, trace.assignment.probs, c);
            }
            axpy(1.0, chain_adj, d_layers[static_cast<std::size_t>(s - 1)]);
        }
    }

    // Clustering network backward: probs -> logits -> fused -> (E0 + E1).
    DenseMatrix d_e1_in;
    if (clustered) {
        const Real tau = params.cluster.tau;
        const Real slope = params.cluster.leaky_slope;
        const Real smooth_denom = 1.0 + static_cast<Real>(C) * kProbSmoothing;

        DenseMatrix d_logits(n, C);
        for (Index r = 0; r < n; ++r) {
            // Undo the affine smoothing to recover the raw softmax output.
            Real inner = 0.0;
            for (Index j = 0; j < C; ++j) {
                const Real p_raw =
                    trace.assignment.probs(r, j) * smooth_denom - kProbSmoothing;
                const Real dp = d_probs(r, j) / smooth_denom;
                d_logits(r, j) = p_raw;  // stash p_raw
                d_probs(r, j) = dp;
                inner += dp * p_raw;
            }
            for (Index j = 0; j < C; ++j) {
                const Real p_raw = d_logits(r, j);
                const Real ds = p_raw * (d_probs(r, j) - inner);  // softmax jacobian
                const Real dh = ds / tau;
                d_logits(r, j) = dh * leaky_relu_grad(trace.cluster_trace.logits_pre(r, j), slope);
            }
        }

        // Z2 = F W2 + b2
        const Index dd = params.dim();
        DenseMatrix d_fused(n, dd);
        for (Index r = 0; r < n; ++r) {
            for (Index j = 0; j < C; ++j) {
                const Real dz = d_logits(r, j);
                g.db2[static_cast<std::size_t>(j)] += dz;
                for (Index kk = 0; kk < dd; ++kk) {
                    g.dW2(kk, j) += trace.cluster_trace.fused(r, kk) * dz;
                    d_fused(r, kk) += dz * params.cluster.W2(kk, j);
                }
            }
        }

        // F = LeakyReLU(Z1), Z1 = (E0 + E1) W1 + b1
        DenseMatrix d_sum(n, dd);
        for (Index r = 0; r < n; ++r) {
            for (Index j = 0; j < dd; ++j) {
                const Real dz = d_fused(r, j) *
                                leaky_relu_grad(trace.cluster_trace.fused_pre(r, j), slope);
                g.db1[static_cast<std::size_t>(j)] += dz;
                for (Index kk = 0; kk < dd; ++kk) {
                    g.dW1(kk, j) += (params.E0(r, kk) + trace.clustering_e1(r, kk)) * dz;
                    d_sum(r, kk) += dz * params.cluster.W1(kk, j);
                }
            }
        }

        axpy(1.0, d_sum, g.dE0);  // direct E0 path of the fusion
        d_e1_in = std::move(d_sum);
    }

    // Merge the fusion's E^(1) adjoint, then pull the full-graph layers down.
    Index top = clustered ? s - 1 : K;
    if (clustered) {
        if (s >= 2) {
            axpy(1.0, d_e1_in, d_layers[1]);
        } else {
            // s=1: the clustering E^(1) is a separate full-graph convolution.
            axpy(1.0, spmm(graph.laplacian, d_e1_in), g.dE0);
        }
    }
    for (Index k = top; k >= 1; --k)
        axpy(1.0, spmm(graph.laplacian, d_layers[static_cast<std::size_t>(k)]),
             d_layers[static_cast<std::size_t>(k - 1)]);
    axpy(1.0, d_layers[0], g.dE0);

    if (lambda > 0.0) {
        for (const Index r : touched_rows(batch, n_users)) {
            for (Index j = 0; j < d; ++j) g.dE0(r, j) += 2.0 * lambda * params.E0(r, j);
        }
        axpy(2.0 * lambda, params.cluster.W1, g.dW1);
        axpy(2.0 * lambda, params.cluster.W2, g.dW2);
        for (std::size_t j = 0; j < g.db1.size(); ++j)
            g.db1[j] += 2.0 * lambda * params.cluster.b1[j];
        for (std::size_t j = 0; j < g.db2.size(); ++j)
            g.db2[j] += 2.0 * lambda * params.cluster.b2[j];
    }
    return g;
}

namespace {

void adam_update(std::span<Real> theta, std::span<const Real> grad, std::span<Real> m,
                 std::span<Real> v, Real lr, Real bias1, Real bias2) {
    constexpr Real beta1 = 0.9;
    constexpr Real beta2 = 0.999;
    constexpr Real eps = 1e-8;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const Real m_hat = m[i] / bias1;
        const Real v_hat = v[i] / bias2;
        theta[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

}  // namespace

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, Real lr) {
    if (!grads.dE0.same_shape(params.E0) || !grads.dW1.same_shape(params.cluster.W1) ||
        !grads.dW2.same_shape(params.cluster.W2) ||
        grads.db1.size() != params.cluster.b1.size() ||
        grads.db2.size() != params.cluster.b2.size())
        throw InvalidArgumentError("adam_step: gradient shape mismatch");
    ++state.step;
    const Real bias1 = 1.0 - std::pow(0.9, static_cast<Real>(state.step));
    const Real bias2 = 1.0 - std::pow(0.999, static_cast<Real>(state.step));
    adam_update(params.E0.data, grads.dE0.data, state.mE0.data, state.vE0.data, lr, bias1, bias2);
    adam_update(params.cluster.W1.data, grads.dW1.data, state.mW1.data, state.vW1.data, lr, bias1,
                bias2);
    adam_update(params.cluster.b1, grads.db1, state.mb1, state.vb1, lr, bias1, bias2);
    adam_update(params.cluster.W2.data, grads.dW2.data, state.mW2.data, state.vW2.data, lr, bias1,
                bias2);
    adam_update(params.cluster.b2, grads.db2, state.mb2, state.vb2, lr, bias1, bias2);
}

TrainResult train(const InteractionDataset& ds, const BipartiteGraph& graph,
                  const TrainConfig& cfg, const PropagationConfig& prop_cfg,
                  const ModelConfig& model_cfg,
                  const std::function<void(const TrainLog&)>& progress) {
    cfg.validate();
    prop_cfg.validate();
    model_cfg.validate();

    TrainResult result;
    result.params = init_params(graph.n_nodes(), model_cfg.dim, prop_cfg.n_clusters, cfg.seed,
                                model_cfg.tau, model_cfg.leaky_slope);
    result.adam = AdamState::zeros_like(result.params);

    ModelParams best = result.params;
    Real best_recall = -1.0;
    Index best_epoch = 0;
    Index stale_evals = 0;

    const BatchSampler sampler(ds);
    const auto n_train = static_cast<Index>(ds.train.size());
    const Index steps_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;

    for (Index epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Real loss_sum = 0.0;
        for (Index b = 0; b < steps_per_epoch; ++b) {
            try {
                Rng batch_rng(derive_seed(cfg.seed, "negsample", static_cast<std::uint64_t>(epoch),
                                          static_cast<std::uint64_t>(b)));
                const auto batch = sampler.sample_batch(cfg.batch_size, batch_rng);
                const auto noise_seed = derive_seed(cfg.seed, "gumbel",
                                                    static_cast<std::uint64_t>(epoch),
                                                    static_cast<std::uint64_t>(b));
                const ForwardTrace trace =
                    forward(graph, result.params, prop_cfg, noise_seed, NoiseMode::Train);
                loss_sum += bpr_loss(trace, batch, cfg.lambda, result.params);
                const Gradients grads =
                    backward(graph, trace, batch, prop_cfg, result.params, cfg.lambda);
                adam_step(result.params, grads, result.adam, cfg.learning_rate);
            } catch (const NumericError& e) {
                throw NumericError("epoch " + std::to_string(epoch) + " batch " +
                                   std::to_string(b) + ": " + e.what());
            }
        }
        result.log.epochs.push_back(
            {epoch, loss_sum / static_cast<Real>(steps_per_epoch), cfg.learning_rate});
        result.epochs_run = epoch;
        if (progress) progress(result.log);

        if (epoch % cfg.eval_every == 0 && !ds.validation.empty()) {
            const ForwardTrace eval_trace =
                forward(graph, result.params, prop_cfg, 0, NoiseMode::Eval);
            const EvalResult metrics =
                evaluate(eval_trace.final, ds, EvalSplit::Validation, cfg.eval_k);
            const bool improved = metrics.recall > best_recall;
            if (improved) {
                best_recall = metrics.recall;
                best = result.params;
                best_epoch = epoch;
                stale_evals = 0;
            } else {
                ++stale_evals;
            }
            result.log.evals.push_back({epoch, metrics, improved});
            if (progress) progress(result.log);
            if (stale_evals >= cfg.patience) break;
        }
    }

    if (best_recall >= 0.0) {
        result.params = std::move(best);
        result.log.best_epoch = best_epoch;
        result.log.best_recall = best_recall;
    } else {
        result.log.best_epoch = result.epochs_run;
    }
    return result;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    BinaryWriter w(path);
    w.magic("CGCFCKPT1");
    w.u64(static_cast<std::uint64_t>(ck.n_users));
    w.u64(static_cast<std::uint64_t>(ck.n_items));
    w.u64(ck.seed);
    w.u64(static_cast<std::uint64_t>(ck.next_epoch));
    w.u64(static_cast<std::uint64_t>(ck.prop.n_layers));
    w.u64(static_cast<std::uint64_t>(ck.prop.n_clusters));
    w.u64(static_cast<std::uint64_t>(ck.prop.start_layer));
    w.f64(ck.params.cluster.tau);
    w.f64(ck.params.cluster.leaky_slope);
    write_matrix(w, ck.params.E0);
    write_matrix(w, ck.params.cluster.W1);
    w.u64(ck.params.cluster.b1.size());
    w.f64_array(ck.params.cluster.b1);
    write_matrix(w, ck.params.cluster.W2);
    w.u64(ck.params.cluster.b2.size());
    w.f64_array(ck.params.cluster.b2);
    w.u64(static_cast<std::uint64_t>(ck.adam.step));
    write_matrix(w, ck.adam.mE0);
    write_matrix(w, ck.adam.vE0);
    write_matrix(w, ck.adam.mW1);
    write_matrix(w, ck.adam.vW1);
    w.u64(ck.adam.mb1.size());
    w.f64_array(ck.adam.mb1);
    w.f64_array(ck.adam.vb1);
    write_matrix(w, ck.adam.mW2);
    write_matrix(w, ck.adam.vW2);
    w.u64(ck.adam.mb2.size());
    w.f64_array(ck.adam.mb2);
    w.f64_array(ck.adam.vb2);
    w.close();
}

Checkpoint load_checkpoint(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic("CGCFCKPT1");
    Checkpoint ck;
    ck.n_users = static_cast<Index>(r.u64());
    ck.n_items = static_cast<Index>(r.u64());
    ck.seed = r.u64();
    ck.next_epoch = static_cast<Index>(r.u64());
    ck.prop.n_layers = static_cast<Index>(r.u64());
    ck.prop.n_clusters = static_cast<Index>(r.u64());
    ck.prop.start_layer = static_cast<Index>(r.u64());
    ck.params.cluster.tau = r.f64();
    ck.params.cluster.leaky_slope = r.f64();
    ck.params.E0 = read_matrix(r);
    ck.params.cluster.W1 = read_matrix(r);
    ck.params.cluster.b1 = r.f64_array(r.u64());
    ck.params.cluster.W2 = read_matrix(r);
    ck.params.cluster.b2 = r.f64_array(r.u64());
    ck.adam.step = static_cast<Index>(r.u64());
    ck.adam.mE0 = read_matrix(r);
    ck.adam.vE0 = read_matrix(r);
    ck.adam.mW1 = read_matrix(r);
    ck.adam.vW1 = read_matrix(r);
    {
        const auto nb1 = r.u64();
        ck.adam.mb1 = r.f64_array(nb1);
        ck.adam.vb1 = r.f64_array(nb1);
    }
    ck.adam.mW2 = read_matrix(r);
    ck.adam.vW2 = read_matrix(r);
    {
        const auto nb2 = r.u64();
        ck.adam.mb2 = r.f64_array(nb2);
        ck.adam.vb2 = r.f64_array(nb2);
    }
    return ck;
}

}  // namespace cgcf
