#include "clustergcf/propagation.hpp"

#include <cmath>
#include <fstream>

#include "clustergcf/parallel.hpp"

#include "clustergcf/serialize.hpp"
#include "clustergcf/training.hpp"

namespace cgcf {

void PropagationConfig::validate() const {
    if (n_layers < 0 || n_layers > 8)
        throw InvalidArgumentError("propagation: K must be in [0,8]");
    if (n_clusters < 1) throw InvalidArgumentError("propagation: C must be >= 1");
    if (start_layer < 1 || start_layer > 3)
        throw InvalidArgumentError("propagation: start layer must be in {1,2,3}");
    if (n_clusters > 1 && start_layer > n_layers)
        throw InvalidArgumentError("propagation: start layer exceeds K");
}

namespace {

DenseMatrix convolve(const BipartiteGraph& graph, const DenseMatrix& x, Index layer) {
    try {
        return spmm(graph.laplacian, x);
    } catch (const NumericError&) {
        throw NumericError("propagation diverged at layer " + std::to_string(layer));
    }
}

}  // namespace

ForwardTrace propagate_with_assignment(const BipartiteGraph& graph, const DenseMatrix& e0,
                                       const PropagationConfig& cfg,
                                       const ClusterAssignment& assignment, bool retain) {
    cfg.validate();
    const Index n = graph.n_nodes();
    if (e0.n_rows != n) throw InvalidArgumentError("forward: E0 rows != N+M");
    const Index K = cfg.n_layers;
    const Index s = cfg.start_layer;
    const Index C = cfg.n_clusters;
    const bool clustered = cfg.clustering_active();
    if (clustered && assignment.probs.n_rows != n)
        throw InvalidArgumentError("forward: assignment rows != N+M");

    ForwardTrace trace;
    trace.assignment = assignment;
    trace.n_users = graph.n_users;
    trace.retained = retain;

    const Real alpha = cfg.layer_weight();
    trace.final = DenseMatrix(n, e0.n_cols);
    axpy(alpha, e0, trace.final);

    if (retain) trace.layers.push_back(e0);

    // Full-graph convolution below the start layer.
    DenseMatrix current = e0;
    Index k = 1;
    for (; k <= K && k < s; ++k) {
        current = convolve(graph, current, k);
        axpy(alpha, current, trace.final);
        if (retain) trace.layers.push_back(current);
    }

    if (clustered && k <= K) {
        // Each cluster chain starts from the shared E^(s-1) and stays inside
        // its own cluster until the per-layer sum.
        std::vector<DenseMatrix> chain(static_cast<std::size_t>(C));
        if (retain) trace.cluster_chains.resize(static_cast<std::size_t>(C));
        for (; k <= K; ++k) {
            DenseMatrix combined(n, e0.n_cols);
            for (Index c = 0; c < C; ++c) {
                const DenseMatrix& source = (k == s) ? current : chain[static_cast<std::size_t>(c)];
                DenseMatrix scaled = row_scale_by_column(source, assignment.probs, c);
                chain[static_cast<std::size_t>(c)] = convolve(graph, scaled, k);
                axpy(1.0, chain[static_cast<std::size_t>(c)], combined);
                if (retain)
                    trace.cluster_chains[static_cast<std::size_t>(c)].push_back(
                        chain[static_cast<std::size_t>(c)]);
            }
            axpy(alpha, combined, trace.final);
            if (retain) trace.layers.push_back(combined);
        }
    }
    return trace;
}

ForwardTrace forward(const BipartiteGraph& graph, const ModelParams& params,
                     const PropagationConfig& cfg, std::uint64_t noise_seed, NoiseMode mode,
                     const DenseMatrix* fixed_noise) {
    cfg.validate();
    if (params.cluster.n_clusters() != cfg.n_clusters)
        throw InvalidArgumentError("forward: cluster count mismatch between params and config");
    const bool retain = mode == NoiseMode::Train;

    ClusterAssignment assignment;
    ClusterTrace cluster_trace;
    DenseMatrix clustering_e1;
    if (cfg.clustering_active()) {
        // Feature fusion always consumes the full-graph first convolution,
        // even when s=1 routes the output chain through the clusters.
        clustering_e1 = convolve(graph, params.E0, 1);
        if (fixed_noise != nullptr) {
            fuse_features(params.E0, clustering_e1, params.cluster, cluster_trace);
            cluster_logits(params.cluster, cluster_trace);
            assignment =
                gumbel_softmax_with_noise(cluster_trace.logits, params.cluster.tau, *fixed_noise);
        } else {
            assignment = assign_clusters(params.E0, clustering_e1, params.cluster, noise_seed,
                                         mode, cluster_trace);
        }
    }

    ForwardTrace trace = propagate_with_assignment(graph, params.E0, cfg, assignment, retain);
    trace.cluster_trace = std::move(cluster_trace);
    trace.clustering_e1 = std::move(clustering_e1);
    return trace;
}

Real score(const DenseMatrix& final, Index n_users, Index user, Index item) {
    const Index n_items = final.n_rows - n_users;
    if (user < 0 || user >= n_users) throw InvalidArgumentError("score: user id out of range");
    if (item < 0 || item >= n_items) throw InvalidArgumentError("score: item id out of range");
    return dot(final.row(user), final.row(n_users + item));
}

std::vector<Real> score_all_items(const DenseMatrix& final, Index n_users, Index user) {
    const Index n_items = final.n_rows - n_users;
    if (user < 0 || user >= n_users)
        throw InvalidArgumentError("score_all_items: user id out of range");
    std::vector<Real> out(static_cast<std::size_t>(n_items));
    const auto u = final.row(user);
    parallel_rows(n_items, [&](Index i) {
        out[static_cast<std::size_t>(i)] = dot(u, final.row(n_users + i));
    });
    return out;
}

void write_embeddings_csv(const DenseMatrix& final, Index n_users, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "node_id,node_type";
    for (Index j = 0; j < final.n_cols; ++j) out << ",e" << j;
    out << "\n";
    out.precision(17);
    for (Index r = 0; r < final.n_rows; ++r) {
        out << r << ',' << (r < n_users ? "user" : "item");
        for (Index j = 0; j < final.n_cols; ++j) out << ',' << final(r, j);
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

void save_embeddings(const DenseMatrix& final, Index n_users, const std::string& path,
                     bool fp32) {
    BinaryWriter w(path);
    w.magic("CGCFEMB1");
    w.u64(static_cast<std::uint64_t>(final.n_rows));
    w.u64(static_cast<std::uint64_t>(n_users));
    w.u64(static_cast<std::uint64_t>(final.n_cols));
    w.u8(fp32 ? 1 : 0);
    if (fp32) {
        for (const Real v : final.data) w.f32(static_cast<float>(v));
    } else {
        w.f64_array(final.data);
    }
    w.close();
}

EmbeddingFile load_embeddings(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic("CGCFEMB1");
    const auto n_rows = static_cast<Index>(r.u64());
    const auto n_users = static_cast<Index>(r.u64());
    const auto d = static_cast<Index>(r.u64());
    const std::uint8_t dtype = r.u8();
    EmbeddingFile f;
    f.n_users = n_users;
    f.embeddings = DenseMatrix(n_rows, d);
    if (dtype == 1) {
        for (Real& v : f.embeddings.data) v = static_cast<Real>(r.f32());
    } else if (dtype == 0) {
        f.embeddings.data = r.f64_array(static_cast<std::size_t>(n_rows * d));
    } else {
        throw DataError("embedding file: unknown dtype flag");
    }
    return f;
}

}  // namespace cgcf
