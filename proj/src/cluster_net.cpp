#include "clustergcf/cluster_net.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "clustergcf/parallel.hpp"

namespace cgcf {

void ClusterNetParams::validate() const {
    const Index d = dim();
    const Index c = n_clusters();
    if (d < 1 || c < 1) throw InvalidArgumentError("cluster params: need d >= 1 and C >= 1");
    if (W1.n_rows != d || W1.n_cols != d || static_cast<Index>(b1.size()) != d)
        throw InvalidArgumentError("cluster params: W1/b1 shape");
    if (W2.n_rows != d || static_cast<Index>(b2.size()) != c)
        throw InvalidArgumentError("cluster params: W2/b2 shape");
    if (!(tau > 0.0)) throw InvalidArgumentError("cluster params: tau must be > 0");
    if (!all_finite(W1) || !all_finite(W2))
        throw InvalidArgumentError("cluster params: non-finite weight");
}

Real leaky_relu(Real x, Real slope) { return x > 0.0 ? x : slope * x; }

Real leaky_relu_grad(Real pre, Real slope) { return pre > 0.0 ? 1.0 : slope; }

void fuse_features(const DenseMatrix& e0, const DenseMatrix& e1, const ClusterNetParams& p,
                   ClusterTrace& trace) {
    const Index d = p.dim();
    if (e0.n_cols != d || e1.n_cols != d || e0.n_rows != e1.n_rows)
        throw InvalidArgumentError("fuse_features: shape mismatch");
    const Index n = e0.n_rows;

    trace.fused_pre = DenseMatrix(n, d);
    trace.fused = DenseMatrix(n, d);
    parallel_rows(n, [&](Index r) {
        for (Index j = 0; j < d; ++j) {
            Real acc = p.b1[static_cast<std::size_t>(j)];
            for (Index k = 0; k < d; ++k)
                acc += (e0(r, k) + e1(r, k)) * p.W1(k, j);
            trace.fused_pre(r, j) = acc;
            trace.fused(r, j) = leaky_relu(acc, p.leaky_slope);
        }
    });
}

void cluster_logits(const ClusterNetParams& p, ClusterTrace& trace) {
    const Index d = p.dim();
    const Index c = p.n_clusters();
    if (trace.fused.n_cols != d) throw InvalidArgumentError("cluster_logits: shape mismatch");
    const Index n = trace.fused.n_rows;

    trace.logits_pre = DenseMatrix(n, c);
    trace.logits = DenseMatrix(n, c);
    parallel_rows(n, [&](Index r) {
        for (Index j = 0; j < c; ++j) {
            Real acc = p.b2[static_cast<std::size_t>(j)];
            for (Index k = 0; k < d; ++k) acc += trace.fused(r, k) * p.W2(k, j);
            trace.logits_pre(r, j) = acc;
            trace.logits(r, j) = leaky_relu(acc, p.leaky_slope);
        }
    });
}

namespace {

void softmax_rows(const DenseMatrix& logits, Real tau, const DenseMatrix* noise,
                  DenseMatrix& probs) {
    const Index n = logits.n_rows;
    const Index c = logits.n_cols;
    const Real smooth_denom = 1.0 + static_cast<Real>(c) * kProbSmoothing;
    parallel_rows(n, [&](Index r) {
        Real mx = -std::numeric_limits<Real>::infinity();
        for (Index j = 0; j < c; ++j) {
            const Real g = noise ? (*noise)(r, j) : 0.0;
            const Real v = (logits(r, j) + g) / tau;
            probs(r, j) = v;
            if (v > mx) mx = v;
        }
        Real sum = 0.0;
        for (Index j = 0; j < c; ++j) {
            const Real e = std::exp(probs(r, j) - mx);
            probs(r, j) = e;
            sum += e;
        }
        for (Index j = 0; j < c; ++j)
            probs(r, j) = (probs(r, j) / sum + kProbSmoothing) / smooth_denom;
    });
}

}  // namespace

DenseMatrix sample_gumbel_noise(Index rows, Index cols, std::uint64_t seed) {
    DenseMatrix g(rows, cols);
    parallel_rows(rows, [&](Index r) {
        Rng rng(derive_seed(seed, "row", static_cast<std::uint64_t>(r)));
        for (Index j = 0; j < cols; ++j) g(r, j) = rng.gumbel();
    });
    return g;
}

ClusterAssignment gumbel_softmax(const DenseMatrix& logits, Real tau, std::uint64_t noise_seed,
                                 NoiseMode mode) {
    if (!(tau > 0.0)) throw InvalidArgumentError("gumbel_softmax: tau must be > 0");
    ClusterAssignment out;
    if (mode == NoiseMode::Train) {
        out.noise = sample_gumbel_noise(logits.n_rows, logits.n_cols, noise_seed);
        out.probs = DenseMatrix(logits.n_rows, logits.n_cols);
        softmax_rows(logits, tau, &out.noise, out.probs);
    } else {
        out.probs = DenseMatrix(logits.n_rows, logits.n_cols);
        softmax_rows(logits, tau, nullptr, out.probs);
    }
    return out;
}

ClusterAssignment gumbel_softmax_with_noise(const DenseMatrix& logits, Real tau,
                                            const DenseMatrix& noise) {
    if (!(tau > 0.0)) throw InvalidArgumentError("gumbel_softmax: tau must be > 0");
    if (!noise.same_shape(logits)) throw InvalidArgumentError("gumbel_softmax: noise shape");
    ClusterAssignment out;
    out.noise = noise;
    out.probs = DenseMatrix(logits.n_rows, logits.n_cols);
    softmax_rows(logits, tau, &out.noise, out.probs);
    return out;
}

ClusterAssignment assign_clusters(const DenseMatrix& e0, const DenseMatrix& e1,
                                  const ClusterNetParams& p, std::uint64_t noise_seed,
                                  NoiseMode mode, ClusterTrace& trace) {
    p.validate();
    fuse_features(e0, e1, p, trace);
    cluster_logits(p, trace);
    return gumbel_softmax(trace.logits, p.tau, noise_seed, mode);
}

void write_clusters_csv(const DenseMatrix& probs, Index n_users, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "node_id,node_type";
    for (Index j = 0; j < probs.n_cols; ++j) out << ",p" << j;
    out << "\n";
    out.precision(17);
    for (Index r = 0; r < probs.n_rows; ++r) {
        out << r << ',' << (r < n_users ? "user" : "item");
        for (Index j = 0; j < probs.n_cols; ++j) out << ',' << probs(r, j);
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace cgcf
