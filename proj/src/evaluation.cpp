#include "clustergcf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "clustergcf/parallel.hpp"

#include "clustergcf/propagation.hpp"

namespace cgcf {

namespace {

struct UserMetrics {
    Real recall = 0.0;
    Real hr = 0.0;
    Real ndcg = 0.0;
    bool evaluated = false;
};

std::vector<std::unordered_set<Index>> group_by_user(const std::vector<IdPair>& pairs,
                                                     Index n_users) {
    std::vector<std::unordered_set<Index>> out(static_cast<std::size_t>(n_users));
    for (const auto& p : pairs) out[static_cast<std::size_t>(p.user)].insert(p.item);
    return out;
}

// Top-k unmasked item ids for one user; ties break by ascending item id.
std::vector<Index> top_k_items(const DenseMatrix& final, const InteractionDataset& ds,
                               const std::unordered_set<Index>& masked, Index user, Index k) {
    std::vector<Real> scores = score_all_items(final, ds.n_users, user);
    std::vector<Index> candidates;
    candidates.reserve(static_cast<std::size_t>(ds.n_items));
    for (Index i = 0; i < ds.n_items; ++i) {
        if (!masked.contains(i)) candidates.push_back(i);
    }
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), candidates.size());
    const auto cmp = [&scores](Index a, Index b) {
        const Real sa = scores[static_cast<std::size_t>(a)];
        const Real sb = scores[static_cast<std::size_t>(b)];
        if (sa != sb) return sa > sb;
        return a < b;
    };
    std::partial_sort(candidates.begin(),
                      candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end(),
                      cmp);
    candidates.resize(take);
    return candidates;
}

}  // namespace

EvalResult evaluate(const DenseMatrix& final, const InteractionDataset& ds, EvalSplit split,
                    Index k) {
    if (k < 1) throw InvalidArgumentError("evaluate: k must be >= 1");
    const std::vector<IdPair>& target_pairs =
        split == EvalSplit::Validation ? ds.validation : ds.test;
    if (target_pairs.empty()) throw DataError("evaluate: empty split");

    const auto targets = group_by_user(target_pairs, ds.n_users);
    auto masks = group_by_user(ds.train, ds.n_users);
    if (split == EvalSplit::Test) {
        for (const auto& p : ds.validation)
            masks[static_cast<std::size_t>(p.user)].insert(p.item);
    }

    std::vector<UserMetrics> per_user(static_cast<std::size_t>(ds.n_users));
    parallel_rows(ds.n_users, [&](Index u) {
        const auto& tgt = targets[static_cast<std::size_t>(u)];
        if (tgt.empty()) return;
        const auto ranked = top_k_items(final, ds, masks[static_cast<std::size_t>(u)], u, k);

        Index hits = 0;
        Real dcg = 0.0;
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            if (tgt.contains(ranked[r])) {
                ++hits;
                dcg += 1.0 / std::log2(static_cast<Real>(r) + 2.0);
            }
        }
        Real idcg = 0.0;
        const auto ideal = std::min<Index>(static_cast<Index>(tgt.size()), k);
        for (Index r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<Real>(r) + 2.0);

        auto& m = per_user[static_cast<std::size_t>(u)];
        m.recall = static_cast<Real>(hits) / static_cast<Real>(tgt.size());
        m.hr = hits > 0 ? 1.0 : 0.0;
        m.ndcg = idcg > 0.0 ? dcg / idcg : 0.0;
        m.evaluated = true;
    });

    EvalResult res;
    res.k = k;
    for (Index u = 0; u < ds.n_users; ++u) {
        const auto& m = per_user[static_cast<std::size_t>(u)];
        if (!m.evaluated) continue;
        res.recall += m.recall;
        res.hr += m.hr;
        res.ndcg += m.ndcg;
        ++res.n_users_evaluated;
    }
    if (res.n_users_evaluated > 0) {
        const auto n = static_cast<Real>(res.n_users_evaluated);
        res.recall /= n;
        res.hr /= n;
        res.ndcg /= n;
    }
    return res;
}

std::vector<std::vector<Index>> rank_users(const DenseMatrix& final, const InteractionDataset& ds,
                                           EvalSplit split, const std::vector<Index>& users,
                                           Index k) {
    if (k < 1) throw InvalidArgumentError("rank_users: k must be >= 1");
    auto masks = group_by_user(ds.train, ds.n_users);
    if (split == EvalSplit::Test) {
        for (const auto& p : ds.validation)
            masks[static_cast<std::size_t>(p.user)].insert(p.item);
    }
    std::vector<std::vector<Index>> out;
    out.reserve(users.size());
    for (const Index u : users) {
        if (u < 0 || u >= ds.n_users) throw InvalidArgumentError("rank_users: user id out of range");
        out.push_back(top_k_items(final, ds, masks[static_cast<std::size_t>(u)], u, k));
    }
    return out;
}

}  // namespace cgcf
