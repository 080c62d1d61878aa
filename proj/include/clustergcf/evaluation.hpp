#pragma once

#include <vector>

#include "clustergcf/dataset.hpp"
#include "clustergcf/dense.hpp"

namespace cgcf {

enum class EvalSplit { Validation, Test };

struct EvalResult {
    Real recall = 0.0;
    Real hr = 0.0;
    Real ndcg = 0.0;
    Index k = 0;
    Index n_users_evaluated = 0;
};

// Full ranking over all items, per user with a nonempty target set. Train
// items are masked out; on the test split validation items are masked too.
// Ties break by ascending item id. NDCG uses binary gain 1/log2(rank+1) with
// IDCG truncated at min(|targets|, k). Throws DataError on an empty split.
EvalResult evaluate(const DenseMatrix& final, const InteractionDataset& ds, EvalSplit split,
                    Index k);

// Top-k item ids per requested user under the same masking and tie rules.
std::vector<std::vector<Index>> rank_users(const DenseMatrix& final, const InteractionDataset& ds,
                                           EvalSplit split, const std::vector<Index>& users,
                                           Index k);

}  // namespace cgcf
