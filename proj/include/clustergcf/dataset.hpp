#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "clustergcf/rng.hpp"
#include "clustergcf/types.hpp"

namespace cgcf {

enum class InputFormat { TsvTriples, CsvTriples };

struct RawPair {
    std::string user;
    std::string item;
};

struct IdPair {
    Index user;
    Index item;
    bool operator==(const IdPair&) const = default;
};

// Deduplicated user-item interactions with train/validation/test splits and
// the raw-key -> dense-id vocabularies. Invariants: ids dense in [0,N)/[0,M),
// no duplicate pair within or across splits, and every user and item keeps at
// least one train interaction so the graph has no isolated node.
struct InteractionDataset {
    Index n_users = 0;
    Index n_items = 0;
    std::vector<IdPair> train;
    std::vector<IdPair> validation;
    std::vector<IdPair> test;
    std::vector<std::string> user_vocab;  // dense id -> raw key
    std::vector<std::string> item_vocab;

    Index n_nodes() const { return n_users + n_items; }
};

struct BprTriplet {
    Index user;
    Index item_pos;
    Index item_neg;
};

// Reads one interaction per line (user-key item-key [ignored...]); delimiter
// is whitespace for tsv_triples and comma for csv_triples. Duplicates are
// dropped keeping first-seen order; ratings/timestamps are ignored.
std::vector<RawPair> ingest(const std::string& path, InputFormat format);

// Iteratively removes users/items with fewer than k interactions until every
// remaining degree is >= k. Throws DataError when nothing survives.
std::vector<RawPair> k_core_filter(std::vector<RawPair> pairs, Index k);

// Per-user 80/20 train/test split, then a global 10%-of-train validation
// carve. test count per user = min(max(1, floor(0.2*deg)), deg-1). The carve
// never strands a user or item outside train. Deterministic under seed.
InteractionDataset split(const std::vector<RawPair>& pairs, std::uint64_t seed);

// Precomputed positive sets for negative-sample rejection (train+validation).
class BatchSampler {
  public:
    explicit BatchSampler(const InteractionDataset& ds);

    // batch_size triplets: positives uniform over train, negatives uniform
    // over items resampled while they hit a train/validation positive.
    // Throws DataError after 1000 rejections for one positive.
    std::vector<BprTriplet> sample_batch(Index batch_size, Rng& rng) const;

    bool is_positive(Index user, Index item) const;

  private:
    const InteractionDataset* ds_;
    std::vector<std::unordered_set<Index>> positives_;  // per user: train + validation items
};

// Versioned binary snapshot, magic "CGCFDS1\0", little-endian counts.
void save_dataset(const InteractionDataset& ds, const std::string& path);
InteractionDataset load_dataset(const std::string& path);

}  // namespace cgcf
