#include "clustergcf/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "clustergcf/serialize.hpp"

namespace cgcf {

namespace {

constexpr char kDatasetMagic[] = "CGCFDS1";  // written with trailing NUL, 8 bytes

std::vector<std::string> tokenize(const std::string& line, InputFormat format) {
    std::vector<std::string> out;
    if (format == InputFormat::CsvTriples) {
        std::size_t start = 0;
        while (start <= line.size()) {
            const std::size_t comma = line.find(',', start);
            const std::size_t end = comma == std::string::npos ? line.size() : comma;
            std::string tok = line.substr(start, end - start);
            // trim surrounding whitespace
            const auto a = tok.find_first_not_of(" \t\r");
            const auto b = tok.find_last_not_of(" \t\r");
            out.push_back(a == std::string::npos ? "" : tok.substr(a, b - a + 1));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    } else {
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
            std::size_t j = i;
            while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
            if (j > i) out.push_back(line.substr(i, j - i));
            i = j;
        }
    }
    return out;
}

}  // namespace

std::vector<RawPair> ingest(const std::string& path, InputFormat format) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);

    std::vector<RawPair> pairs;
    std::unordered_map<std::string, std::unordered_set<std::string>> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto toks = tokenize(line, format);
        if (toks.size() < 2 || toks[0].empty() || toks[1].empty())
            throw ParseError("line " + std::to_string(line_no) + ": expected user and item keys");
        auto& items = seen[toks[0]];
        if (items.insert(toks[1]).second) pairs.push_back({toks[0], toks[1]});
    }
    if (in.bad()) throw IoError("read failed: " + path);
    return pairs;
}

std::vector<RawPair> k_core_filter(std::vector<RawPair> pairs, Index k) {
    if (k < 1) throw InvalidArgumentError("k_core_filter: k must be >= 1");
    bool changed = true;
    while (changed) {
        changed = false;
        std::unordered_map<std::string, Index> user_deg;
        std::unordered_map<std::string, Index> item_deg;
        for (const auto& p : pairs) {
            ++user_deg[p.user];
            ++item_deg[p.item];
        }
        std::vector<RawPair> kept;
        kept.reserve(pairs.size());
        for (auto& p : pairs) {
            if (user_deg[p.user] >= k && item_deg[p.item] >= k)
                kept.push_back(std::move(p));
            else
                changed = true;
        }
        pairs = std::move(kept);
    }
    if (pairs.empty()) throw DataError("k_core_filter: nothing survives k=" + std::to_string(k));
    return pairs;
}

InteractionDataset split(const std::vector<RawPair>& pairs, std::uint64_t seed) {
    InteractionDataset ds;
    std::unordered_map<std::string, Index> user_ids;
    std::unordered_map<std::string, Index> item_ids;

    // dense ids in first-seen order
    std::vector<std::vector<Index>> user_items;
    for (const auto& p : pairs) {
        auto [uit, unew] = user_ids.try_emplace(p.user, static_cast<Index>(ds.user_vocab.size()));
        if (unew) {
            ds.user_vocab.push_back(p.user);
            user_items.emplace_back();
        }
        auto [iit, inew] = item_ids.try_emplace(p.item, static_cast<Index>(ds.item_vocab.size()));
        if (inew) ds.item_vocab.push_back(p.item);
        user_items[static_cast<std::size_t>(uit->second)].push_back(iit->second);
    }
    ds.n_users = static_cast<Index>(ds.user_vocab.size());
    ds.n_items = static_cast<Index>(ds.item_vocab.size());

    for (const auto& items : user_items) {
        if (items.size() < 2)
            throw InvalidArgumentError("split: every user must have >= 2 interactions");
    }

    // Per-user 80/20; the per-user rng stream makes the draw independent of
    // the user iteration order.
    std::vector<Index> user_train_deg(static_cast<std::size_t>(ds.n_users), 0);
    std::vector<Index> item_train_deg(static_cast<std::size_t>(ds.n_items), 0);
    std::vector<std::vector<Index>> user_test(static_cast<std::size_t>(ds.n_users));
    std::vector<std::vector<Index>> user_train(static_cast<std::size_t>(ds.n_users));
    for (Index u = 0; u < ds.n_users; ++u) {
        auto items = user_items[static_cast<std::size_t>(u)];
        const auto deg = static_cast<Index>(items.size());
        Index n_test = static_cast<Index>(0.2 * static_cast<Real>(deg));
        n_test = std::max<Index>(n_test, 1);
        n_test = std::min<Index>(n_test, deg - 1);

        Rng rng(derive_seed(seed, "split", static_cast<std::uint64_t>(u)));
        // Fisher-Yates; the last n_test entries become the test set.
        for (Index i = deg - 1; i > 0; --i) {
            const auto j = static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(i) + 1));
            std::swap(items[static_cast<std::size_t>(i)], items[static_cast<std::size_t>(j)]);
        }
        for (Index idx = 0; idx < deg; ++idx) {
            const Index item = items[static_cast<std::size_t>(idx)];
            if (idx < deg - n_test) {
                user_train[static_cast<std::size_t>(u)].push_back(item);
                ++user_train_deg[static_cast<std::size_t>(u)];
                ++item_train_deg[static_cast<std::size_t>(item)];
            } else {
                user_test[static_cast<std::size_t>(u)].push_back(item);
            }
        }
    }

    // Repair: an item whose every interaction landed in test has no train
    // edge; pull one test pair back into train (ascending item id, then the
    // smallest user id holding it in test).
    for (Index i = 0; i < ds.n_items; ++i) {
        if (item_train_deg[static_cast<std::size_t>(i)] > 0) continue;
        bool moved = false;
        for (Index u = 0; u < ds.n_users && !moved; ++u) {
            auto& tl = user_test[static_cast<std::size_t>(u)];
            for (std::size_t t = 0; t < tl.size(); ++t) {
                if (tl[t] != i) continue;
                tl.erase(tl.begin() + static_cast<std::ptrdiff_t>(t));
                user_train[static_cast<std::size_t>(u)].push_back(i);
                ++user_train_deg[static_cast<std::size_t>(u)];
                ++item_train_deg[static_cast<std::size_t>(i)];
                moved = true;
                break;
            }
        }
        if (!moved) throw DataError("split: item " + std::to_string(i) + " has no interactions");
    }

    std::vector<IdPair> train_pool;
    for (Index u = 0; u < ds.n_users; ++u) {
        for (const Index i : user_train[static_cast<std::size_t>(u)]) train_pool.push_back({u, i});
        for (const Index i : user_test[static_cast<std::size_t>(u)]) ds.test.push_back({u, i});
    }

    // Global 10% validation carve from train; a pair is skipped when its
    // removal would strand the user or item outside train.
    const auto target = static_cast<Index>(0.1 * static_cast<Real>(train_pool.size()));
    std::vector<std::size_t> order(train_pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng vrng(derive_seed(seed, "validation"));
    for (std::size_t i = order.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(vrng.uniform_below(i));
        std::swap(order[i - 1], order[j]);
    }
    std::vector<bool> to_validation(train_pool.size(), false);
    Index carved = 0;
    for (const std::size_t idx : order) {
        if (carved >= target) break;
        const IdPair p = train_pool[idx];
        if (user_train_deg[static_cast<std::size_t>(p.user)] <= 1) continue;
        if (item_train_deg[static_cast<std::size_t>(p.item)] <= 1) continue;
        to_validation[idx] = true;
        --user_train_deg[static_cast<std::size_t>(p.user)];
        --item_train_deg[static_cast<std::size_t>(p.item)];
        ++carved;
    }
    for (std::size_t i = 0; i < train_pool.size(); ++i) {
        if (to_validation[i])
            ds.validation.push_back(train_pool[i]);
        else
            ds.train.push_back(train_pool[i]);
    }
    return ds;
}

BatchSampler::BatchSampler(const InteractionDataset& ds) : ds_(&ds) {
    positives_.resize(static_cast<std::size_t>(ds.n_users));
    for (const auto& p : ds.train) positives_[static_cast<std::size_t>(p.user)].insert(p.item);
    for (const auto& p : ds.validation)
        positives_[static_cast<std::size_t>(p.user)].insert(p.item);
}

bool BatchSampler::is_positive(Index user, Index item) const {
    return positives_[static_cast<std::size_t>(user)].contains(item);
}

std::vector<BprTriplet> BatchSampler::sample_batch(Index batch_size, Rng& rng) const {
    if (batch_size < 1) throw InvalidArgumentError("sample_batch: batch_size must be >= 1");
    if (ds_->train.empty()) throw DataError("sample_batch: empty train split");
    std::vector<BprTriplet> batch;
    batch.reserve(static_cast<std::size_t>(batch_size));
    for (Index b = 0; b < batch_size; ++b) {
        const auto pick = rng.uniform_below(ds_->train.size());
        const IdPair pos = ds_->train[static_cast<std::size_t>(pick)];
        Index neg = -1;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            const auto cand =
                static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(ds_->n_items)));
            if (!is_positive(pos.user, cand)) {
                neg = cand;
                break;
            }
        }
        if (neg < 0)
            throw DataError("sample_batch: no negative found for user " +
                            std::to_string(pos.user) + " after 1000 rejections");
        batch.push_back({pos.user, pos.item, neg});
    }
    return batch;
}

void save_dataset(const InteractionDataset& ds, const std::string& path) {
    BinaryWriter w(path);
    w.magic(std::string(kDatasetMagic, 8));
    w.u64(static_cast<std::uint64_t>(ds.n_users));
    w.u64(static_cast<std::uint64_t>(ds.n_items));
    for (const auto& s : ds.user_vocab) w.str(s);
    for (const auto& s : ds.item_vocab) w.str(s);
    const auto write_split = [&w](const std::vector<IdPair>& v) {
        w.u64(v.size());
        for (const auto& p : v) {
            w.u32(static_cast<std::uint32_t>(p.user));
            w.u32(static_cast<std::uint32_t>(p.item));
        }
    };
    write_split(ds.train);
    write_split(ds.validation);
    write_split(ds.test);
    w.close();
}

InteractionDataset load_dataset(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic(std::string(kDatasetMagic, 8));
    InteractionDataset ds;
    ds.n_users = static_cast<Index>(r.u64());
    ds.n_items = static_cast<Index>(r.u64());
    ds.user_vocab.reserve(static_cast<std::size_t>(ds.n_users));
    for (Index i = 0; i < ds.n_users; ++i) ds.user_vocab.push_back(r.str());
    ds.item_vocab.reserve(static_cast<std::size_t>(ds.n_items));
    for (Index i = 0; i < ds.n_items; ++i) ds.item_vocab.push_back(r.str());
    const auto read_split = [&r](std::vector<IdPair>& v) {
        const std::uint64_t n = r.u64();
        v.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            const Index u = static_cast<Index>(r.u32());
            const Index it = static_cast<Index>(r.u32());
            v.push_back({u, it});
        }
    };
    read_split(ds.train);
    read_split(ds.validation);
    read_split(ds.test);
    return ds;
}

}  // namespace cgcf
