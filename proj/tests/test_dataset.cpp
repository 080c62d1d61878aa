#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "clustergcf/dataset.hpp"
#include "support/reference.hpp"

using namespace cgcf;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& content, const std::string& name) {
        path = (std::filesystem::temp_directory_path() / name).string();
        std::ofstream out(path, std::ios::trunc);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

InteractionDataset from_pairs(const std::vector<RawPair>& pairs, std::uint64_t seed = 7) {
    return split(pairs, seed);
}

}  // namespace

TEST_CASE("ingest dedups and keeps order") {
    TempFile f("u1\ti1\nu1\ti1\nu2\ti3\n", "cgcf_ingest1.tsv");
    const auto pairs = ingest(f.path, InputFormat::TsvTriples);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].user == "u1");
    CHECK(pairs[0].item == "i1");
    CHECK(pairs[1].user == "u2");
    CHECK(pairs[1].item == "i3");
}

TEST_CASE("ingest handles csv, extra columns and empty files") {
    TempFile csv("a, x, 5.0, 12345\nb,y\n", "cgcf_ingest2.csv");
    const auto pairs = ingest(csv.path, InputFormat::CsvTriples);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].user == "a");
    CHECK(pairs[0].item == "x");

    TempFile empty("", "cgcf_ingest3.tsv");
    CHECK(ingest(empty.path, InputFormat::TsvTriples).empty());
}

TEST_CASE("ingest errors") {
    CHECK_THROWS_AS(ingest("/nonexistent/cgcf", InputFormat::TsvTriples), IoError);

    TempFile bad("u1\ti1\nonlyonekey\n", "cgcf_ingest4.tsv");
    try {
        ingest(bad.path, InputFormat::TsvTriples);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("k_core k=1 keeps everything") {
    std::vector<RawPair> pairs = {{"u1", "i1"}, {"u2", "i1"}, {"u2", "i2"}};
    const auto kept = k_core_filter(pairs, 1);
    CHECK(kept.size() == 3);
}

TEST_CASE("k_core star graph collapses to empty") {
    // One user with three items: items have degree 1 < 2, removal drops the
    // user's degree to 0, so the iteration empties the data.
    std::vector<RawPair> pairs = {{"u1", "i1"}, {"u1", "i2"}, {"u1", "i3"}};
    CHECK_THROWS_AS(k_core_filter(pairs, 2), DataError);
}

TEST_CASE("k_core fixpoint keeps a 2-core") {
    std::vector<RawPair> pairs = {{"u1", "i1"}, {"u1", "i2"}, {"u2", "i1"}, {"u2", "i2"},
                                  {"u3", "i3"}};  // u3/i3 pruned, square survives
    const auto kept = k_core_filter(pairs, 2);
    CHECK(kept.size() == 4);
    std::unordered_map<std::string, int> user_deg, item_deg;
    for (const auto& p : kept) {
        ++user_deg[p.user];
        ++item_deg[p.item];
    }
    for (const auto& [_, d] : user_deg) CHECK(d >= 2);
    for (const auto& [_, d] : item_deg) CHECK(d >= 2);
}

TEST_CASE("split ratios per user") {
    // one user with 10 items plus padding users so items keep train degree
    std::vector<RawPair> pairs;
    for (int i = 0; i < 10; ++i) pairs.push_back({"u0", "i" + std::to_string(i)});
    for (int u = 1; u <= 5; ++u) {
        for (int i = 0; i < 10; ++i) pairs.push_back({"u" + std::to_string(u), "i" + std::to_string(i)});
    }
    const auto ds = from_pairs(pairs);

    std::vector<Index> test_count(static_cast<std::size_t>(ds.n_users), 0);
    std::vector<Index> total_count(static_cast<std::size_t>(ds.n_users), 0);
    for (const auto& p : ds.test) ++test_count[static_cast<std::size_t>(p.user)];
    for (const auto& p : ds.train) ++total_count[static_cast<std::size_t>(p.user)];
    for (const auto& p : ds.validation) ++total_count[static_cast<std::size_t>(p.user)];
    for (const auto& p : ds.test) ++total_count[static_cast<std::size_t>(p.user)];
    for (Index u = 0; u < ds.n_users; ++u) {
        CHECK(total_count[static_cast<std::size_t>(u)] == 10);
        CHECK(test_count[static_cast<std::size_t>(u)] == 2);  // floor(0.2*10)
    }
}

TEST_CASE("split minimum case: two interactions") {
    std::vector<RawPair> pairs = {{"u0", "i0"}, {"u0", "i1"}, {"u1", "i0"}, {"u1", "i1"}};
    // seed chosen so the two users draw different test items; otherwise the
    // no-cold-start repair would pull one pair back into train
    const auto ds = from_pairs(pairs, 2);
    std::vector<Index> test_count(2, 0), rest(2, 0);
    for (const auto& p : ds.test) ++test_count[static_cast<std::size_t>(p.user)];
    for (const auto& p : ds.train) ++rest[static_cast<std::size_t>(p.user)];
    for (const auto& p : ds.validation) ++rest[static_cast<std::size_t>(p.user)];
    for (int u = 0; u < 2; ++u) {
        CHECK(test_count[u] == 1);
        CHECK(rest[u] == 1);
    }
}

TEST_CASE("split rejects singleton users") {
    std::vector<RawPair> pairs = {{"u0", "i0"}, {"u1", "i0"}, {"u1", "i1"}};
    CHECK_THROWS_AS(split(pairs, 1), InvalidArgumentError);
}

TEST_CASE("split determinism and partition") {
    const auto pairs = testref::planted_partition(20, 20, 6, 0.9, 11);
    const auto a = split(pairs, 5);
    const auto b = split(pairs, 5);
    CHECK(a.train.size() == b.train.size());
    CHECK(a.validation.size() == b.validation.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].user == b.train[i].user);
        CHECK(a.train[i].item == b.train[i].item);
    }

    // partition: sizes add up and no pair repeats across splits
    CHECK(a.train.size() + a.validation.size() + a.test.size() == pairs.size());
    std::set<std::pair<Index, Index>> seen;
    for (const auto* splitv : {&a.train, &a.validation, &a.test}) {
        for (const auto& p : *splitv) CHECK(seen.insert({p.user, p.item}).second);
    }

    // validation is 10% of the pre-carve train pool
    const auto pool = a.train.size() + a.validation.size();
    CHECK(a.validation.size() == pool / 10);

    // no cold-start rows: every user and item appears in train
    std::set<Index> users, items;
    for (const auto& p : a.train) {
        users.insert(p.user);
        items.insert(p.item);
    }
    CHECK(static_cast<Index>(users.size()) == a.n_users);
    CHECK(static_cast<Index>(items.size()) == a.n_items);
}

TEST_CASE("sample_batch forced negative") {
    InteractionDataset ds;
    ds.n_users = 1;
    ds.n_items = 2;
    ds.train = {{0, 0}};
    ds.user_vocab = {"u0"};
    ds.item_vocab = {"i0", "i1"};
    const BatchSampler sampler(ds);
    Rng rng(3);
    for (const auto& t : sampler.sample_batch(16, rng)) {
        CHECK(t.user == 0);
        CHECK(t.item_pos == 0);
        CHECK(t.item_neg == 1);
    }
}

TEST_CASE("sample_batch size, determinism, no collisions") {
    const auto pairs = testref::planted_partition(12, 12, 5, 0.8, 21);
    const auto ds = split(pairs, 9);
    const BatchSampler sampler(ds);

    Rng r1(42), r2(42);
    const auto b1 = sampler.sample_batch(1024, r1);
    const auto b2 = sampler.sample_batch(1024, r2);
    REQUIRE(b1.size() == 1024);
    for (std::size_t i = 0; i < b1.size(); ++i) {
        CHECK(b1[i].user == b2[i].user);
        CHECK(b1[i].item_pos == b2[i].item_pos);
        CHECK(b1[i].item_neg == b2[i].item_neg);
        CHECK_FALSE(sampler.is_positive(b1[i].user, b1[i].item_neg));
    }
}

TEST_CASE("sample_batch stuck sampler") {
    InteractionDataset ds;
    ds.n_users = 1;
    ds.n_items = 1;
    ds.train = {{0, 0}};
    ds.user_vocab = {"u0"};
    ds.item_vocab = {"i0"};
    const BatchSampler sampler(ds);
    Rng rng(1);
    CHECK_THROWS_AS(sampler.sample_batch(1, rng), DataError);
}

TEST_CASE("dataset cache roundtrip is lossless and byte-stable") {
    const auto pairs = testref::planted_partition(10, 10, 5, 0.85, 31);
    const auto ds = split(pairs, 13);
    const auto path =
        (std::filesystem::temp_directory_path() / "cgcf_cache_test.bin").string();
    save_dataset(ds, path);
    const auto back = load_dataset(path);
    CHECK(back.n_users == ds.n_users);
    CHECK(back.n_items == ds.n_items);
    CHECK(back.user_vocab == ds.user_vocab);
    CHECK(back.item_vocab == ds.item_vocab);
    REQUIRE(back.train.size() == ds.train.size());
    for (std::size_t i = 0; i < ds.train.size(); ++i) {
        CHECK(back.train[i].user == ds.train[i].user);
        CHECK(back.train[i].item == ds.train[i].item);
    }
    CHECK(back.validation.size() == ds.validation.size());
    CHECK(back.test.size() == ds.test.size());

    const auto path2 =
        (std::filesystem::temp_directory_path() / "cgcf_cache_test2.bin").string();
    save_dataset(back, path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string bytes1((std::istreambuf_iterator<char>(f1)), {});
    const std::string bytes2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(bytes1 == bytes2);
    std::remove(path.c_str());
    std::remove(path2.c_str());

    CHECK_THROWS_AS(load_dataset("/nonexistent/cgcf.bin"), IoError);
}

TEST_CASE("k_core property: min degree >= k after filtering") {
    const auto raw = testref::planted_partition(15, 15, 4, 0.7, 41);
    const auto kept = k_core_filter(raw, 3);
    std::unordered_map<std::string, int> user_deg, item_deg;
    for (const auto& p : kept) {
        ++user_deg[p.user];
        ++item_deg[p.item];
    }
    for (const auto& [_, d] : user_deg) CHECK(d >= 3);
    for (const auto& [_, d] : item_deg) CHECK(d >= 3);
}
