#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "clustergcf/commands.hpp"
#include "clustergcf/evaluation.hpp"
#include "clustergcf/serialize.hpp"
#include "support/reference.hpp"

using namespace cgcf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("cgcf_cli_" + std::to_string(Rng(std::random_device{}()).next_u64() % 1000000));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr,
            std::string* err_text = nullptr) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return code;
}

// 3 users x 3 items, 6 edges, 2 per user
void write_tiny_fixture(const std::string& path) {
    std::ofstream f(path);
    f << "u0\ti0\nu0\ti1\nu1\ti1\nu1\ti2\nu2\ti2\nu2\ti0\n";
}

std::string write_planted(const TempDir& dir, Index users = 16, Index items = 12) {
    const auto pairs = testref::planted_partition(users, items, 5, 0.85, 99);
    const std::string path = dir.file("raw.tsv");
    std::ofstream f(path);
    for (const auto& p : pairs) f << p.user << '\t' << p.item << '\n';
    return path;
}

std::string base_config(const TempDir& dir, const std::string& data,
                        const std::string& out_name, const std::string& extra = "") {
    const std::string path = dir.file(out_name + ".cfg");
    std::ofstream f(path);
    f << "data=" << data << "\n";
    f << "out_dir=" << dir.file(out_name) << "\n";
    f << "dim=4\nclusters=2\ntau=0.1\nlayers=2\nstart_layer=2\n";
    f << "lr=0.01\nlambda=1e-4\nbatch_size=16\nmax_epochs=3\neval_every=2\n";
    f << "eval_k=5\nseed=11\n" << extra;
    return path;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("prepare reports the tiny fixture stats") {
    TempDir dir;
    const auto raw = dir.file("tiny.tsv");
    write_tiny_fixture(raw);
    std::string out;
    const int code = run_cli({"prepare", "--input", raw, "--format", "tsv", "--k-core", "1",
                              "--seed", "3", "--out", dir.file("ds")},
                             &out);
    CHECK(code == 0);
    CHECK(out.find("users: 3") != std::string::npos);
    CHECK(out.find("items: 3") != std::string::npos);
    CHECK(out.find("interactions: 6") != std::string::npos);
    CHECK(out.find("sparsity: 33.33%") != std::string::npos);
    CHECK(fs::exists(dir.file("ds") + "/dataset.bin"));
}

TEST_CASE("prepare: everything filtered out exits 2") {
    TempDir dir;
    const auto raw = dir.file("star.tsv");
    std::ofstream(raw) << "u0\ti0\nu0\ti1\nu0\ti2\n";
    std::string err;
    const int code = run_cli({"prepare", "--input", raw, "--k-core", "2", "--out",
                              dir.file("ds")},
                             nullptr, &err);
    CHECK(code == 2);
    CHECK_FALSE(err.empty());
}

TEST_CASE("prepare: missing input exits 2, bad flag exits 1") {
    TempDir dir;
    CHECK(run_cli({"prepare", "--input", dir.file("absent.tsv"), "--out", dir.file("x")}) == 2);
    CHECK(run_cli({"prepare", "--nonsense"}) == 1);
    CHECK(run_cli({"bogus-subcommand"}) == 1);
    std::string out;
    CHECK(run_cli({"--help"}, &out) == 0);
    CHECK(out.find("prepare") != std::string::npos);
}

TEST_CASE("train: max_epochs=0 still writes a checkpoint and metrics") {
    TempDir dir;
    const auto raw = write_planted(dir);
    REQUIRE(run_cli({"prepare", "--input", raw, "--k-core", "1", "--out", dir.file("ds")}) == 0);
    const auto cfg = base_config(dir, dir.file("ds") + "/dataset.bin", "run0",
                                 "max_epochs=0\n");
    std::string out;
    CHECK(run_cli({"train", "--config", cfg}, &out) == 0);
    CHECK(fs::exists(dir.file("run0") + "/checkpoint.bin"));
    CHECK(fs::exists(dir.file("run0") + "/metrics.json"));
    CHECK(fs::exists(dir.file("run0") + "/train_log.jsonl"));
    CHECK(fs::exists(dir.file("run0") + "/config_effective.cfg"));
    CHECK(out.find("test Recall@5") != std::string::npos);
}

TEST_CASE("train: determinism and the lightgcn-equivalent label") {
    TempDir dir;
    const auto raw = write_planted(dir);
    REQUIRE(run_cli({"prepare", "--input", raw, "--k-core", "1", "--out", dir.file("ds")}) == 0);
    const auto data = dir.file("ds") + "/dataset.bin";

    const auto cfg_a = base_config(dir, data, "runA");
    const auto cfg_b = base_config(dir, data, "runB");
    std::string out_a, out_b;
    REQUIRE(run_cli({"train", "--config", cfg_a}, &out_a) == 0);
    REQUIRE(run_cli({"train", "--config", cfg_b}, &out_b) == 0);
    CHECK(slurp(dir.file("runA") + "/metrics.json") == slurp(dir.file("runB") + "/metrics.json"));
    CHECK(slurp(dir.file("runA") + "/train_log.jsonl") ==
          slurp(dir.file("runB") + "/train_log.jsonl"));
    CHECK(slurp(dir.file("runA") + "/checkpoint.bin") ==
          slurp(dir.file("runB") + "/checkpoint.bin"));

    const auto cfg_c = base_config(dir, data, "runC", "clusters=1\n");
    REQUIRE(run_cli({"train", "--config", cfg_c}) == 0);
    const auto log = slurp(dir.file("runC") + "/train_log.jsonl");
    CHECK(log.find("\"model\":\"lightgcn-equivalent\"") != std::string::npos);
}

TEST_CASE("train: config validation failures exit 1 and name the field") {
    TempDir dir;
    const auto cfg_path = dir.file("bad.cfg");
    std::ofstream(cfg_path) << "data=x\nout_dir=y\nunknown_key=1\n";
    std::string err;
    CHECK(run_cli({"train", "--config", cfg_path}, nullptr, &err) == 1);
    CHECK(err.find("unknown_key") != std::string::npos);

    std::ofstream(cfg_path, std::ios::trunc) << "data=x\nout_dir=y\nlayers=9\n";
    CHECK(run_cli({"train", "--config", cfg_path}, nullptr, &err) == 1);

    std::ofstream(cfg_path, std::ios::trunc) << "data=x\nout_dir=y\ntau=oops\n";
    CHECK(run_cli({"train", "--config", cfg_path}, nullptr, &err) == 1);
}

TEST_CASE("config round-trip reproduces the run") {
    TempDir dir;
    const auto raw = write_planted(dir);
    REQUIRE(run_cli({"prepare", "--input", raw, "--k-core", "1", "--out", dir.file("ds")}) == 0);
    const auto cfg = base_config(dir, dir.file("ds") + "/dataset.bin", "orig");
    REQUIRE(run_cli({"train", "--config", cfg}) == 0);

    // rerun from the echoed config into a new directory
    auto echoed = parse_run_config(dir.file("orig") + "/config_effective.cfg");
    echoed.out_dir = dir.file("rerun");
    write_run_config(echoed, dir.file("rerun.cfg"));
    REQUIRE(run_cli({"train", "--config", dir.file("rerun.cfg")}) == 0);
    CHECK(slurp(dir.file("orig") + "/metrics.json") == slurp(dir.file("rerun") + "/metrics.json"));
    CHECK(slurp(dir.file("orig") + "/checkpoint.bin") ==
          slurp(dir.file("rerun") + "/checkpoint.bin"));
}

TEST_CASE("sweep: single value equals the train result; failures recorded") {
    TempDir dir;
    const auto raw = write_planted(dir);
    REQUIRE(run_cli({"prepare", "--input", raw, "--k-core", "1", "--out", dir.file("ds")}) == 0);
    const auto data = dir.file("ds") + "/dataset.bin";

    const auto cfg_t = base_config(dir, data, "single");
    std::string train_out;
    REQUIRE(run_cli({"train", "--config", cfg_t}, &train_out) == 0);

    const auto cfg_s = base_config(dir, data, "sweepdir");
    std::string sweep_out;
    REQUIRE(run_cli({"sweep", "--config", cfg_s, "--axis", "layers", "--values", "2"},
                    &sweep_out) == 0);
    // the sweep run at layers=2 must match the plain train run (same config)
    std::ifstream metrics(dir.file("single") + "/metrics.json");
    std::string line, recall_text;
    while (std::getline(metrics, line)) {
        if (line.find("recall") != std::string::npos) recall_text = line;
    }
    // pull the numeric value out of the metrics.json line
    const auto colon = recall_text.find(':');
    const double expect = std::stod(recall_text.substr(colon + 1));
    CHECK(sweep_out.find("value,recall,hr,ndcg,best_epoch") != std::string::npos);
    std::istringstream rows(sweep_out);
    std::getline(rows, line);  // header
    std::getline(rows, line);
    CHECK(line.substr(0, 2) == "2,");
    const auto first_comma = line.find(',');
    const auto second_comma = line.find(',', first_comma + 1);
    const double got = std::stod(line.substr(first_comma + 1, second_comma - first_comma - 1));
    CHECK(got == doctest::Approx(expect).epsilon(1e-12));

    // an impossible value fails but the sweep continues
    std::string err;
    const auto cfg_f = base_config(dir, data, "sweepfail");
    REQUIRE(run_cli({"sweep", "--config", cfg_f, "--axis", "clusters", "--values", "2,0"},
                    &sweep_out, &err) == 0);
    CHECK(sweep_out.find("0,,,,") != std::string::npos);
    CHECK(err.find("clusters=0") != std::string::npos);
}

TEST_CASE("sweep: parallel processes produce the sequential results") {
    TempDir dir;
    const auto raw = write_planted(dir);
    REQUIRE(run_cli({"prepare", "--input", raw, "--k-core", "1", "--out", dir.file("ds")}) == 0);
    const auto data = dir.file("ds") + "/dataset.bin";

    const auto cfg_seq = base_config(dir, data, "seq");
    std::string seq_out;
    REQUIRE(run_cli({"sweep", "--config", cfg_seq, "--axis", "layers", "--values", "1,2"},
                    &seq_out) == 0);

    const auto cfg_par = base_config(dir, data, "par");
    std::string par_out;
    REQUIRE(run_cli({"sweep", "--config", cfg_par, "--axis", "layers", "--values", "1,2",
                     "--parallel"},
                    &par_out) == 0);
    CHECK(par_out == seq_out);
}

TEST_CASE("inspect prints rows that sum to one") {
    TempDir dir;
    const auto raw = write_planted(dir);
    REQUIRE(run_cli({"prepare", "--input", raw, "--k-core", "1", "--out", dir.file("ds")}) == 0);
    const auto data = dir.file("ds") + "/dataset.bin";
    const auto cfg = base_config(dir, data, "insp");
    REQUIRE(run_cli({"train", "--config", cfg}) == 0);
    const auto ckpt = dir.file("insp") + "/checkpoint.bin";

    std::string out;
    CHECK(run_cli({"inspect", "--checkpoint", ckpt, "--data", data, "--nodes", "0,1,5"}, &out) ==
          0);
    CHECK(out.find("node 0 (user 0)") != std::string::npos);
    // every printed row: two probabilities and a top cluster
    std::istringstream lines(out);
    std::string line;
    int rows = 0;
    while (std::getline(lines, line)) {
        const auto lb = line.find("p = [");
        REQUIRE(lb != std::string::npos);
        const auto comma = line.find(", ", lb);
        const double p0 = std::stod(line.substr(lb + 5));
        const double p1 = std::stod(line.substr(comma + 2));
        CHECK(std::abs(p0 + p1 - 1.0) <= 0.011);  // printed at 2 decimals
        ++rows;
    }
    CHECK(rows == 3);

    CHECK(run_cli({"inspect", "--checkpoint", ckpt, "--data", data, "--nodes", "9999"}) == 1);
}

TEST_CASE("inspect on the matched-pairs fixture prints 0.2/0.8") {
    TempDir dir;
    // perfect matching graph: u_k - i_k; assignment is driven by E0 alone
    // through identity weights and slope 1 (linear activation).
    InteractionDataset ds;
    ds.n_users = 3;
    ds.n_items = 3;
    ds.train = {{0, 0}, {1, 1}, {2, 2}};
    ds.validation = {};
    ds.test = {{0, 1}, {1, 2}, {2, 0}};
    for (int v = 0; v < 3; ++v) {
        ds.user_vocab.push_back("u" + std::to_string(v));
        ds.item_vocab.push_back("i" + std::to_string(v));
    }
    const auto data = dir.file("fig3.bin");
    save_dataset(ds, data);

    Checkpoint ck;
    ck.n_users = 3;
    ck.n_items = 3;
    ck.prop = {.n_layers = 2, .n_clusters = 2, .start_layer = 2};
    ck.params.E0 = DenseMatrix(6, 2);
    // u2 row: tau * [ln 0.2, ln 0.8]; its matched item row stays zero, so
    // H_{u2} = E0_{u2} and softmax(H/tau) = [0.2, 0.8].
    const Real tau = 0.5;
    ck.params.E0(1, 0) = tau * std::log(0.2);
    ck.params.E0(1, 1) = tau * std::log(0.8);
    ck.params.cluster.W1 = DenseMatrix(2, 2);
    ck.params.cluster.W1(0, 0) = 1.0;
    ck.params.cluster.W1(1, 1) = 1.0;
    ck.params.cluster.b1 = {0.0, 0.0};
    ck.params.cluster.W2 = DenseMatrix(2, 2);
    ck.params.cluster.W2(0, 0) = 1.0;
    ck.params.cluster.W2(1, 1) = 1.0;
    ck.params.cluster.b2 = {0.0, 0.0};
    ck.params.cluster.tau = tau;
    ck.params.cluster.leaky_slope = 1.0;
    ck.adam = AdamState::zeros_like(ck.params);
    const auto ckpt = dir.file("fig3_ck.bin");
    save_checkpoint(ck, ckpt);

    std::string out;
    CHECK(run_cli({"inspect", "--checkpoint", ckpt, "--data", data, "--nodes", "1"}, &out) == 0);
    CHECK(out.find("p = [0.20, 0.80]") != std::string::npos);
    CHECK(out.find("-> cluster 1") != std::string::npos);
}

TEST_CASE("export: embeddings round-trip through the binary cache") {
    TempDir dir;
    const auto raw = write_planted(dir);
    REQUIRE(run_cli({"prepare", "--input", raw, "--k-core", "1", "--out", dir.file("ds")}) == 0);
    const auto data = dir.file("ds") + "/dataset.bin";
    const auto cfg = base_config(dir, data, "exp");
    REQUIRE(run_cli({"train", "--config", cfg}) == 0);
    const auto ckpt = dir.file("exp") + "/checkpoint.bin";

    // CSV row count = N + M
    const auto csv = dir.file("emb.csv");
    REQUIRE(run_cli({"export", "--checkpoint", ckpt, "--data", data, "--what", "embeddings",
                     "--out", csv}) == 0);
    std::ifstream in(csv);
    std::string line;
    int rows = -1;  // header
    while (std::getline(in, line)) ++rows;
    const auto ds = load_dataset(data);
    CHECK(rows == ds.n_nodes());

    // binary round trip reproduces evaluate() metrics
    const auto bin = dir.file("emb.bin");
    REQUIRE(run_cli({"export", "--checkpoint", ckpt, "--data", data, "--what", "embeddings",
                     "--out", bin, "--binary"}) == 0);
    const auto loaded = load_embeddings(bin);
    const auto ck = load_checkpoint(ckpt);
    const auto graph = build_graph(ds);
    const auto direct = forward(graph, ck.params, ck.prop, 0, NoiseMode::Eval);
    const auto m_direct = evaluate(direct.final, ds, EvalSplit::Test, 5);
    const auto m_loaded = evaluate(loaded.embeddings, ds, EvalSplit::Test, 5);
    CHECK(m_direct.recall == m_loaded.recall);
    CHECK(m_direct.ndcg == m_loaded.ndcg);

    // cluster export rows sum to 1
    const auto clusters_csv = dir.file("clusters.csv");
    REQUIRE(run_cli({"export", "--checkpoint", ckpt, "--data", data, "--what", "clusters",
                     "--out", clusters_csv}) == 0);
    std::ifstream cin(clusters_csv);
    std::getline(cin, line);  // header
    while (std::getline(cin, line)) {
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        const auto c3 = line.find(',', c2 + 1);
        const double p0 = std::stod(line.substr(c2 + 1, c3 - c2 - 1));
        const double p1 = std::stod(line.substr(c3 + 1));
        CHECK(std::abs(p0 + p1 - 1.0) <= 1e-6);
    }
}
