#include "clustergcf/commands.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "clustergcf/parallel.hpp"
#include "clustergcf/serialize.hpp"

namespace cgcf::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string pct(Real x) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << (100.0 * x);
    return os.str();
}

InputFormat parse_format(const std::string& name) {
    if (name == "tsv" || name == "tsv_triples") return InputFormat::TsvTriples;
    if (name == "csv" || name == "csv_triples") return InputFormat::CsvTriples;
    throw InvalidArgumentError("unknown input format: " + name);
}

void cmd_prepare(const std::string& input, const std::string& format, Index k_core,
                 std::uint64_t seed, const std::string& out_dir, std::ostream& out) {
    auto pairs = ingest(input, parse_format(format));
    if (pairs.empty()) throw DataError("no interactions in " + input);
    pairs = k_core_filter(std::move(pairs), k_core);
    const InteractionDataset ds = split(pairs, seed);

    fs::create_directories(out_dir);
    const std::string cache = (fs::path(out_dir) / "dataset.bin").string();
    save_dataset(ds, cache);

    const auto n_pairs = static_cast<Real>(pairs.size());
    const Real sparsity =
        1.0 - n_pairs / (static_cast<Real>(ds.n_users) * static_cast<Real>(ds.n_items));
    out << "users: " << ds.n_users << "\n";
    out << "items: " << ds.n_items << "\n";
    out << "interactions: " << pairs.size() << "\n";
    out << "sparsity: " << pct(sparsity) << "%\n";
    out << "train/validation/test: " << ds.train.size() << "/" << ds.validation.size() << "/"
        << ds.test.size() << "\n";
    out << "cache: " << cache << "\n";
}

void append_jsonl(std::ofstream& log, const ordered_json& record) {
    log << record.dump() << "\n";
    log.flush();
}

}  // namespace

TrainOutputs run_training(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    const InteractionDataset ds = load_dataset(cfg.data);
    const BipartiteGraph graph = build_graph(ds);

    fs::create_directories(cfg.out_dir);
    write_run_config(cfg, (fs::path(cfg.out_dir) / "config_effective.cfg").string());

    std::ofstream log((fs::path(cfg.out_dir) / "train_log.jsonl").string(), std::ios::trunc);
    if (!log) throw IoError("cannot open training log in " + cfg.out_dir);
    append_jsonl(log, ordered_json{{"event", "run_start"},
                                   {"model", cfg.effective_label()},
                                   {"seed", cfg.seed},
                                   {"layers", cfg.n_layers},
                                   {"clusters", cfg.n_clusters},
                                   {"start_layer", cfg.start_layer},
                                   {"tau", cfg.tau}});

    std::size_t epochs_written = 0;
    std::size_t evals_written = 0;
    const auto progress = [&](const TrainLog& tl) {
        while (epochs_written < tl.epochs.size()) {
            const auto& e = tl.epochs[epochs_written++];
            append_jsonl(log, ordered_json{{"epoch", e.epoch},
                                           {"mean_loss", e.mean_loss},
                                           {"lr", e.lr}});
        }
        while (evals_written < tl.evals.size()) {
            const auto& e = tl.evals[evals_written++];
            append_jsonl(log, ordered_json{{"epoch", e.epoch},
                                           {"recall", e.metrics.recall},
                                           {"hr", e.metrics.hr},
                                           {"ndcg", e.metrics.ndcg},
                                           {"best_so_far", e.best_so_far}});
        }
    };

    TrainResult result =
        train(ds, graph, cfg.train_config(), cfg.prop_config(), cfg.model_config(), progress);

    TrainOutputs outputs;
    outputs.best_epoch = result.log.best_epoch;
    outputs.checkpoint_path = (fs::path(cfg.out_dir) / "checkpoint.bin").string();
    Checkpoint ck;
    ck.params = result.params;
    ck.adam = result.adam;
    ck.prop = cfg.prop_config();
    ck.n_users = ds.n_users;
    ck.n_items = ds.n_items;
    ck.seed = cfg.seed;
    ck.next_epoch = result.epochs_run + 1;
    save_checkpoint(ck, outputs.checkpoint_path);

    const ForwardTrace eval_trace =
        forward(graph, result.params, cfg.prop_config(), 0, NoiseMode::Eval);
    outputs.test_metrics = evaluate(eval_trace.final, ds, EvalSplit::Test, cfg.eval_k);

    const ordered_json metrics{{"split", "test"},
                               {"k", outputs.test_metrics.k},
                               {"recall", outputs.test_metrics.recall},
                               {"hr", outputs.test_metrics.hr},
                               {"ndcg", outputs.test_metrics.ndcg},
                               {"n_users_evaluated", outputs.test_metrics.n_users_evaluated},
                               {"best_epoch", outputs.best_epoch}};
    std::ofstream mf((fs::path(cfg.out_dir) / "metrics.json").string(), std::ios::trunc);
    mf << metrics.dump(2) << "\n";

    out << "run: " << cfg.effective_label() << "\n";
    out << "best validation epoch: " << outputs.best_epoch << "\n";
    out << "test Recall@" << cfg.eval_k << ": " << pct(outputs.test_metrics.recall)
        << "  HR@" << cfg.eval_k << ": " << pct(outputs.test_metrics.hr) << "  NDCG@"
        << cfg.eval_k << ": " << pct(outputs.test_metrics.ndcg) << "\n";
    return outputs;
}

namespace {

std::vector<std::string> default_sweep_values(const std::string& axis) {
    if (axis == "layers") return {"1", "2", "3", "4", "5", "6", "7", "8"};
    if (axis == "clusters") return {"2", "3", "4"};
    if (axis == "tau") return {"1e-2", "1e-1", "1", "1e1", "1e2"};
    throw InvalidArgumentError("unknown sweep axis: " + axis);
}

void apply_axis(RunConfig& cfg, const std::string& axis, const std::string& value) {
    if (axis == "layers") cfg.n_layers = static_cast<Index>(std::stoll(value));
    else if (axis == "clusters") cfg.n_clusters = static_cast<Index>(std::stoll(value));
    else if (axis == "tau") cfg.tau = std::stod(value);
    else throw InvalidArgumentError("unknown sweep axis: " + axis);
}

// Each value trains in its own forked process; results come back through the
// per-run metrics.json.
void sweep_parallel(const RunConfig& base, const std::string& axis,
                    const std::vector<std::string>& values, std::ofstream& csv,
                    std::ostream& err) {
    struct Child {
        pid_t pid;
        std::string value;
        std::string out_dir;
    };
    std::vector<Child> children;
    for (const auto& value : values) {
        RunConfig cfg = base;
        try {
            apply_axis(cfg, axis, value);
        } catch (const std::exception& e) {
            err << "sweep " << axis << "=" << value << " failed: " << e.what() << "\n";
            csv << value << ",,,,\n";
            continue;
        }
        cfg.out_dir = (fs::path(base.out_dir) / ("sweep_" + axis + "_" + value)).string();
        fs::create_directories(cfg.out_dir);
        const std::string cfg_path = (fs::path(cfg.out_dir) / "run.cfg").string();
        write_run_config(cfg, cfg_path);

        const pid_t pid = fork();
        if (pid < 0) throw IoError("fork failed");
        if (pid == 0) {
            // Forked workers run single-threaded: the parallelism comes from
            // the processes, and libgomp is not fork-safe once the parent
            // has spawned a team.
            set_thread_count(1);
            std::ofstream child_out((fs::path(cfg.out_dir) / "run.log").string());
            int code = 3;
            try {
                run_training(parse_run_config(cfg_path), child_out);
                code = 0;
            } catch (const std::exception& e) {
                child_out << "failed: " << e.what() << "\n";
            }
            std::_Exit(code);
        }
        children.push_back({pid, value, cfg.out_dir});
    }

    for (const auto& child : children) {
        int status = 0;
        waitpid(child.pid, &status, 0);
        const fs::path metrics_path = fs::path(child.out_dir) / "metrics.json";
        if (WIFEXITED(status) && WEXITSTATUS(status) == 0 && fs::exists(metrics_path)) {
            std::ifstream mf(metrics_path);
            const auto metrics = nlohmann::json::parse(mf);
            csv << child.value << ',' << metrics["recall"].get<double>() << ','
                << metrics["hr"].get<double>() << ',' << metrics["ndcg"].get<double>() << ','
                << metrics["best_epoch"].get<Index>() << "\n";
        } else {
            err << "sweep " << axis << "=" << child.value << " failed (see " << child.out_dir
                << "/run.log)\n";
            csv << child.value << ",,,,\n";
        }
    }
}

void cmd_sweep(const std::string& config_path, const std::string& axis,
               std::vector<std::string> values, bool parallel, std::ostream& out,
               std::ostream& err) {
    const RunConfig base = parse_run_config(config_path);
    if (values.empty()) values = default_sweep_values(axis);

    fs::create_directories(base.out_dir);
    const std::string csv_path =
        (fs::path(base.out_dir) / ("sweep_" + axis + ".csv")).string();
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw IoError("cannot open " + csv_path);
    csv << "value,recall,hr,ndcg,best_epoch\n";
    csv.precision(17);

    if (parallel) {
        sweep_parallel(base, axis, values, csv, err);
    } else {
        std::ostringstream quiet;
        for (const auto& value : values) {
            RunConfig cfg = base;
            try {
                apply_axis(cfg, axis, value);
                cfg.out_dir =
                    (fs::path(base.out_dir) / ("sweep_" + axis + "_" + value)).string();
                const TrainOutputs res = run_training(cfg, quiet);
                csv << value << ',' << res.test_metrics.recall << ',' << res.test_metrics.hr
                    << ',' << res.test_metrics.ndcg << ',' << res.best_epoch << "\n";
                csv.flush();
            } catch (const std::exception& e) {
                err << "sweep " << axis << "=" << value << " failed: " << e.what() << "\n";
                csv << value << ",,,,\n";
                csv.flush();
            }
        }
    }
    csv.close();
    std::ifstream echo(csv_path);
    out << echo.rdbuf();
}

// Recomputes the noise-free assignment from a checkpoint + dataset cache.
ClusterAssignment assignment_from_checkpoint(const Checkpoint& ck, const InteractionDataset& ds,
                                             ClusterTrace& trace) {
    const BipartiteGraph graph = build_graph(ds);
    const DenseMatrix e1 = spmm(graph.laplacian, ck.params.E0);
    return assign_clusters(ck.params.E0, e1, ck.params.cluster, 0, NoiseMode::Eval, trace);
}

void cmd_inspect(const std::string& checkpoint_path, const std::string& data_path,
                 const std::vector<Index>& nodes, std::ostream& out) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const InteractionDataset ds = load_dataset(data_path);
    if (ck.n_users != ds.n_users || ck.n_items != ds.n_items)
        throw DataError("checkpoint and dataset dimensions disagree");

    ClusterTrace trace;
    const ClusterAssignment assignment = assignment_from_checkpoint(ck, ds, trace);
    const Index n = ds.n_nodes();
    out << std::fixed << std::setprecision(2);
    for (const Index node : nodes) {
        if (node < 0 || node >= n)
            throw InvalidArgumentError("unknown node id: " + std::to_string(node));
        const bool is_user = node < ds.n_users;
        out << "node " << node << " (" << (is_user ? "user " : "item ")
            << (is_user ? node : node - ds.n_users) << "): p = [";
        Index top = 0;
        for (Index c = 0; c < assignment.probs.n_cols; ++c) {
            if (c > 0) out << ", ";
            out << assignment.probs(node, c);
            if (assignment.probs(node, c) > assignment.probs(node, top)) top = c;
        }
        out << "] -> cluster " << top << "\n";
    }
}

void cmd_export(const std::string& checkpoint_path, const std::string& data_path,
                const std::string& what, const std::string& out_path, bool binary, bool fp32,
                std::ostream& out) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const InteractionDataset ds = load_dataset(data_path);
    if (ck.n_users != ds.n_users || ck.n_items != ds.n_items)
        throw DataError("checkpoint and dataset dimensions disagree");

    if (what == "embeddings") {
        const BipartiteGraph graph = build_graph(ds);
        const ForwardTrace trace = forward(graph, ck.params, ck.prop, 0, NoiseMode::Eval);
        if (binary)
            save_embeddings(trace.final, ds.n_users, out_path, fp32);
        else
            write_embeddings_csv(trace.final, ds.n_users, out_path);
    } else if (what == "clusters") {
        ClusterTrace trace;
        const ClusterAssignment assignment = assignment_from_checkpoint(ck, ds, trace);
        write_clusters_csv(assignment.probs, ds.n_users, out_path);
    } else {
        throw InvalidArgumentError("unknown export target: " + what);
    }
    out << "wrote " << out_path << "\n";
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"ClusterGCF: cluster-based graph collaborative filtering"};
    app.require_subcommand(1);

    std::string input, format = "tsv", out_dir, config_path, axis, checkpoint, data, what,
                out_path;
    std::vector<std::string> sweep_values;
    std::vector<Index> nodes;
    Index k_core = 5;
    std::uint64_t seed = 42;
    bool binary = false, fp32 = false, parallel = false;

    auto* prepare = app.add_subcommand("prepare", "ingest, filter and split a raw log");
    prepare->add_option("--input", input, "raw interaction file")->required();
    prepare->add_option("--format", format, "tsv or csv");
    prepare->add_option("--k-core", k_core, "minimum interactions per user/item");
    prepare->add_option("--seed", seed, "split seed");
    prepare->add_option("--out", out_dir, "output directory")->required();

    auto* train_cmd = app.add_subcommand("train", "train a model from a config file");
    train_cmd->add_option("--config", config_path, "key=value config file")->required();

    auto* sweep = app.add_subcommand("sweep", "one training run per axis value");
    sweep->add_option("--config", config_path, "base config file")->required();
    sweep->add_option("--axis", axis, "layers, clusters or tau")->required();
    sweep->add_option("--values", sweep_values, "axis values (defaults per axis)")
        ->delimiter(',');
    sweep->add_flag("--parallel", parallel, "run values as independent processes");

    auto* inspect = app.add_subcommand("inspect", "print soft cluster assignments");
    inspect->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    inspect->add_option("--data", data, "dataset cache")->required();
    inspect->add_option("--nodes", nodes, "global node ids")->required()->delimiter(',');

    auto* export_cmd = app.add_subcommand("export", "write embeddings or cluster probabilities");
    export_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    export_cmd->add_option("--data", data, "dataset cache")->required();
    export_cmd->add_option("--what", what, "embeddings or clusters")->required();
    export_cmd->add_option("--out", out_path, "output file")->required();
    export_cmd->add_flag("--binary", binary, "write the binary embedding cache");
    export_cmd->add_flag("--fp32", fp32, "store 32-bit values in the binary cache");

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return 1;
    }

    try {
        if (prepare->parsed()) {
            cmd_prepare(input, format, k_core, seed, out_dir, out);
        } else if (train_cmd->parsed()) {
            run_training(parse_run_config(config_path), out);
        } else if (sweep->parsed()) {
            cmd_sweep(config_path, axis, sweep_values, parallel, out, err);
        } else if (inspect->parsed()) {
            cmd_inspect(checkpoint, data, nodes, out);
        } else if (export_cmd->parsed()) {
            cmd_export(checkpoint, data, what, out_path, binary, fp32, out);
        }
    } catch (const InvalidArgumentError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        err << "numeric divergence: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace cgcf::cli
