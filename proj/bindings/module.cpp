#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "clustergcf/commands.hpp"
#include "clustergcf/serialize.hpp"

namespace py = pybind11;
using namespace cgcf;

namespace {

py::array_t<double> to_numpy(const DenseMatrix& m) {
    py::array_t<double> out({m.n_rows, m.n_cols});
    std::copy(m.data.begin(), m.data.end(), out.mutable_data());
    return out;
}

DenseMatrix from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw InvalidArgumentError("expected a 2-d array");
    DenseMatrix m(static_cast<Index>(a.shape(0)), static_cast<Index>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.data.begin());
    return m;
}

py::list pairs_to_list(const std::vector<IdPair>& pairs) {
    py::list out;
    for (const auto& p : pairs) out.append(py::make_tuple(p.user, p.item));
    return out;
}

InputFormat format_from_name(const std::string& name) {
    if (name == "tsv") return InputFormat::TsvTriples;
    if (name == "csv") return InputFormat::CsvTriples;
    throw InvalidArgumentError("format must be 'tsv' or 'csv'");
}

PropagationConfig make_prop(Index layers, Index clusters, Index start_layer) {
    const PropagationConfig cfg{.n_layers = layers, .n_clusters = clusters,
                                .start_layer = start_layer};
    cfg.validate();
    return cfg;
}

py::dict eval_to_dict(const EvalResult& r) {
    py::dict d;
    d["recall"] = r.recall;
    d["hr"] = r.hr;
    d["ndcg"] = r.ndcg;
    d["k"] = r.k;
    d["n_users_evaluated"] = r.n_users_evaluated;
    return d;
}

}  // namespace

PYBIND11_MODULE(_clustergcf, m) {
    m.doc() = "Cluster-based graph collaborative filtering core";

    py::register_exception<InvalidArgumentError>(m, "InvalidArgumentError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);

    py::class_<InteractionDataset>(m, "Dataset")
        .def_readonly("n_users", &InteractionDataset::n_users)
        .def_readonly("n_items", &InteractionDataset::n_items)
        .def_property_readonly("n_nodes", &InteractionDataset::n_nodes)
        .def_property_readonly("train",
                               [](const InteractionDataset& ds) { return pairs_to_list(ds.train); })
        .def_property_readonly(
            "validation",
            [](const InteractionDataset& ds) { return pairs_to_list(ds.validation); })
        .def_property_readonly("test",
                               [](const InteractionDataset& ds) { return pairs_to_list(ds.test); })
        .def("save", &save_dataset, py::arg("path"))
        .def_static("load", &load_dataset, py::arg("path"));

    m.def(
        "prepare_dataset",
        [](const std::string& path, const std::string& format, Index k_core,
           std::uint64_t seed) {
            auto pairs = ingest(path, format_from_name(format));
            pairs = k_core_filter(std::move(pairs), k_core);
            return split(pairs, seed);
        },
        py::arg("path"), py::arg("format") = "tsv", py::arg("k_core") = 5, py::arg("seed") = 42,
        "Ingest a raw interaction log, k-core filter it and split 80/10/20.");

    py::class_<BipartiteGraph>(m, "Graph")
        .def_readonly("n_users", &BipartiteGraph::n_users)
        .def_readonly("n_items", &BipartiteGraph::n_items)
        .def_property_readonly("n_nodes", &BipartiteGraph::n_nodes)
        .def_property_readonly("nnz",
                               [](const BipartiteGraph& g) { return g.laplacian.nnz(); });

    m.def("build_graph", &build_graph, py::arg("dataset"));

    py::class_<ModelParams>(m, "Params")
        .def_property_readonly("embeddings",
                               [](const ModelParams& p) { return to_numpy(p.E0); })
        .def_property_readonly("dim", &ModelParams::dim);

    m.def(
        "init_params",
        [](Index n_nodes, Index dim, Index clusters, std::uint64_t seed, Real tau, Real slope) {
            return init_params(n_nodes, dim, clusters, seed, tau, slope);
        },
        py::arg("n_nodes"), py::arg("dim") = 64, py::arg("clusters") = 2, py::arg("seed") = 42,
        py::arg("tau") = 0.1, py::arg("leaky_slope") = 0.2);

    m.def(
        "final_embeddings",
        [](const BipartiteGraph& graph, const ModelParams& params, Index layers, Index clusters,
           Index start_layer) {
            const ForwardTrace trace =
                forward(graph, params, make_prop(layers, clusters, start_layer), 0,
                        NoiseMode::Eval);
            return to_numpy(trace.final);
        },
        py::arg("graph"), py::arg("params"), py::arg("layers") = 6, py::arg("clusters") = 2,
        py::arg("start_layer") = 2,
        "Noise-free forward pass returning the combined (N+M) x d embeddings.");

    m.def(
        "cluster_probs",
        [](const BipartiteGraph& graph, const ModelParams& params) {
            const DenseMatrix e1 = spmm(graph.laplacian, params.E0);
            ClusterTrace trace;
            const auto assignment =
                assign_clusters(params.E0, e1, params.cluster, 0, NoiseMode::Eval, trace);
            return to_numpy(assignment.probs);
        },
        py::arg("graph"), py::arg("params"),
        "Noise-free soft cluster assignments, one row per node.");

    m.def(
        "train",
        [](const InteractionDataset& ds, const BipartiteGraph& graph, Index dim, Index layers,
           Index clusters, Index start_layer, Real tau, Real leaky_slope, Real lr, Real lambda,
           Index batch_size, Index max_epochs, Index eval_every, Index patience, Index eval_k,
           std::uint64_t seed) {
            TrainConfig cfg;
            cfg.learning_rate = lr;
            cfg.lambda = lambda;
            cfg.batch_size = batch_size;
            cfg.max_epochs = max_epochs;
            cfg.eval_every = eval_every;
            cfg.patience = patience;
            cfg.eval_k = eval_k;
            cfg.seed = seed;
            const ModelConfig mc{.dim = dim, .tau = tau, .leaky_slope = leaky_slope};
            const auto result =
                train(ds, graph, cfg, make_prop(layers, clusters, start_layer), mc);

            py::list epochs;
            for (const auto& e : result.log.epochs) {
                py::dict rec;
                rec["epoch"] = e.epoch;
                rec["mean_loss"] = e.mean_loss;
                rec["lr"] = e.lr;
                epochs.append(rec);
            }
            py::list evals;
            for (const auto& e : result.log.evals) {
                py::dict rec = eval_to_dict(e.metrics);
                rec["epoch"] = e.epoch;
                rec["best_so_far"] = e.best_so_far;
                evals.append(rec);
            }
            py::dict out;
            out["params"] = py::cast(result.params);
            out["epochs"] = epochs;
            out["evals"] = evals;
            out["best_epoch"] = result.log.best_epoch;
            return out;
        },
        py::arg("dataset"), py::arg("graph"), py::arg("dim") = 64, py::arg("layers") = 6,
        py::arg("clusters") = 2, py::arg("start_layer") = 2, py::arg("tau") = 0.1,
        py::arg("leaky_slope") = 0.2, py::arg("lr") = 0.001, py::arg("l2") = 1e-4,
        py::arg("batch_size") = 1024, py::arg("max_epochs") = 1000, py::arg("eval_every") = 10,
        py::arg("patience") = 5, py::arg("eval_k") = 20, py::arg("seed") = 42,
        "BPR training with early stopping; returns the best checkpoint and the log.");

    m.def(
        "evaluate",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& final,
           const InteractionDataset& ds, const std::string& split, Index k) {
            const EvalSplit s = split == "validation" ? EvalSplit::Validation : EvalSplit::Test;
            return eval_to_dict(evaluate(from_numpy(final), ds, s, k));
        },
        py::arg("final"), py::arg("dataset"), py::arg("split") = "test", py::arg("k") = 20,
        "Full-ranking Recall/HR/NDCG at k over the chosen split.");

    m.def(
        "score_all_items",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& final,
           Index n_users, Index user) {
            const auto scores = score_all_items(from_numpy(final), n_users, user);
            py::array_t<double> out(static_cast<py::ssize_t>(scores.size()));
            std::copy(scores.begin(), scores.end(), out.mutable_data());
            return out;
        },
        py::arg("final"), py::arg("n_users"), py::arg("user"));

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = cli::run(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Invoke the command-line surface in-process.");
}
