"""Cluster-based graph collaborative filtering.

Thin wrapper around the compiled core. The heavy lifting (sparse kernels,
propagation, gradients, training loop, evaluation) happens in C++; this
package exposes the main operations with numpy in/out.
"""

try:
    from ._clustergcf import (
        Dataset,
        Graph,
        Params,
        build_graph,
        cluster_probs,
        evaluate,
        final_embeddings,
        init_params,
        prepare_dataset,
        run_cli,
        score_all_items,
        train,
    )
except ImportError:  # in-tree build: extension sits next to the package on PYTHONPATH
    from _clustergcf import (
        Dataset,
        Graph,
        Params,
        build_graph,
        cluster_probs,
        evaluate,
        final_embeddings,
        init_params,
        prepare_dataset,
        run_cli,
        score_all_items,
        train,
    )

__all__ = [
    "Dataset",
    "Graph",
    "Params",
    "build_graph",
    "cluster_probs",
    "evaluate",
    "final_embeddings",
    "init_params",
    "prepare_dataset",
    "run_cli",
    "score_all_items",
    "train",
]
