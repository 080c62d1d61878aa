#pragma once

#include <map>
#include <string>

#include "clustergcf/training.hpp"

namespace cgcf {

// Flat key=value run configuration ('#' starts a comment). Unknown keys are
// rejected; the effective config (defaults applied) can be echoed back out
// so a run is reproducible from its output directory.
struct RunConfig {
    std::string data;     // dataset cache path (CGCFDS1)
    std::string out_dir;  // outputs: checkpoint, log, metrics, config echo
    std::string label;    // optional run name; defaults from cluster count

    Index dim = 64;
    Index n_clusters = 2;
    Real tau = 0.1;
    Index n_layers = 6;
    Index start_layer = 2;
    Real leaky_slope = 0.2;

    Real learning_rate = 0.001;
    Real lambda = 1e-4;
    Index batch_size = 1024;
    Index max_epochs = 1000;
    Index eval_every = 10;
    Index patience = 5;
    Index eval_k = 20;
    std::uint64_t seed = 42;

    TrainConfig train_config() const;
    PropagationConfig prop_config() const;
    ModelConfig model_config() const;

    // Throws InvalidArgumentError naming the offending field.
    void validate() const;

    std::string effective_label() const;
};

RunConfig parse_run_config(const std::string& path);
RunConfig parse_run_config_text(const std::string& text, const std::string& origin);
void write_run_config(const RunConfig& cfg, const std::string& path);

}  // namespace cgcf
