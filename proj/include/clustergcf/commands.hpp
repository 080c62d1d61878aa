#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "clustergcf/run_config.hpp"

namespace cgcf::cli {

// Full parse + dispatch, in-process testable. args excludes the program
// name. Exit codes: 0 ok, 1 usage/config, 2 data, 3 numeric divergence.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

struct TrainOutputs {
    EvalResult test_metrics;
    Index best_epoch = 0;
    std::string checkpoint_path;
};

// Shared by cmd_train and cmd_sweep: one full training run into
// cfg.out_dir (config echo, JSONL log, checkpoint, metrics.json).
TrainOutputs run_training(const RunConfig& cfg, std::ostream& out);

}  // namespace cgcf::cli
