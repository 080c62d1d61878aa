#include "clustergcf/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace cgcf {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

Index parse_index(const std::string& key, const std::string& value) {
    Index out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw InvalidArgumentError("config: bad integer for '" + key + "': " + value);
    return out;
}

Real parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const Real out = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        throw InvalidArgumentError("config: bad number for '" + key + "': " + value);
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw InvalidArgumentError("config: bad seed for '" + key + "': " + value);
    return out;
}

}  // namespace

TrainConfig RunConfig::train_config() const {
    TrainConfig c;
    c.learning_rate = learning_rate;
    c.lambda = lambda;
    c.batch_size = batch_size;
    c.max_epochs = max_epochs;
    c.eval_every = eval_every;
    c.patience = patience;
    c.eval_k = eval_k;
    c.seed = seed;
    return c;
}

PropagationConfig RunConfig::prop_config() const {
    return {.n_layers = n_layers, .n_clusters = n_clusters, .start_layer = start_layer};
}

ModelConfig RunConfig::model_config() const {
    return {.dim = dim, .tau = tau, .leaky_slope = leaky_slope};
}

void RunConfig::validate() const {
    if (data.empty()) throw InvalidArgumentError("config: 'data' is required");
    if (out_dir.empty()) throw InvalidArgumentError("config: 'out_dir' is required");
    if (dim < 1) throw InvalidArgumentError("config: 'dim' must be >= 1");
    if (n_clusters < 1) throw InvalidArgumentError("config: 'clusters' must be >= 1");
    if (!(tau > 0.0)) throw InvalidArgumentError("config: 'tau' must be > 0");
    if (n_layers < 1 || n_layers > 8)
        throw InvalidArgumentError("config: 'layers' must be in [1,8]");
    if (start_layer < 1 || start_layer > 3)
        throw InvalidArgumentError("config: 'start_layer' must be in {1,2,3}");
    if (n_clusters > 1 && start_layer > n_layers)
        throw InvalidArgumentError("config: 'start_layer' exceeds 'layers'");
    if (!(learning_rate > 0.0)) throw InvalidArgumentError("config: 'lr' must be > 0");
    if (lambda < 0.0) throw InvalidArgumentError("config: 'lambda' must be >= 0");
    if (batch_size < 1) throw InvalidArgumentError("config: 'batch_size' must be >= 1");
    if (max_epochs < 0) throw InvalidArgumentError("config: 'max_epochs' must be >= 0");
    if (eval_every < 1) throw InvalidArgumentError("config: 'eval_every' must be >= 1");
    if (patience < 1) throw InvalidArgumentError("config: 'patience' must be >= 1");
    if (eval_k < 1) throw InvalidArgumentError("config: 'eval_k' must be >= 1");
}

std::string RunConfig::effective_label() const {
    if (!label.empty()) return label;
    return n_clusters == 1 ? "lightgcn-equivalent" : "clustergcf";
}

RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidArgumentError(origin + ":" + std::to_string(line_no) +
                                       ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "data") cfg.data = value;
        else if (key == "out_dir") cfg.out_dir = value;
        else if (key == "label") cfg.label = value;
        else if (key == "dim") cfg.dim = parse_index(key, value);
        else if (key == "clusters") cfg.n_clusters = parse_index(key, value);
        else if (key == "tau") cfg.tau = parse_real(key, value);
        else if (key == "layers") cfg.n_layers = parse_index(key, value);
        else if (key == "start_layer") cfg.start_layer = parse_index(key, value);
        else if (key == "leaky_slope") cfg.leaky_slope = parse_real(key, value);
        else if (key == "lr") cfg.learning_rate = parse_real(key, value);
        else if (key == "lambda") cfg.lambda = parse_real(key, value);
        else if (key == "batch_size") cfg.batch_size = parse_index(key, value);
        else if (key == "max_epochs") cfg.max_epochs = parse_index(key, value);
        else if (key == "eval_every") cfg.eval_every = parse_index(key, value);
        else if (key == "patience") cfg.patience = parse_index(key, value);
        else if (key == "eval_k") cfg.eval_k = parse_index(key, value);
        else if (key == "seed") cfg.seed = parse_u64(key, value);
        else
            throw InvalidArgumentError(origin + ":" + std::to_string(line_no) +
                                       ": unknown key '" + key + "'");
    }
    return cfg;
}

RunConfig parse_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config_text(buf.str(), path);
}

void write_run_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.precision(17);
    out << "data=" << cfg.data << "\n";
    out << "out_dir=" << cfg.out_dir << "\n";
    if (!cfg.label.empty()) out << "label=" << cfg.label << "\n";
    out << "dim=" << cfg.dim << "\n";
    out << "clusters=" << cfg.n_clusters << "\n";
    out << "tau=" << cfg.tau << "\n";
    out << "layers=" << cfg.n_layers << "\n";
    out << "start_layer=" << cfg.start_layer << "\n";
    out << "leaky_slope=" << cfg.leaky_slope << "\n";
    out << "lr=" << cfg.learning_rate << "\n";
    out << "lambda=" << cfg.lambda << "\n";
    out << "batch_size=" << cfg.batch_size << "\n";
    out << "max_epochs=" << cfg.max_epochs << "\n";
    out << "eval_every=" << cfg.eval_every << "\n";
    out << "patience=" << cfg.patience << "\n";
    out << "eval_k=" << cfg.eval_k << "\n";
    out << "seed=" << cfg.seed << "\n";
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace cgcf
