#include "hidisc/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "hidisc/errors.hpp"
#include "hidisc/io.hpp"

namespace hidisc {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    if (s.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

long parse_long(const std::string& v, const std::string& key) {
    char* end = nullptr;
    const long x = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') {
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
    return x;
}

double parse_real(const std::string& v, const std::string& key) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
    }
    return x;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> k{
        "epochs",        "batch_size",  "lambda1",        "lambda2",
        "lambda3",       "phi",         "clip_radius",    "margin_quantile",
        "temperature",   "alpha_max",   "view_strength",  "view_mask_prob",
        "lr",            "momentum",    "weight_decay",   "curvature_init",
        "hidden_dims",   "embed_dim",   "seed",           "ablation",
        "data_files",    "target_file", "known_classes",  "k_max",
        "fixed_k",       "out_dir"};
    return k;
}

void RunConfig::apply(const std::string& key, const std::string& value) {
    if (key == "epochs") train.epochs = static_cast<int>(parse_long(value, key));
    else if (key == "batch_size") train.batch_size = static_cast<int>(parse_long(value, key));
    else if (key == "lambda1") train.weights.lambda1 = parse_real(value, key);
    else if (key == "lambda2") train.weights.lambda2 = parse_real(value, key);
    else if (key == "lambda3") train.weights.lambda3 = parse_real(value, key);
    else if (key == "phi") train.phi = parse_real(value, key);
    else if (key == "clip_radius") train.clip_radius = parse_real(value, key);
    else if (key == "margin_quantile") train.margin_quantile = parse_real(value, key);
    else if (key == "temperature") train.temperature = parse_real(value, key);
    else if (key == "alpha_max") train.alpha_max = parse_real(value, key);
    else if (key == "view_strength") train.view_strength = parse_real(value, key);
    else if (key == "view_mask_prob") train.view_mask_prob = parse_real(value, key);
    else if (key == "lr") train.lr = parse_real(value, key);
    else if (key == "momentum") train.momentum = parse_real(value, key);
    else if (key == "weight_decay") train.weight_decay = parse_real(value, key);
    else if (key == "curvature_init") train.curvature_init = parse_real(value, key);
    else if (key == "hidden_dims") {
        const auto parts = split_csv(value);
        if (parts.size() != 2) throw ConfigError("config: hidden_dims expects two widths");
        train.hidden_dims = {static_cast<int>(parse_long(trim(parts[0]), key)),
                             static_cast<int>(parse_long(trim(parts[1]), key))};
    } else if (key == "embed_dim") train.embed_dim = static_cast<int>(parse_long(value, key));
    else if (key == "seed") train.seed = static_cast<std::uint64_t>(parse_long(value, key));
    else if (key == "ablation") {
        if (value == "hyperbolic") train.space = Space::hyperbolic;
        else if (value == "euclidean") train.space = Space::euclidean;
        else throw ConfigError("config: ablation must be 'hyperbolic' or 'euclidean'");
    } else if (key == "data_files") data_files = split_csv(value);
    else if (key == "target_file") target_file = value;
    else if (key == "known_classes") known_classes = split_csv(value);
    else if (key == "k_max") k_max = static_cast<int>(parse_long(value, key));
    else if (key == "fixed_k") fixed_k = static_cast<int>(parse_long(value, key));
    else if (key == "out_dir") out_dir = value;
    else throw ConfigError("config: unknown key '" + key + "'");
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    RunConfig cfg;
    std::string line;
    long line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config '" + path + "' line " + std::to_string(line_no) +
                              ": expected 'key = value'");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (std::find(keys().begin(), keys().end(), key) == keys().end()) {
            throw ConfigError("config '" + path + "' line " + std::to_string(line_no) +
                              ": unknown key '" + key + "'");
        }
        cfg.apply(key, value);
    }
    return cfg;
}

}  // namespace hidisc
