#pragma once

#include <map>
#include <string>
#include <vector>

#include "hidisc/training.hpp"

namespace hidisc {

// Flat `key = value` configuration shared by the train/eval commands. CLI
// flags override file values; unknown keys are rejected up front.
struct RunConfig {
    TrainConfig train;
    std::vector<std::string> data_files;
    std::string target_file;
    std::vector<std::string> known_classes;
    int k_max = 20;
    int fixed_k = 0;
    std::string out_dir = ".";

    void apply(const std::string& key, const std::string& value);
    static RunConfig from_file(const std::string& path);

    // Documented key list, used for validation and --help.
    static const std::vector<std::string>& keys();
};

// "a,b,c" -> {"a","b","c"}; empty string -> {}.
std::vector<std::string> split_csv(const std::string& s);

}  // namespace hidisc
