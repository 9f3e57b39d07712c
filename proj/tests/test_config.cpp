#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hidisc/errors.hpp"
#include "hidisc/run_config.hpp"

using namespace hidisc;

TEST_SUITE("config") {

TEST_CASE("config files parse into validated settings") {
    const std::string path = std::filesystem::temp_directory_path() / "hidisc_test.cfg";
    {
        std::ofstream os(path);
        os << "# comment line\n";
        os << "epochs = 12\n";
        os << "batch_size = 32\n";
        os << "lambda1 = 0.5\n";
        os << "lambda2 = 0.3\n";
        os << "lambda3 = 0.2\n";
        os << "hidden_dims = 64,32\n";
        os << "known_classes = class0,class1\n";
        os << "ablation = euclidean\n";
        os << "seed = 9\n";
    }
    const RunConfig cfg = RunConfig::from_file(path);
    CHECK(cfg.train.epochs == 12);
    CHECK(cfg.train.batch_size == 32);
    CHECK(cfg.train.weights.lambda1 == doctest::Approx(0.5));
    CHECK(cfg.train.hidden_dims == std::vector<int>{64, 32});
    CHECK(cfg.known_classes == std::vector<std::string>{"class0", "class1"});
    CHECK(cfg.train.space == Space::euclidean);
    CHECK(cfg.train.seed == 9);
    cfg.train.validate();
    std::remove(path.c_str());
}

TEST_CASE("unknown keys are rejected") {
    const std::string path = std::filesystem::temp_directory_path() / "hidisc_bad.cfg";
    {
        std::ofstream os(path);
        os << "not_a_key = 1\n";
    }
    CHECK_THROWS_AS(RunConfig::from_file(path), ConfigError);
    std::remove(path.c_str());
}

TEST_CASE("invalid values fail validation before any compute") {
    RunConfig cfg;
    cfg.apply("lambda1", "0.9");
    CHECK_THROWS_AS(cfg.train.validate(), ConfigError);  // weights no longer sum to 1
    RunConfig cfg2;
    cfg2.apply("temperature", "-1");
    CHECK_THROWS_AS(cfg2.train.validate(), ConfigError);
    RunConfig cfg3;
    CHECK_THROWS_AS(cfg3.apply("ablation", "spherical"), ConfigError);
    CHECK_THROWS_AS(cfg3.apply("epochs", "ten"), ConfigError);
}

TEST_CASE("csv splitting") {
    CHECK(split_csv("") == std::vector<std::string>{});
    CHECK(split_csv("a") == std::vector<std::string>{"a"});
    CHECK(split_csv("a,b,c") == std::vector<std::string>{"a", "b", "c"});
}

}  // TEST_SUITE
