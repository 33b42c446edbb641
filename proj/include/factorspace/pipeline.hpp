#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "factorspace/error.hpp"
#include "factorspace/evaluate.hpp"
#include "factorspace/factor.hpp"
#include "factorspace/ingest.hpp"
#include "factorspace/neighbor.hpp"
#include "factorspace/standardize.hpp"

namespace factorspace {

struct DataConfig {
    std::string ratings;  // resolved against ExperimentConfig::base_dir
    std::string labels;
    RatingFormat ratings_format = RatingFormat::movielens;
    LabelFormat labels_format = LabelFormat::movielens;
    ParseOptions parse;
    std::size_t min_ratings_per_item = 20;
    std::size_t min_ratings_per_user = 0;
    double label_cutoff = 0.05;
    UnknownItemPolicy unknown_items = UnknownItemPolicy::skip;
};

struct ModelSpec {
    std::string id;  // "SVD-10"
    ModelKind kind = ModelKind::svd;
    TrainConfig train;
};

struct MdsSpec {
    bool enabled = true;
    double lambda = 20.0;
    std::vector<std::size_t> dims{10, 50, 100};
    MdsConfig mds;
};

struct ExperimentConfig {
    std::filesystem::path base_dir;  // directory of the config file
    std::uint64_t seed = 1;
    std::string output = "out";
    DataConfig data;
    std::vector<ModelSpec> models;
    MdsSpec mds;
    StandardizeOptions standardize;
    std::vector<std::string> classifiers;
    double svm_C = 4.0;
    double svm_gamma = 0.1;
    EvalOptions eval;
    SplitOptions splits;
    RenderOptions render;

    std::filesystem::path resolve(const std::string& path) const;
    std::vector<ClassifierSpec> classifier_specs() const;
    // Applies a master seed to every model and the MDS stage.
    void set_seed(std::uint64_t s);
};

struct Diagnostic {
    std::string field;  // "train.lambda", "classifiers.ids[3]"
    std::string message;
};

struct ConfigLoad {
    ExperimentConfig config;
    std::vector<Diagnostic> diagnostics;  // empty iff valid

    bool ok() const { return diagnostics.empty(); }
};

ConfigLoad parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
ConfigLoad load_config(const std::filesystem::path& path);

// Canonical key=value listing of everything that influences results.
std::string canonical_config(const ExperimentConfig& cfg);

inline const std::vector<std::string> kStages{"ingest", "train", "mds", "standardize", "evaluate", "report"};

struct RunOptions {
    std::vector<std::string> stages = kStages;
    bool force = false;
    int threads = 0;  // 0: OpenMP default
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    bool quiet = false;  // suppress progress on stderr
};

struct RunSummary {
    ExitCode code = ExitCode::ok;
    std::filesystem::path out_dir;
    std::vector<std::string> executed;  // "train:SVD-10"
    std::vector<std::string> skipped;
    std::string error;
};

// Runs the requested stages; never throws for pipeline failures, which are
// reported through the summary, error.json and the event log.
RunSummary run_pipeline(const ExperimentConfig& cfg, const RunOptions& opts = {});

std::vector<std::string> parse_stage_list(const std::string& list);

}  // namespace factorspace
