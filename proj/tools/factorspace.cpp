#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "factorspace/pipeline.hpp"
#include "factorspace/synthetic.hpp"

namespace fs = std::filesystem;
using namespace factorspace;

namespace {

void print_diagnostics(std::FILE* f, const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags) fmt::print(f, "{}: {}\n", d.field.empty() ? "(config)" : d.field, d.message);
}

// Config errors found before any stage ran still leave an error record when
// an output directory is known.
void record_config_error(const fs::path& dir, const std::vector<Diagnostic>& diags) {
    if (dir.empty()) return;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) return;
    nlohmann::json rec{{"code", 1}, {"kind", "config"}, {"stage", ""}, {"unit", ""}};
    auto list = nlohmann::json::array();
    for (const auto& d : diags) list.push_back({{"field", d.field}, {"message", d.message}});
    rec["diagnostics"] = list;
    rec["message"] = diags.empty() ? "" : diags.front().field + ": " + diags.front().message;
    std::ofstream(dir / "error.json") << rec.dump(2) << '\n';
}

int cmd_validate(const std::string& path) {
    const auto load = load_config(path);
    if (load.ok()) {
        fmt::print("{}: ok\n", path);
        return 0;
    }
    print_diagnostics(stdout, load.diagnostics);
    return static_cast<int>(ExitCode::config);
}

int cmd_run(const std::string& path, const std::string& stages, bool force, int threads,
            const std::optional<std::uint64_t>& seed, const std::string& out, bool quiet) {
    RunOptions opts;
    opts.force = force;
    opts.threads = threads;
    opts.seed = seed;
    opts.quiet = quiet;
    if (!out.empty()) opts.out = fs::path(out);

    const auto load = load_config(path);
    if (!load.ok()) {
        print_diagnostics(stderr, load.diagnostics);
        record_config_error(opts.out ? *opts.out : fs::path(), load.diagnostics);
        return static_cast<int>(ExitCode::config);
    }
    try {
        opts.stages = parse_stage_list(stages);
    } catch (const Error& e) {
        fmt::print(stderr, "--stages: {}\n", e.what());
        record_config_error(opts.out ? *opts.out : load.config.resolve(load.config.output), {{"--stages", e.what()}});
        return static_cast<int>(ExitCode::config);
    }
    const auto summary = run_pipeline(load.config, opts);
    if (!quiet && summary.code == ExitCode::ok)
        fmt::print(stderr, "done: {} units run, {} skipped, output in {}\n", summary.executed.size(),
                   summary.skipped.size(), summary.out_dir.string());
    return static_cast<int>(summary.code);
}

int cmd_synth(const PlantedOptions& o, const std::string& dir) {
    const auto data = make_planted(o);
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "ratings.csv");
        write_dataset_csv(out, data.ratings);
    }
    {
        std::ofstream out(fs::path(dir) / "labels.csv");
        write_planted_labels(out, data);
    }
    std::ofstream cfg(fs::path(dir) / "experiment.config");
    cfg << "# Planted synthetic data; see labels.csv for the axis labels.\n"
           "seed: 1\n"
           "output: out\n"
           "data:\n"
           "  ratings: ratings.csv\n"
           "  ratings_format: csv\n"
           "  labels: labels.csv\n"
           "  labels_format: csv\n"
           "  min_ratings_per_item: 0\n"
           "  label_cutoff: 0.05\n"
           "train:\n"
           "  max_epochs: 100\n"
           "  restarts: 1\n"
           "models:\n"
           "  - {kind: svd, dims: [2, 5]}\n"
           "  - {kind: delta_svd, dims: [2, 5]}\n"
           "  - {kind: nnmf, dims: [2, 5]}\n"
           "mds:\n"
           "  dims: [2, 5]\n"
           "  max_iterations: 200\n"
           "splits:\n"
           "  pairs: 5\n"
           "report:\n"
           "  genre_dims: [5]\n";
    fmt::print("{} ratings, {} items, {} users written to {}\n", data.ratings.size(), data.ratings.items(),
               data.ratings.users(), dir);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latent factor spaces of rating data and their genre content"};
    app.require_subcommand(1);

    std::string config_path, stages = "all", out;
    bool force = false, quiet = false;
    int threads = 0;
    std::uint64_t seed_value = 0;

    auto* run = app.add_subcommand("run", "Run pipeline stages");
    run->add_option("--config", config_path, "Experiment config file")->required();
    run->add_option("--stages", stages, "Comma-separated stages: ingest,train,mds,standardize,evaluate,report or all");
    run->add_flag("--force", force, "Recompute stages even when their snapshots are current");
    run->add_option("--threads", threads, "Worker thread cap (0: OpenMP default)")->check(CLI::NonNegativeNumber);
    auto* seed_opt = run->add_option("--seed", seed_value, "Override the master seed");
    run->add_option("--out", out, "Output directory (overrides the config)");
    run->add_flag("-q,--quiet", quiet, "No progress output");

    auto* validate = app.add_subcommand("validate", "Check a config file and list every problem");
    std::string validate_path;
    validate->add_option("config,--config", validate_path, "Experiment config file");

    auto* synth = app.add_subcommand("synth", "Write a planted synthetic dataset with a matching config");
    PlantedOptions po;
    std::string synth_dir;
    synth->add_option("--out", synth_dir, "Directory for ratings.csv, labels.csv and experiment.config")->required();
    synth->add_option("--items", po.items);
    synth->add_option("--users", po.users);
    synth->add_option("--dims", po.dims);
    synth->add_option("--density", po.density);
    synth->add_option("--noise", po.noise);
    synth->add_option("--labels", po.planted_labels);
    synth->add_option("--seed", po.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::config);
    }

    try {
        if (*run)
            return cmd_run(config_path, stages, force, threads,
                           seed_opt->count() ? std::optional<std::uint64_t>(seed_value) : std::nullopt, out, quiet);
        if (*validate) {
            if (validate_path.empty()) {
                fmt::print(stderr, "validate: a config path is required\n");
                return static_cast<int>(ExitCode::config);
            }
            return cmd_validate(validate_path);
        }
        if (*synth) return cmd_synth(po, synth_dir);
    } catch (const Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return static_cast<int>(e.code());
    }
    return 0;
}
