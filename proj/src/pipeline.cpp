#include "factorspace/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "config_text.hpp"
#include "factorspace/snapshot.hpp"

namespace factorspace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::vector<std::string> parse_stage_list(const std::string& list) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        auto end = list.find(',', start);
        if (end == std::string::npos) end = list.size();
        const auto item = list.substr(start, end - start);
        if (item == "all") {
            out = kStages;
        } else if (!item.empty()) {
            if (std::find(kStages.begin(), kStages.end(), item) == kStages.end())
                throw ConfigError(fmt::format("unknown stage '{}' (expected ingest, train, mds, standardize, evaluate, report or all)", item));
            if (std::find(out.begin(), out.end(), item) == out.end()) out.push_back(item);
        }
        start = end + 1;
    }
    if (out.empty()) throw ConfigError("no stages selected");
    return out;
}

namespace {

constexpr std::uint32_t kVersion = 1;

std::string hex(std::uint64_t h) { return fmt::format("{:016x}", h); }

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

const char* kind_name(ExitCode c) {
    switch (c) {
    case ExitCode::ok: return "ok";
    case ExitCode::config: return "config";
    case ExitCode::data: return "data";
    case ExitCode::numerical: return "numerical";
    }
    return "unknown";
}

// Writes through a temporary file so an interrupted stage never leaves a
// snapshot that looks complete.
void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body, bool binary = false) {
    fs::create_directories(path.parent_path());
    const auto tmp = fs::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, binary ? std::ios::binary : std::ios::out);
        if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
        body(out);
        out.flush();
        if (!out) throw DataError(fmt::format("write failed: {}", path.string()));
    }
    fs::rename(tmp, path);
}

template <class T>
T read_file(const fs::path& path, const std::function<T(std::istream&)>& body) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot read {}", path.string()));
    return body(in);
}

class Run {
public:
    Run(const ExperimentConfig& cfg, const RunOptions& opts, RunSummary& summary)
        : cfg_(cfg), opts_(opts), summary_(summary) {}

    void execute() {
        out_ = summary_.out_dir;
        fs::create_directories(out_);
        fs::remove(out_ / "error.json");
        events_.open(out_ / "events.jsonl", std::ios::app);
        if (!events_) throw DataError(fmt::format("cannot write event log in {}", out_.string()));
        write_file(out_ / "config.txt", [&](std::ostream& o) { o << canonical_config(cfg_); });
        event({{"event", "run_start"}, {"stages", opts_.stages}, {"force", opts_.force}, {"seed", cfg_.seed},
               {"threads", thread_limit()}});

        ingest_hash_ = fnv1a64(config_text::data(cfg_));
        for (const auto& m : cfg_.models) model_hash_[m.id] = fnv1a64(config_text::model(m), ingest_hash_);
        for (const auto& m : cfg_.models)
            space_hash_[m.id] = fnv1a64(config_text::standardize(cfg_), model_hash_[m.id]);
        if (cfg_.mds.enabled) {
            distance_hash_ = fnv1a64(fmt::format("mds.lambda={}\n", format_double(cfg_.mds.lambda)), ingest_hash_);
            for (auto d : cfg_.mds.dims) {
                ExperimentConfig one = cfg_;
                one.mds.dims = {d};
                space_hash_[mds_id(d)] = fnv1a64(config_text::mds(one), distance_hash_);
            }
        }
        std::string all_spaces;
        for (const auto& id : space_ids()) all_spaces += id + "=" + hex(space_hash_[id]) + "\n";
        eval_hash_ = fnv1a64(config_text::evaluate(cfg_) + all_spaces, ingest_hash_);
        report_hash_ = fnv1a64(config_text::render(cfg_), eval_hash_);

        for (const auto& stage : kStages) {
            if (std::find(opts_.stages.begin(), opts_.stages.end(), stage) == opts_.stages.end()) continue;
            stage_ = stage;
            if (stage == "ingest") ingest();
            else if (stage == "train") train_models();
            else if (stage == "mds") mds();
            else if (stage == "standardize") standardize_spaces();
            else if (stage == "evaluate") evaluate();
            else if (stage == "report") report();
        }
        stage_.clear();
        unit_.clear();
        event({{"event", "run_done"}, {"executed", summary_.executed.size()}, {"skipped", summary_.skipped.size()}});
    }

    void fail(ExitCode code, const std::string& message) {
        summary_.code = code;
        summary_.error = message;
        json rec{{"code", static_cast<int>(code)}, {"kind", kind_name(code)}, {"stage", stage_},
                 {"unit", unit_},   {"message", message},                     {"time", utc_now()}};
        try {
            if (!out_.empty()) {
                fs::create_directories(out_);
                write_file(out_ / "error.json", [&](std::ostream& o) { o << rec.dump(2) << '\n'; });
            }
            if (events_.is_open()) event({{"event", "error"}, {"code", static_cast<int>(code)}, {"message", message}});
        } catch (const std::exception&) {
        }
        if (!opts_.quiet) fmt::print(stderr, "error [{}{}]: {}\n", stage_, unit_.empty() ? "" : ":" + unit_, message);
    }

private:
    const ExperimentConfig& cfg_;
    const RunOptions& opts_;
    RunSummary& summary_;
    fs::path out_;
    std::ofstream events_;
    std::string stage_, unit_;
    std::uint64_t ingest_hash_ = 0, distance_hash_ = 0, eval_hash_ = 0, report_hash_ = 0;
    std::map<std::string, std::uint64_t> model_hash_, space_hash_;
    std::optional<RatingDataset> ds_;
    std::optional<LabelSet> labels_;

    static std::string mds_id(std::size_t d) { return fmt::format("MDS-{}", d); }

    std::vector<std::string> space_ids() const {
        std::vector<std::string> ids;
        for (const auto& m : cfg_.models) ids.push_back(m.id);
        if (cfg_.mds.enabled)
            for (auto d : cfg_.mds.dims) ids.push_back(mds_id(d));
        return ids;
    }

    fs::path dataset_path() const { return out_ / "ingest" / "dataset.bin"; }
    fs::path labels_path() const { return out_ / "ingest" / "labels.bin"; }
    fs::path model_path(const std::string& id) const { return out_ / "models" / (id + ".bin"); }
    fs::path space_path(const std::string& id) const { return out_ / "spaces" / (id + ".bin"); }
    fs::path distance_path() const { return out_ / "mds" / "distance.bin"; }
    fs::path evaluation_path() const { return out_ / "report" / "evaluation.bin"; }

    void event(json j) {
        json line{{"time", utc_now()}};
        if (!stage_.empty()) line["stage"] = stage_;
        if (!unit_.empty()) line["unit"] = unit_;
        line.update(j);
        events_ << line.dump() << '\n';
        events_.flush();
    }

    template <class... Args>
    void progress(fmt::format_string<Args...> f, Args&&... args) {
        if (!opts_.quiet) fmt::print(stderr, "[{}] {}\n", stage_, fmt::format(f, std::forward<Args>(args)...));
    }

    void warn(const Warnings& ws) {
        for (const auto& w : ws) {
            event({{"event", "warning"}, {"message", w}});
            progress("warning: {}", w);
        }
    }

    bool current(const fs::path& path, std::string_view magic, std::uint64_t hash) const {
        SnapshotHeader h;
        return peek_snapshot(path.string(), magic, kVersion, h) && h.config_hash == hash;
    }

    // Runs `body` for one stage unit unless all its snapshots are current.
    template <class Body>
    void unit(const std::string& name, bool up_to_date, Body&& body) {
        unit_ = name;
        const auto label = stage_ + ":" + name;
        if (up_to_date && !opts_.force) {
            summary_.skipped.push_back(label);
            event({{"event", "skip"}});
            progress("{} up to date, skipped", name);
        } else {
            event({{"event", "start"}});
            const auto t0 = std::chrono::steady_clock::now();
            json info = body();
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            info["event"] = "done";
            info["seconds"] = secs;
            event(info);
            summary_.executed.push_back(label);
            progress("{} done in {:.2f}s", name, secs);
        }
        unit_.clear();
    }

    void require(const fs::path& path, std::string_view magic, std::uint64_t hash, const char* producer) const {
        if (!current(path, magic, hash))
            throw DataError(fmt::format("{} is missing or was produced by a different configuration; run stage {}",
                                        path.string(), producer));
    }

    const RatingDataset& dataset() {
        if (!ds_) {
            require(dataset_path(), kDatasetMagic, ingest_hash_, "ingest");
            ds_ = read_file<RatingDataset>(dataset_path(), [](std::istream& in) { return read_dataset_binary(in); });
        }
        return *ds_;
    }

    const LabelSet& labels() {
        if (!labels_) {
            require(labels_path(), kLabelsMagic, ingest_hash_, "ingest");
            labels_ = read_file<LabelSet>(labels_path(), [](std::istream& in) { return read_labels_binary(in); });
        }
        return *labels_;
    }

    void ingest() {
        const bool fresh = current(dataset_path(), kDatasetMagic, ingest_hash_) &&
                           current(labels_path(), kLabelsMagic, ingest_hash_);
        unit("dataset", fresh, [&] {
            const auto ratings_file = cfg_.resolve(cfg_.data.ratings);
            const auto labels_file = cfg_.resolve(cfg_.data.labels);
            if (!fs::exists(ratings_file))
                throw ConfigError(fmt::format("data.ratings: file not found: {}", ratings_file.string()));
            if (!fs::exists(labels_file))
                throw ConfigError(fmt::format("data.labels: file not found: {}", labels_file.string()));
            progress("parsing {}", ratings_file.string());
            auto raw = read_file<RatingDataset>(ratings_file, [&](std::istream& in) {
                return parse_ratings(in, cfg_.data.ratings_format, cfg_.data.parse);
            });
            auto ds = filter_min_ratings(raw, cfg_.data.min_ratings_per_item, cfg_.data.min_ratings_per_user);
            if (ds.empty()) throw DataError("no ratings left after filtering");
            Warnings ws;
            LabelOptions lo{cfg_.data.label_cutoff, cfg_.data.unknown_items, cfg_.data.labels_format};
            auto labels = read_file<LabelSet>(labels_file, [&](std::istream& in) { return parse_labels(in, ds, lo, &ws); });
            warn(ws);
            const auto dir = out_ / "ingest";
            write_file(dataset_path(), [&](std::ostream& o) { write_dataset_binary(o, ds, ingest_hash_); }, true);
            write_file(labels_path(), [&](std::ostream& o) { write_labels_binary(o, labels, ingest_hash_); }, true);
            write_file(dir / "id_map.csv", [&](std::ostream& o) { write_id_map(o, ds); });
            write_file(dir / "labels.csv", [&](std::ostream& o) { write_labels_csv(o, labels); });
            write_file(dir / "label_frequencies.csv", [&](std::ostream& o) { write_label_frequencies(o, labels); });
            progress("{} ratings, {} items, {} users, {} labels", ds.size(), ds.items(), ds.users(), labels.labels.size());
            json info{{"raw_ratings", raw.size()}, {"ratings", ds.size()}, {"items", ds.items()},
                      {"users", ds.users()},       {"labels", labels.labels}};
            ds_ = std::move(ds);
            labels_ = std::move(labels);
            return info;
        });
    }

    void train_models() {
        for (const auto& m : cfg_.models) {
            const auto h = model_hash_[m.id];
            unit(m.id, current(model_path(m.id), kModelMagic, h), [&] {
                const auto& ds = dataset();
                progress("{}: training on {} ratings", m.id, ds.size());
                auto res = train(ds, m.kind, m.train, [&](const EpochRecord& e) {
                    if (e.epoch % 25 == 0)
                        progress("{} restart {} epoch {} objective {:.6g}", m.id, e.restart, e.epoch, e.objective);
                });
                warn(res.warnings);
                write_file(model_path(m.id), [&](std::ostream& o) { write_model_binary(o, res.model, h); }, true);
                write_file(out_ / "models" / (m.id + ".log.csv"), [&](std::ostream& o) { write_training_log(o, res.log); });
                json objectives = json::array();
                for (double v : res.restart_objectives) objectives.push_back(std::isfinite(v) ? json(v) : json(nullptr));
                return json{{"best_restart", res.best_restart},
                            {"restart_objectives", objectives},
                            {"sse", sse(ds, res.model)}};
            });
        }
    }

    void mds() {
        if (!cfg_.mds.enabled) return;
        std::optional<DistanceMatrix> dm;
        unit("distance", current(distance_path(), kDistanceMagic, distance_hash_), [&] {
            dm = build_distance_matrix(dataset(), cfg_.mds.lambda);
            write_file(distance_path(), [&](std::ostream& o) { write_distance_binary(o, *dm, distance_hash_); }, true);
            return json{{"items", dm->items()}, {"missing_fraction", dm->missing_fraction()}};
        });
        for (auto d : cfg_.mds.dims) {
            const auto id = mds_id(d);
            const auto h = space_hash_[id];
            unit(id, current(space_path(id), kSpaceMagic, h), [&] {
                if (!dm) {
                    require(distance_path(), kDistanceMagic, distance_hash_, "mds");
                    dm = read_file<DistanceMatrix>(distance_path(), [](std::istream& in) { return read_distance_binary(in); });
                }
                auto res = mds_embed(*dm, d, cfg_.mds.mds);
                warn(res.warnings);
                res.space.nominal_dims = d;
                res.space.item_ids.assign(dataset().item_ids().begin(), dataset().item_ids().end());
                res.space.provenance = fmt::format("MDS d={} lambda={} seed={}", d, format_double(cfg_.mds.lambda), cfg_.mds.mds.seed);
                write_file(space_path(id), [&](std::ostream& o) { write_space_binary(o, res.space, h); }, true);
                write_file(out_ / "spaces" / (id + ".csv"), [&](std::ostream& o) { write_space_csv(o, res.space); });
                write_file(out_ / "mds" / (id + ".stress.csv"), [&](std::ostream& o) {
                    o << "iteration,stress\n";
                    for (std::size_t i = 0; i < res.stress_trace.size(); ++i) o << i << ',' << format_double(res.stress_trace[i]) << '\n';
                });
                return json{{"stress", res.stress}, {"iterations", res.iterations}};
            });
        }
    }

    void standardize_spaces() {
        for (const auto& m : cfg_.models) {
            const auto h = space_hash_[m.id];
            unit(m.id, current(space_path(m.id), kSpaceMagic, h), [&] {
                require(model_path(m.id), kModelMagic, model_hash_[m.id], "train");
                const auto f = read_file<Factorization>(model_path(m.id), [](std::istream& in) { return read_model_binary(in); });
                auto res = factorspace::standardize(f.A, f.B, cfg_.standardize);
                warn(res.warnings);
                res.space.family = family_name(m.kind);
                res.space.nominal_dims = m.train.d;
                res.space.item_ids.assign(dataset().item_ids().begin(), dataset().item_ids().end());
                res.space.provenance = fmt::format("{} d={} lambda={} seed={}", family_name(m.kind), m.train.d,
                                                   format_double(m.train.lambda), m.train.seed);
                write_file(space_path(m.id), [&](std::ostream& o) { write_space_binary(o, res.space, h); }, true);
                write_file(out_ / "spaces" / (m.id + ".csv"), [&](std::ostream& o) { write_space_csv(o, res.space); });
                return json{{"rank", res.space.dims()}, {"column_scales", res.space.column_scales}};
            });
        }
    }

    void evaluate() {
        unit("kappa", current(evaluation_path(), kReportMagic, eval_hash_), [&] {
            std::vector<CoordinateSpace> spaces;
            for (const auto& id : space_ids()) {
                require(space_path(id), kSpaceMagic, space_hash_[id], id.rfind("MDS-", 0) == 0 ? "mds" : "standardize");
                spaces.push_back(read_file<CoordinateSpace>(space_path(id), [](std::istream& in) { return read_space_binary(in); }));
            }
            const auto& ls = labels();
            const auto plan = make_splits(ls.items(), cfg_.splits, cfg_.seed);
            progress("{} spaces x {} classifiers x {} genres x {} splits", spaces.size(), cfg_.classifiers.size(),
                     ls.labels.size(), plan.pairs.size());
            const auto report = run_experiment(spaces, ls, plan, cfg_.classifier_specs(), cfg_.eval);
            warn(report.warnings);
            const auto dir = out_ / "report";
            write_file(dir / "splits.csv", [&](std::ostream& o) { write_splits_csv(o, plan); });
            write_file(dir / "cells.csv", [&](std::ostream& o) { write_cells_csv(o, report); });
            write_file(dir / "means.csv", [&](std::ostream& o) { write_means_csv(o, report); });
            write_file(dir / "genre_means.csv", [&](std::ostream& o) { write_genre_means_csv(o, report); });
            write_file(evaluation_path(), [&](std::ostream& o) { write_report_binary(o, report, eval_hash_); }, true);
            return json{{"cells", report.cells.size()}};
        });
    }

    bool report_current() const {
        const auto dir = out_ / "report";
        std::ifstream in(dir / "metadata.json");
        if (!in || !fs::exists(dir / "tables.txt") || !fs::exists(dir / "tables.tsv")) return false;
        try {
            const auto meta = json::parse(in);
            return meta.at("config_hash").get<std::string>() == hex(report_hash_);
        } catch (const std::exception&) {
            return false;
        }
    }

    void report() {
        unit("tables", report_current(), [&] {
            require(evaluation_path(), kReportMagic, eval_hash_, "evaluate");
            const auto rep = read_file<EvalReport>(evaluation_path(), [](std::istream& in) { return read_report_binary(in); });
            const auto tables = render_tables(rep, cfg_.render);
            const auto dir = out_ / "report";
            write_file(dir / "tables.txt", [&](std::ostream& o) { o << tables.text; });
            write_file(dir / "tables.tsv", [&](std::ostream& o) { o << tables.tsv; });
            json meta{{"config_hash", hex(report_hash_)}, {"evaluation_hash", hex(eval_hash_)},
                      {"created", utc_now()}, {"seed", cfg_.seed}, {"warnings", rep.warnings}};
            write_file(dir / "metadata.json", [&](std::ostream& o) { o << meta.dump(2) << '\n'; });
            if (!opts_.quiet) fmt::print(stderr, "\n{}", tables.text);
            return json{{"tables", (dir / "tables.txt").string()}};
        });
    }
};

}  // namespace

RunSummary run_pipeline(const ExperimentConfig& base, const RunOptions& opts) {
    RunSummary summary;
    ExperimentConfig cfg = base;
    if (opts.seed) cfg.set_seed(*opts.seed);
    summary.out_dir = opts.out ? *opts.out : cfg.resolve(cfg.output);
    if (opts.threads > 0) set_thread_limit(opts.threads);
    Run run(cfg, opts, summary);
    try {
        run.execute();
    } catch (const Error& e) {
        run.fail(e.code(), e.what());
    } catch (const std::exception& e) {
        run.fail(ExitCode::numerical, fmt::format("internal failure: {}", e.what()));
    }
    return summary;
}

}  // namespace factorspace
