#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "config_text.hpp"
#include "factorspace/pipeline.hpp"
#include "factorspace/snapshot.hpp"

namespace factorspace {

std::filesystem::path ExperimentConfig::resolve(const std::string& path) const {
    const std::filesystem::path p(path);
    return p.is_absolute() ? p : base_dir / p;
}

std::vector<ClassifierSpec> ExperimentConfig::classifier_specs() const {
    std::vector<ClassifierSpec> out;
    for (const auto& id : classifiers) out.push_back(ClassifierSpec::parse(id, svm_C, svm_gamma));
    return out;
}

void ExperimentConfig::set_seed(std::uint64_t s) {
    seed = s;
    for (auto& m : models) m.train.seed = s;
    mds.mds.seed = s;
}

namespace {

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
    return out;
}

std::string join(const std::vector<std::size_t>& v) {
    std::string out;
    for (auto s : v) out += (out.empty() ? "" : ",") + std::to_string(s);
    return out;
}

const char* name(DuplicatePolicy p) { return p == DuplicatePolicy::error ? "error" : "keep-last"; }
const char* name(UnknownItemPolicy p) { return p == UnknownItemPolicy::skip ? "skip" : "fail"; }
const char* name(BiasPenalty p) { return p == BiasPenalty::squared ? "squared" : "linear"; }
const char* name(LabelFormat f) {
    switch (f) {
    case LabelFormat::csv: return "csv";
    case LabelFormat::movielens: return "movielens";
    case LabelFormat::ml100k: return "ml100k";
    }
    return "";
}

class Reader {
public:
    std::vector<Diagnostic> diags;

    void error(const std::string& field, const std::string& msg) { diags.push_back({field, msg}); }

    // Reports keys of `node` outside `allowed`.
    void keys(const YAML::Node& node, const std::string& path, std::initializer_list<const char*> allowed) {
        if (!node) return;
        if (!node.IsMap()) {
            error(path, "expected a mapping");
            return;
        }
        for (const auto& kv : node) {
            const auto k = kv.first.as<std::string>();
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
                error(sub(path, k), "unknown key");
        }
    }

    static std::string sub(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

    bool scalar(const YAML::Node& map, const char* key, const std::string& path, std::string& out) {
        if (!map || !map.IsMap() || !map[key]) return false;
        const auto n = map[key];
        if (!n.IsScalar()) {
            error(sub(path, key), "expected a scalar");
            return false;
        }
        out = n.Scalar();
        return true;
    }

    void real(const YAML::Node& map, const char* key, const std::string& path, double& out) {
        std::string s;
        if (!scalar(map, key, path, s)) return;
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            if (!std::isfinite(v)) {
                error(sub(path, key), fmt::format("{} must be finite", key));
                return;
            }
            out = v;
        } catch (const std::exception&) {
            error(sub(path, key), fmt::format("expected a number, got '{}'", s));
        }
    }

    template <class Int>
    void count(const YAML::Node& map, const char* key, const std::string& path, Int& out) {
        std::string s;
        if (!scalar(map, key, path, s)) return;
        if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            error(sub(path, key), fmt::format("expected a non-negative integer, got '{}'", s));
            return;
        }
        try {
            out = static_cast<Int>(std::stoull(s));
        } catch (const std::exception&) {
            error(sub(path, key), fmt::format("integer '{}' out of range", s));
        }
    }

    void flag(const YAML::Node& map, const char* key, const std::string& path, bool& out) {
        std::string s;
        if (!scalar(map, key, path, s)) return;
        if (s == "true" || s == "yes" || s == "on") out = true;
        else if (s == "false" || s == "no" || s == "off") out = false;
        else error(sub(path, key), fmt::format("expected true or false, got '{}'", s));
    }

    void dims(const YAML::Node& map, const char* key, const std::string& path, std::vector<std::size_t>& out) {
        if (!map || !map.IsMap() || !map[key]) return;
        const auto n = map[key];
        const auto field = sub(path, key);
        std::vector<std::size_t> v;
        if (n.IsScalar()) {
            std::size_t d = 0;
            count(map, key, path, d);
            v.push_back(d);
        } else if (n.IsSequence()) {
            for (std::size_t i = 0; i < n.size(); ++i) {
                const auto s = n[i].IsScalar() ? n[i].Scalar() : std::string();
                if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
                    error(fmt::format("{}[{}]", field, i), "expected a positive integer");
                    continue;
                }
                v.push_back(std::stoull(s));
            }
        } else {
            error(field, "expected an integer or a list of integers");
            return;
        }
        for (std::size_t i = 0; i < v.size(); ++i)
            if (v[i] == 0) error(fmt::format("{}[{}]", field, i), "dimensionality must be ≥ 1");
        if (v.empty()) error(field, "at least one dimensionality is required");
        out = v;
    }

    void strings(const YAML::Node& map, const char* key, const std::string& path, std::vector<std::string>& out) {
        if (!map || !map.IsMap() || !map[key]) return;
        const auto n = map[key];
        if (!n.IsSequence()) {
            error(sub(path, key), "expected a list");
            return;
        }
        out.clear();
        for (std::size_t i = 0; i < n.size(); ++i) {
            if (!n[i].IsScalar()) error(fmt::format("{}[{}]", sub(path, key), i), "expected a string");
            else out.push_back(n[i].Scalar());
        }
    }

    template <class Parse, class T>
    void choice(const YAML::Node& map, const char* key, const std::string& path, T& out, Parse parse) {
        std::string s;
        if (!scalar(map, key, path, s)) return;
        try {
            out = parse(s);
        } catch (const Error& e) {
            error(sub(path, key), e.what());
        }
    }

    // TrainConfig fields shared by the train section and model overrides.
    void train_fields(const YAML::Node& n, const std::string& path, TrainConfig& t) {
        real(n, "lambda", path, t.lambda);
        real(n, "learning_rate", path, t.learning_rate);
        count(n, "max_epochs", path, t.max_epochs);
        real(n, "tolerance", path, t.tolerance);
        count(n, "patience", path, t.patience);
        count(n, "restarts", path, t.restarts);
        real(n, "init_scale", path, t.init_scale);
        choice(n, "bias_penalty", path, t.bias_penalty, [](const std::string& s) {
            if (s == "squared") return BiasPenalty::squared;
            if (s == "linear") return BiasPenalty::linear;
            throw ConfigError(fmt::format("unknown bias penalty '{}' (expected squared or linear)", s));
        });
    }

    void check_train(const std::string& path, const TrainConfig& t) {
        if (!(t.lambda >= 0.0)) error(sub(path, "lambda"), "lambda must be ≥ 0");
        if (!(t.learning_rate > 0.0)) error(sub(path, "learning_rate"), "learning_rate must be > 0");
        if (t.max_epochs < 1) error(sub(path, "max_epochs"), "max_epochs must be ≥ 1");
        if (!(t.tolerance > 0.0)) error(sub(path, "tolerance"), "tolerance must be > 0");
        if (t.patience < 1) error(sub(path, "patience"), "patience must be ≥ 1");
        if (t.restarts < 1) error(sub(path, "restarts"), "restarts must be ≥ 1");
        if (t.init_scale < 0.0) error(sub(path, "init_scale"), "init_scale must be ≥ 0");
    }
};

ConfigLoad parse_node(const YAML::Node& root, const std::filesystem::path& base_dir) {
    ConfigLoad out;
    ExperimentConfig& c = out.config;
    c.base_dir = base_dir;
    c.classifiers.clear();
    for (const auto& s : default_classifiers()) c.classifiers.push_back(s.id());
    Reader r;

    if (!root || root.IsNull()) {
        r.error("", "configuration is empty");
        out.diagnostics = r.diags;
        return out;
    }
    r.keys(root, "", {"seed", "output", "data", "train", "models", "mds", "standardize", "classifiers", "splits", "report"});
    if (!root.IsMap()) {
        out.diagnostics = r.diags;
        return out;
    }
    r.count(root, "seed", "", c.seed);
    r.scalar(root, "output", "", c.output);

    const auto data = root["data"];
    r.keys(data, "data", {"ratings", "ratings_format", "labels", "labels_format", "scale", "duplicates",
                          "min_ratings_per_item", "min_ratings_per_user", "label_cutoff", "unknown_items"});
    if (!data) r.error("data", "missing section");
    if (!r.scalar(data, "ratings", "data", c.data.ratings) && data) r.error("data.ratings", "required");
    if (!r.scalar(data, "labels", "data", c.data.labels) && data) r.error("data.labels", "required");
    r.choice(data, "ratings_format", "data", c.data.ratings_format, parse_rating_format);
    r.choice(data, "labels_format", "data", c.data.labels_format, parse_label_format);
    if (data && data.IsMap() && data["scale"]) {
        const auto s = data["scale"];
        if (!s.IsSequence() || s.size() != 2) r.error("data.scale", "expected [min, max]");
        else {
            YAML::Node m;
            m["min"] = s[0];
            m["max"] = s[1];
            r.real(m, "min", "data.scale", c.data.parse.scale_min);
            r.real(m, "max", "data.scale", c.data.parse.scale_max);
            if (!(c.data.parse.scale_min < c.data.parse.scale_max)) r.error("data.scale", "scale min must be < max");
        }
    }
    r.choice(data, "duplicates", "data", c.data.parse.duplicates, [](const std::string& s) {
        if (s == "error") return DuplicatePolicy::error;
        if (s == "keep-last" || s == "keep_last") return DuplicatePolicy::keep_last;
        throw ConfigError(fmt::format("unknown duplicate policy '{}' (expected error or keep-last)", s));
    });
    r.choice(data, "unknown_items", "data", c.data.unknown_items, [](const std::string& s) {
        if (s == "skip") return UnknownItemPolicy::skip;
        if (s == "fail") return UnknownItemPolicy::fail;
        throw ConfigError(fmt::format("unknown item policy '{}' (expected skip or fail)", s));
    });
    r.count(data, "min_ratings_per_item", "data", c.data.min_ratings_per_item);
    r.count(data, "min_ratings_per_user", "data", c.data.min_ratings_per_user);
    r.real(data, "label_cutoff", "data", c.data.label_cutoff);
    if (!(c.data.label_cutoff >= 0.0 && c.data.label_cutoff < 1.0))
        r.error("data.label_cutoff", "label_cutoff must be in [0, 1)");

    TrainConfig base;
    const auto train = root["train"];
    r.keys(train, "train", {"lambda", "learning_rate", "max_epochs", "tolerance", "patience", "restarts", "init_scale",
                            "bias_penalty"});
    r.train_fields(train, "train", base);
    r.check_train("train", base);

    const auto models = root["models"];
    if (!models) {
        for (auto kind : {ModelKind::svd, ModelKind::delta_svd, ModelKind::nnmf})
            for (auto d : kPresetDims) {
                ModelSpec m{fmt::format("{}-{}", family_name(kind), d), kind, base};
                m.train.d = d;
                c.models.push_back(m);
            }
    } else if (!models.IsSequence()) {
        r.error("models", "expected a list");
    } else {
        std::set<std::string> ids;
        for (std::size_t i = 0; i < models.size(); ++i) {
            const auto path = fmt::format("models[{}]", i);
            const auto m = models[i];
            r.keys(m, path, {"kind", "dims", "lambda", "learning_rate", "max_epochs", "tolerance", "patience",
                             "restarts", "init_scale", "bias_penalty"});
            ModelKind kind = ModelKind::svd;
            std::string kind_text;
            if (!r.scalar(m, "kind", path, kind_text)) {
                r.error(path + ".kind", "required");
                continue;
            }
            try {
                kind = parse_model_kind(kind_text);
            } catch (const Error& e) {
                r.error(path + ".kind", e.what());
                continue;
            }
            std::vector<std::size_t> dims(std::begin(kPresetDims), std::end(kPresetDims));
            r.dims(m, "dims", path, dims);
            TrainConfig t = base;
            r.train_fields(m, path, t);
            r.check_train(path, t);
            for (auto d : dims) {
                if (d == 0) continue;
                ModelSpec spec{fmt::format("{}-{}", family_name(kind), d), kind, t};
                spec.train.d = d;
                if (!ids.insert(spec.id).second) r.error(path, fmt::format("duplicate model id {}", spec.id));
                c.models.push_back(spec);
            }
        }
    }

    const auto mds = root["mds"];
    r.keys(mds, "mds", {"enabled", "lambda", "dims", "max_iterations", "tolerance", "restarts", "init_scale"});
    r.flag(mds, "enabled", "mds", c.mds.enabled);
    r.real(mds, "lambda", "mds", c.mds.lambda);
    r.dims(mds, "dims", "mds", c.mds.dims);
    r.count(mds, "max_iterations", "mds", c.mds.mds.max_iterations);
    r.real(mds, "tolerance", "mds", c.mds.mds.tolerance);
    r.count(mds, "restarts", "mds", c.mds.mds.restarts);
    r.real(mds, "init_scale", "mds", c.mds.mds.init_scale);
    if (!(c.mds.lambda >= 0.0)) r.error("mds.lambda", "lambda must be ≥ 0");
    if (c.mds.mds.max_iterations < 1) r.error("mds.max_iterations", "max_iterations must be ≥ 1");
    if (!(c.mds.mds.tolerance > 0.0)) r.error("mds.tolerance", "tolerance must be > 0");
    if (c.mds.mds.restarts < 1) r.error("mds.restarts", "restarts must be ≥ 1");
    if (c.mds.mds.init_scale < 0.0) r.error("mds.init_scale", "init_scale must be ≥ 0");

    const auto st = root["standardize"];
    r.keys(st, "standardize", {"rank_tolerance", "degenerate_gap"});
    r.real(st, "rank_tolerance", "standardize", c.standardize.rank_tolerance);
    r.real(st, "degenerate_gap", "standardize", c.standardize.degenerate_gap);
    if (!(c.standardize.rank_tolerance > 0.0)) r.error("standardize.rank_tolerance", "rank_tolerance must be > 0");
    if (!(c.standardize.degenerate_gap >= 0.0)) r.error("standardize.degenerate_gap", "degenerate_gap must be ≥ 0");

    const auto cl = root["classifiers"];
    r.keys(cl, "classifiers", {"ids", "C", "gamma", "standardize_svm_features", "svm_tolerance"});
    r.strings(cl, "ids", "classifiers", c.classifiers);
    r.real(cl, "C", "classifiers", c.svm_C);
    r.real(cl, "gamma", "classifiers", c.svm_gamma);
    r.flag(cl, "standardize_svm_features", "classifiers", c.eval.standardize_svm_features);
    r.real(cl, "svm_tolerance", "classifiers", c.eval.svm.tolerance);
    if (!(c.svm_C > 0.0)) r.error("classifiers.C", "C must be > 0");
    if (!(c.svm_gamma > 0.0)) r.error("classifiers.gamma", "gamma must be > 0");
    if (!(c.eval.svm.tolerance > 0.0)) r.error("classifiers.svm_tolerance", "svm_tolerance must be > 0");
    if (c.classifiers.empty()) r.error("classifiers.ids", "at least one classifier is required");
    {
        std::set<std::string> seen;
        for (std::size_t i = 0; i < c.classifiers.size(); ++i) {
            const auto field = fmt::format("classifiers.ids[{}]", i);
            try {
                const auto id = ClassifierSpec::parse(c.classifiers[i]).id();
                if (id != c.classifiers[i]) r.error(field, fmt::format("classifier id '{}' should be written '{}'", c.classifiers[i], id));
                if (!seen.insert(id).second) r.error(field, fmt::format("duplicate classifier id {}", id));
            } catch (const Error& e) {
                r.error(field, e.what());
            }
        }
    }

    const auto sp = root["splits"];
    r.keys(sp, "splits", {"pairs", "train_fraction", "test_fraction", "test_of_remaining"});
    r.count(sp, "pairs", "splits", c.splits.pairs);
    r.real(sp, "train_fraction", "splits", c.splits.train_fraction);
    r.real(sp, "test_fraction", "splits", c.splits.test_fraction);
    r.flag(sp, "test_of_remaining", "splits", c.splits.test_of_remaining);
    if (c.splits.pairs < 1) r.error("splits.pairs", "pairs must be ≥ 1");
    if (!(c.splits.train_fraction > 0.0 && c.splits.train_fraction < 1.0))
        r.error("splits.train_fraction", "train_fraction must be in (0, 1)");
    if (!(c.splits.test_fraction > 0.0 && c.splits.test_fraction <= 1.0))
        r.error("splits.test_fraction", "test_fraction must be in (0, 1]");
    if (!c.splits.test_of_remaining && c.splits.train_fraction + c.splits.test_fraction > 1.0)
        r.error("splits", "train_fraction + test_fraction must not exceed 1");

    const auto rep = root["report"];
    r.keys(rep, "report", {"bold_threshold", "genre_bold_threshold", "genre_classifiers", "genre_dims"});
    r.real(rep, "bold_threshold", "report", c.render.bold_threshold);
    r.real(rep, "genre_bold_threshold", "report", c.render.genre_bold_threshold);
    r.strings(rep, "genre_classifiers", "report", c.render.genre_classifiers);
    if (rep && rep.IsMap() && rep["genre_dims"]) r.dims(rep, "genre_dims", "report", c.render.genre_dims);
    for (std::size_t i = 0; i < c.render.genre_classifiers.size(); ++i) {
        const auto& id = c.render.genre_classifiers[i];
        if (std::find(c.classifiers.begin(), c.classifiers.end(), id) == c.classifiers.end())
            r.error(fmt::format("report.genre_classifiers[{}]", i), fmt::format("classifier '{}' is not in classifiers.ids", id));
    }

    if (c.models.empty() && !c.mds.enabled) r.error("models", "no models and MDS disabled: nothing to evaluate");
    c.set_seed(c.seed);
    out.diagnostics = r.diags;
    return out;
}

}  // namespace

ConfigLoad parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        ConfigLoad out;
        out.config.base_dir = base_dir;
        out.diagnostics.push_back({fmt::format("line {}", e.mark.line + 1), e.msg});
        return out;
    }
    return parse_node(root, base_dir);
}

ConfigLoad load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        ConfigLoad out;
        out.diagnostics.push_back({path.string(), "cannot open config file"});
        return out;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    auto dir = path.parent_path();
    if (dir.empty()) dir = ".";
    return parse_config(ss.str(), dir);
}

namespace config_text {

std::string data(const ExperimentConfig& c) {
    const auto& d = c.data;
    return fmt::format(
        "data.ratings={}\ndata.ratings_format={}\ndata.labels={}\ndata.labels_format={}\ndata.scale={},{}\n"
        "data.duplicates={}\ndata.min_ratings_per_item={}\ndata.min_ratings_per_user={}\ndata.label_cutoff={}\n"
        "data.unknown_items={}\n",
        d.ratings, to_string(d.ratings_format), d.labels, name(d.labels_format), format_double(d.parse.scale_min),
        format_double(d.parse.scale_max), name(d.parse.duplicates), d.min_ratings_per_item, d.min_ratings_per_user,
        format_double(d.label_cutoff), name(d.unknown_items));
}

std::string model(const ModelSpec& m) {
    const auto& t = m.train;
    return fmt::format(
        "model.id={}\nmodel.d={}\nmodel.lambda={}\nmodel.learning_rate={}\nmodel.max_epochs={}\nmodel.tolerance={}\n"
        "model.patience={}\nmodel.restarts={}\nmodel.seed={}\nmodel.init_scale={}\nmodel.bias_penalty={}\n",
        m.id, t.d, format_double(t.lambda), format_double(t.learning_rate), t.max_epochs, format_double(t.tolerance),
        t.patience, t.restarts, t.seed, format_double(t.init_scale), name(t.bias_penalty));
}

std::string mds(const ExperimentConfig& c) {
    const auto& m = c.mds;
    return fmt::format("mds.enabled={}\nmds.lambda={}\nmds.dims={}\nmds.max_iterations={}\nmds.tolerance={}\n"
                       "mds.restarts={}\nmds.seed={}\nmds.init_scale={}\n",
                       m.enabled, format_double(m.lambda), join(m.dims), m.mds.max_iterations,
                       format_double(m.mds.tolerance), m.mds.restarts, m.mds.seed, format_double(m.mds.init_scale));
}

std::string standardize(const ExperimentConfig& c) {
    return fmt::format("standardize.rank_tolerance={}\nstandardize.degenerate_gap={}\n",
                       format_double(c.standardize.rank_tolerance), format_double(c.standardize.degenerate_gap));
}

std::string evaluate(const ExperimentConfig& c) {
    return fmt::format(
        "seed={}\nclassifiers.ids={}\nclassifiers.C={}\nclassifiers.gamma={}\nclassifiers.standardize_svm_features={}\n"
        "classifiers.svm_tolerance={}\nsplits.pairs={}\nsplits.train_fraction={}\nsplits.test_fraction={}\n"
        "splits.test_of_remaining={}\n",
        c.seed, join(c.classifiers), format_double(c.svm_C), format_double(c.svm_gamma),
        c.eval.standardize_svm_features, format_double(c.eval.svm.tolerance), c.splits.pairs,
        format_double(c.splits.train_fraction), format_double(c.splits.test_fraction), c.splits.test_of_remaining);
}

std::string render(const ExperimentConfig& c) {
    return fmt::format("report.bold_threshold={}\nreport.genre_bold_threshold={}\nreport.genre_classifiers={}\n"
                       "report.genre_dims={}\n",
                       format_double(c.render.bold_threshold), format_double(c.render.genre_bold_threshold),
                       join(c.render.genre_classifiers), join(c.render.genre_dims));
}

}  // namespace config_text

std::string canonical_config(const ExperimentConfig& cfg) {
    std::string out = fmt::format("seed={}\noutput={}\n", cfg.seed, cfg.output);
    out += config_text::data(cfg);
    for (const auto& m : cfg.models) out += config_text::model(m);
    out += config_text::mds(cfg);
    out += config_text::standardize(cfg);
    out += config_text::evaluate(cfg);
    out += config_text::render(cfg);
    return out;
}

}  // namespace factorspace
