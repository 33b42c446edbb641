#include "factorspace/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "factorspace/error.hpp"
#include "factorspace/seeds.hpp"

namespace factorspace {

SplitPlan make_splits(std::size_t items, const SplitOptions& opts, std::uint64_t seed) {
    if (opts.pairs == 0) throw ConfigError("splits: at least one pair is required");
    if (!(opts.train_fraction > 0.0 && opts.train_fraction < 1.0))
        throw ConfigError(fmt::format("splits: train fraction {} outside (0, 1)", opts.train_fraction));
    if (!(opts.test_fraction > 0.0 && opts.test_fraction <= 1.0))
        throw ConfigError(fmt::format("splits: test fraction {} outside (0, 1]", opts.test_fraction));

    const auto n_train = static_cast<std::size_t>(std::lround(opts.train_fraction * static_cast<double>(items)));
    const double test_base = opts.test_of_remaining ? static_cast<double>(items - std::min(items, n_train))
                                                    : static_cast<double>(items);
    const auto n_test = static_cast<std::size_t>(std::lround(opts.test_fraction * test_base));
    if (n_train == 0 || n_test == 0 || n_train + n_test > items)
        throw DataError(fmt::format("splits: {} items are too few for train {} / test {}", items, n_train, n_test));

    SplitPlan plan;
    plan.options = opts;
    plan.seed = seed;
    plan.items = items;
    std::vector<std::uint32_t> perm(items);
    for (std::size_t p = 0; p < opts.pairs; ++p) {
        std::iota(perm.begin(), perm.end(), 0u);
        std::mt19937_64 rng(derive_seed(seed, SeedPurpose::splits, p));
        // Fisher-Yates over the first n_train + n_test positions only.
        for (std::size_t i = 0; i < n_train + n_test; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng() % (items - i));
            std::swap(perm[i], perm[j]);
        }
        SplitPair pair;
        pair.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
        pair.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                         perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_test));
        std::sort(pair.train.begin(), pair.train.end());
        std::sort(pair.test.begin(), pair.test.end());
        plan.pairs.push_back(std::move(pair));
    }
    return plan;
}

void write_splits_csv(std::ostream& out, const SplitPlan& plan) {
    out << "split,role,item_index\n";
    for (std::size_t p = 0; p < plan.pairs.size(); ++p) {
        for (auto i : plan.pairs[p].train) out << p << ",train," << i << '\n';
        for (auto i : plan.pairs[p].test) out << p << ",test," << i << '\n';
    }
}

void Outcome::add(bool truth, bool predicted) {
    if (truth) ++(predicted ? tp : fn);
    else ++(predicted ? fp : tn);
}

std::optional<double> kappa(const Outcome& o) {
    const std::uint64_t n = o.total();
    const std::uint64_t maj = std::max(o.tp + o.fn, o.fp + o.tn);
    if (n == 0 || maj == n) return std::nullopt;
    // Same ratio as (acc - acc_maj) / (1 - acc_maj), from exact integer counts.
    const auto correct = static_cast<std::int64_t>(o.tp + o.tn);
    return static_cast<double>(correct - static_cast<std::int64_t>(maj)) / static_cast<double>(n - maj);
}

std::string ClassifierSpec::id() const {
    switch (type) {
    case Type::svm: return kernel.kind == KernelKind::linear ? "SVM-lin" : "SVM-RBF";
    case Type::knn: return fmt::format("{}NN-{}", k, short_name(distance));
    case Type::majority: return "Majority";
    }
    return {};
}

ClassifierSpec ClassifierSpec::parse(const std::string& id, double C, double gamma) {
    ClassifierSpec s;
    s.C = C;
    s.kernel.gamma = gamma;
    if (id == "SVM-lin") {
        s.type = Type::svm;
        s.kernel.kind = KernelKind::linear;
        return s;
    }
    if (id == "SVM-RBF") {
        s.type = Type::svm;
        s.kernel.kind = KernelKind::rbf;
        return s;
    }
    if (id == "Majority") {
        s.type = Type::majority;
        return s;
    }
    const auto pos = id.find("NN-");
    if (pos != std::string::npos && pos > 0 &&
        std::all_of(id.begin(), id.begin() + static_cast<std::ptrdiff_t>(pos), [](char c) { return c >= '0' && c <= '9'; })) {
        s.type = Type::knn;
        s.k = std::stoul(id.substr(0, pos));
        if (s.k == 0 || s.k % 2 == 0) throw ConfigError(fmt::format("classifier {}: k must be odd", id));
        try {
            s.distance = parse_distance_type(id.substr(pos + 3));
        } catch (const ConfigError&) {
            throw ConfigError(fmt::format("unknown classifier id '{}'", id));
        }
        return s;
    }
    throw ConfigError(fmt::format("unknown classifier id '{}'", id));
}

std::vector<ClassifierSpec> default_classifiers(double C, double gamma) {
    std::vector<ClassifierSpec> out;
    out.push_back(ClassifierSpec::parse("SVM-lin", C, gamma));
    out.push_back(ClassifierSpec::parse("SVM-RBF", C, gamma));
    for (auto t : {DistanceType::euclidean, DistanceType::standardized_euclidean,
                   DistanceType::negative_scalar_product, DistanceType::cosine})
        for (std::size_t k : {1, 3, 9}) out.push_back(ClassifierSpec::parse(fmt::format("{}NN-{}", k, short_name(t)), C, gamma));
    return out;
}

std::string SpaceKey::id() const { return fmt::format("{}-{}", family, d); }

const KappaCell& EvalReport::cell(std::size_t s, std::size_t c, std::size_t g, std::size_t p) const {
    return cells.at(((s * classifiers.size() + c) * genres.size() + g) * splits + p);
}

std::optional<double> EvalReport::mean(std::size_t s, std::size_t c) const {
    for (const auto& a : means)
        if (a.space == s && a.classifier == c) return a.cells ? std::optional<double>(a.mean) : std::nullopt;
    return std::nullopt;
}

std::optional<double> EvalReport::genre_mean(std::size_t s, std::size_t c, std::size_t g) const {
    for (const auto& a : genre_means)
        if (a.space == s && a.classifier == c && a.genre == g) return a.cells ? std::optional<double>(a.mean) : std::nullopt;
    return std::nullopt;
}

std::optional<std::size_t> EvalReport::find_space(const std::string& id) const {
    for (std::size_t i = 0; i < spaces.size(); ++i)
        if (spaces[i].id() == id) return i;
    return std::nullopt;
}

std::optional<std::size_t> EvalReport::find_classifier(const std::string& id) const {
    for (std::size_t i = 0; i < classifiers.size(); ++i)
        if (classifiers[i] == id) return i;
    return std::nullopt;
}

void aggregate(EvalReport& r) {
    r.genre_means.clear();
    r.means.clear();
    const std::size_t G = r.genres.size(), P = r.splits;
    for (std::size_t s = 0; s < r.spaces.size(); ++s)
        for (std::size_t c = 0; c < r.classifiers.size(); ++c) {
            double total = 0.0;
            std::size_t total_n = 0;
            for (std::size_t g = 0; g < G; ++g) {
                double sum = 0.0;
                std::size_t n = 0;
                for (std::size_t p = 0; p < P; ++p)
                    if (const auto& k = r.cell(s, c, g, p).kappa) {
                        sum += *k;
                        ++n;
                    }
                r.genre_means.push_back({s, c, g, n ? sum / static_cast<double>(n) : 0.0, n});
                total += sum;
                total_n += n;
            }
            r.means.push_back({s, c, std::nullopt, total_n ? total / static_cast<double>(total_n) : 0.0, total_n});
        }
}

namespace {

RowMatrix gather(const RowMatrix& x, const std::vector<std::uint32_t>& rows) {
    RowMatrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
    return out;
}

// z-score both matrices with the training mean and population sd.
void standardize_features(RowMatrix& train, RowMatrix& test) {
    const double m = static_cast<double>(train.rows());
    for (Eigen::Index j = 0; j < train.cols(); ++j) {
        const double mean = train.col(j).sum() / m;
        const double var = (train.col(j).array() - mean).square().sum() / m;
        const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
        train.col(j) = (train.col(j).array() - mean) / sd;
        test.col(j) = (test.col(j).array() - mean) / sd;
    }
}

struct Task {
    enum class Kind { svm, knn, majority } kind;
    std::size_t space, split;
    std::size_t classifier = 0;           // svm
    std::size_t genre = 0;                // svm
    DistanceType distance{};              // knn
    std::vector<std::size_t> knn_members; // knn: classifier indices sharing the distance
};

struct TaskLog {
    std::size_t single_class_svm = 0;
    std::size_t unconverged_svm = 0;
    Warnings other;
};

}  // namespace

EvalReport run_experiment(const std::vector<CoordinateSpace>& spaces, const LabelSet& labels, const SplitPlan& plan,
                          const std::vector<ClassifierSpec>& classifiers, const EvalOptions& opts) {
    const std::size_t I = labels.items();
    if (classifiers.empty()) throw ConfigError("evaluate: no classifiers");
    if (labels.labels.empty()) throw DataError("evaluate: label set is empty");
    if (plan.items != I)
        throw DataError(fmt::format("evaluate: split plan covers {} items, label set has {}", plan.items, I));
    for (const auto& sp : spaces) {
        if (sp.item_ids != labels.item_ids)
            throw DataError(fmt::format("evaluate: space {} item universe differs from the label set", sp.id()));
        if (!sp.coords.allFinite()) throw NumericalError(fmt::format("evaluate: space {} has non-finite coordinates", sp.id()));
    }

    EvalReport r;
    for (const auto& sp : spaces) r.spaces.push_back({sp.family, sp.nominal_dims});
    for (const auto& c : classifiers) {
        const auto id = c.id();
        if (std::find(r.classifiers.begin(), r.classifiers.end(), id) != r.classifiers.end())
            throw ConfigError(fmt::format("evaluate: classifier {} listed twice", id));
        r.classifiers.push_back(id);
    }
    r.genres = labels.labels;
    r.splits = plan.pairs.size();
    const std::size_t S = spaces.size(), C = classifiers.size(), G = r.genres.size(), P = r.splits;
    r.cells.resize(S * C * G * P);
    auto at = [&](std::size_t s, std::size_t c, std::size_t g, std::size_t p) -> KappaCell& {
        return r.cells[((s * C + c) * G + g) * P + p];
    };
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t g = 0; g < G; ++g)
                for (std::size_t p = 0; p < P; ++p) {
                    auto& cell = at(s, c, g, p);
                    cell.space = s;
                    cell.classifier = c;
                    cell.genre = g;
                    cell.split = p;
                }

    std::vector<std::vector<std::uint8_t>> indicator(G);
    for (std::size_t g = 0; g < G; ++g) indicator[g] = labels.indicator(g);

    std::vector<Task> tasks;
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t p = 0; p < P; ++p) {
            for (std::size_t c = 0; c < C; ++c)
                if (classifiers[c].type == ClassifierSpec::Type::svm)
                    for (std::size_t g = 0; g < G; ++g) tasks.push_back({Task::Kind::svm, s, p, c, g, {}, {}});
            for (auto t : {DistanceType::euclidean, DistanceType::standardized_euclidean,
                           DistanceType::negative_scalar_product, DistanceType::cosine}) {
                Task task{Task::Kind::knn, s, p, 0, 0, t, {}};
                for (std::size_t c = 0; c < C; ++c)
                    if (classifiers[c].type == ClassifierSpec::Type::knn && classifiers[c].distance == t)
                        task.knn_members.push_back(c);
                if (!task.knn_members.empty()) tasks.push_back(std::move(task));
            }
            if (std::any_of(classifiers.begin(), classifiers.end(),
                            [](const auto& c) { return c.type == ClassifierSpec::Type::majority; }))
                tasks.push_back({Task::Kind::majority, s, p, 0, 0, {}, {}});
        }

    std::vector<TaskLog> logs(tasks.size());
    auto run_task = [&](std::size_t ti) {
        const Task& t = tasks[ti];
        const auto& split = plan.pairs[t.split];
        const auto& coords = spaces[t.space].coords;
        TaskLog& log = logs[ti];
        switch (t.kind) {
        case Task::Kind::svm: {
            const auto& spec = classifiers[t.classifier];
            LabeledPoints train{gather(coords, split.train), {}};
            RowMatrix test = gather(coords, split.test);
            if (opts.standardize_svm_features) standardize_features(train.points, test);
            for (auto i : split.train) train.labels.push_back(indicator[t.genre][i]);
            auto res = svm_train(train, spec.kernel, spec.C, opts.svm);
            if (res.model.constant) ++log.single_class_svm;
            if (!res.model.converged) ++log.unconverged_svm;
            auto& cell = at(t.space, t.classifier, t.genre, t.split);
            for (std::size_t q = 0; q < split.test.size(); ++q) {
                const auto row = test.row(static_cast<Eigen::Index>(q));
                cell.outcome.add(indicator[t.genre][split.test[q]] != 0,
                                 svm_predict(res.model, std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
            }
            cell.kappa = kappa(cell.outcome);
            break;
        }
        case Task::Kind::knn: {
            const RowMatrix train = gather(coords, split.train);
            const RowMatrix test = gather(coords, split.test);
            const auto kind = DistanceKind::fitted(t.distance, train, &log.other);
            std::size_t kmax = 0;
            for (auto c : t.knn_members) {
                if (classifiers[c].k > split.train.size())
                    throw ConfigError(fmt::format("classifier {}: k exceeds the {} training items", r.classifiers[c], split.train.size()));
                kmax = std::max(kmax, classifiers[c].k);
            }
            const auto nn = knn_neighbors(train, kind, kmax, test, Exec::serial);
            for (std::size_t g = 0; g < G; ++g) {
                std::vector<std::uint8_t> train_labels(split.train.size());
                for (std::size_t i = 0; i < split.train.size(); ++i) train_labels[i] = indicator[g][split.train[i]];
                for (auto c : t.knn_members) {
                    auto& cell = at(t.space, c, g, t.split);
                    for (std::size_t q = 0; q < split.test.size(); ++q)
                        cell.outcome.add(indicator[g][split.test[q]] != 0, knn_vote(nn[q], train_labels, classifiers[c].k));
                    cell.kappa = kappa(cell.outcome);
                }
            }
            break;
        }
        case Task::Kind::majority: {
            for (std::size_t g = 0; g < G; ++g) {
                std::size_t pos = 0;
                for (auto i : split.train) pos += indicator[g][i];
                const bool guess = 2 * pos > split.train.size();
                for (std::size_t c = 0; c < C; ++c) {
                    if (classifiers[c].type != ClassifierSpec::Type::majority) continue;
                    auto& cell = at(t.space, c, g, t.split);
                    for (auto i : split.test) cell.outcome.add(indicator[g][i] != 0, guess);
                    cell.kappa = kappa(cell.outcome);
                }
            }
            break;
        }
        }
    };

    const auto n_tasks = static_cast<std::ptrdiff_t>(tasks.size());
    if (opts.exec == Exec::parallel) {
        std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
        for (std::ptrdiff_t ti = 0; ti < n_tasks; ++ti) {
            try {
                run_task(static_cast<std::size_t>(ti));
            } catch (...) {
#pragma omp critical(factorspace_eval_error)
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);
    } else {
        for (std::ptrdiff_t ti = 0; ti < n_tasks; ++ti) run_task(static_cast<std::size_t>(ti));
    }

    std::size_t single = 0, unconverged = 0;
    for (auto& log : logs) {
        single += log.single_class_svm;
        unconverged += log.unconverged_svm;
        for (auto& w : log.other)
            if (std::find(r.warnings.begin(), r.warnings.end(), w) == r.warnings.end()) r.warnings.push_back(w);
    }
    if (single) r.warnings.push_back(fmt::format("{} SVM fits saw a single class and predict a constant", single));
    if (unconverged) r.warnings.push_back(fmt::format("{} SVM fits hit the iteration limit", unconverged));
    const auto excluded = static_cast<std::size_t>(
        std::count_if(r.cells.begin(), r.cells.end(), [](const KappaCell& c) { return !c.kappa; }));
    if (excluded)
        r.warnings.push_back(fmt::format("{} of {} cells have a single-class test set and are excluded", excluded, r.cells.size()));
    aggregate(r);
    return r;
}

}  // namespace factorspace
