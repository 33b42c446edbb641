#include "factorspace/factor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "factor_kernels.hpp"
#include "factorspace/error.hpp"
#include "factorspace/snapshot.hpp"
#include "factorspace/seeds.hpp"

namespace factorspace {

ModelKind parse_model_kind(const std::string& name) {
    std::string n = name;
    std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
    if (n == "svd") return ModelKind::svd;
    if (n == "delta_svd" || n == "delta-svd" || n == "dsvd") return ModelKind::delta_svd;
    if (n == "nnmf") return ModelKind::nnmf;
    throw ConfigError(fmt::format("unknown model kind '{}' (expected svd, delta_svd or nnmf)", name));
}

std::string family_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::svd: return "SVD";
        case ModelKind::delta_svd: return "DSVD";
        case ModelKind::nnmf: return "NNMF";
    }
    return "?";
}

Factorization Factorization::zeros(ModelKind kind, std::size_t items, std::size_t users, std::size_t d,
                                   double lambda) {
    Factorization f;
    f.kind = kind;
    f.A = RowMatrix::Zero(static_cast<Eigen::Index>(items), static_cast<Eigen::Index>(d));
    f.B = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(users));
    if (kind == ModelKind::delta_svd) {
        f.item_bias = Vector::Zero(static_cast<Eigen::Index>(items));
        f.user_bias = Vector::Zero(static_cast<Eigen::Index>(users));
    }
    f.lambda = lambda;
    return f;
}

double Gradient::max_abs() const {
    double m = 0.0;
    if (A.size()) m = std::max(m, A.cwiseAbs().maxCoeff());
    if (B.size()) m = std::max(m, B.cwiseAbs().maxCoeff());
    if (item_bias.size()) m = std::max(m, item_bias.cwiseAbs().maxCoeff());
    if (user_bias.size()) m = std::max(m, user_bias.cwiseAbs().maxCoeff());
    return m;
}

void TrainConfig::validate() const {
    if (d == 0) throw ConfigError("d must be at least 1");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
    if (!(tolerance > 0.0)) throw ConfigError("tolerance must be > 0");
    if (restarts < 1) throw ConfigError("restarts must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (!std::isfinite(init_scale)) throw ConfigError("init_scale must be finite");
}

double TrainConfig::effective_init_scale() const {
    return init_scale > 0.0 ? init_scale : 0.1 / std::sqrt(static_cast<double>(d));
}

namespace {

void check_shape(const RatingDataset& ds, const Factorization& f) {
    if (f.items() != ds.items() || f.users() != ds.users() ||
        static_cast<std::size_t>(f.B.rows()) != f.dims())
        throw ConfigError(fmt::format("factorization shape {}x{} (d={}) does not match dataset {}x{}", f.items(),
                                      f.users(), f.dims(), ds.items(), ds.users()));
    if (f.has_biases() && (static_cast<std::size_t>(f.item_bias.size()) != f.items() ||
                           static_cast<std::size_t>(f.user_bias.size()) != f.users()))
        throw ConfigError("delta-SVD bias vectors do not match the dataset");
}

}  // namespace

double predict(const Factorization& f, std::size_t item, std::size_t user) {
    if (item >= f.items() || user >= f.users())
        throw ConfigError(fmt::format("predict: index ({}, {}) out of range", item, user));
    const auto i = static_cast<Eigen::Index>(item);
    const auto u = static_cast<Eigen::Index>(user);
    double p = f.A.row(i).dot(f.B.col(u).transpose());
    if (f.has_biases()) p += f.mu + f.item_bias[i] + f.user_bias[u];
    return p;
}

double sse(const RatingDataset& ds, const Factorization& f, Exec exec) {
    check_shape(ds, f);
    if (exec == Exec::serial) return kernels::reference::sse(ds, f);
    const kernels::FactorTopology topo(ds);
    std::vector<double> e;
    kernels::residuals(topo, f, e, exec);
    return kernels::sum_squares(e, exec);
}

double objective(const RatingDataset& ds, const Factorization& f, Exec exec) {
    check_shape(ds, f);
    if (exec == Exec::serial) return kernels::reference::objective(ds, f);
    const kernels::FactorTopology topo(ds);
    std::vector<double> e;
    kernels::residuals(topo, f, e, exec);
    return kernels::sum_squares(e, exec) + f.lambda * kernels::penalty(topo, f, exec);
}

Gradient gradient(const RatingDataset& ds, const Factorization& f, Exec exec) {
    check_shape(ds, f);
    if (exec == Exec::serial) return kernels::reference::gradient(ds, f);
    const kernels::FactorTopology topo(ds);
    std::vector<double> e;
    kernels::residuals(topo, f, e, exec);
    Gradient g;
    kernels::gradient_items(topo, f, e, g, exec);
    kernels::gradient_users(topo, f, e, g, exec);
    return g;
}

namespace {

Factorization initial_model(const RatingDataset& ds, ModelKind kind, const TrainConfig& cfg, std::uint64_t seed) {
    auto f = Factorization::zeros(kind, ds.items(), ds.users(), cfg.d, cfg.lambda);
    f.bias_penalty = cfg.bias_penalty;
    f.seed = cfg.seed;
    if (kind == ModelKind::delta_svd) f.mu = ds.mean_rating();

    std::mt19937_64 rng(seed);
    const double s = cfg.effective_init_scale();
    if (kind == ModelKind::nnmf) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        auto draw = [&] { return s * (1.0 - unit(rng)); };  // (0, s]
        for (Eigen::Index i = 0; i < f.A.size(); ++i) f.A.data()[i] = draw();
        for (Eigen::Index i = 0; i < f.B.size(); ++i) f.B.data()[i] = draw();
    } else {
        std::normal_distribution<double> normal(0.0, s);
        for (Eigen::Index i = 0; i < f.A.size(); ++i) f.A.data()[i] = normal(rng);
        for (Eigen::Index i = 0; i < f.B.size(); ++i) f.B.data()[i] = normal(rng);
    }
    return f;
}

struct RestartOutcome {
    Factorization model;
    double objective = std::numeric_limits<double>::quiet_NaN();
    bool diverged = false;
    bool hit_epoch_limit = false;
};

constexpr int kMaxConsecutiveHalvings = 60;
// After an accepted epoch the step scale recovers towards learning_rate.
constexpr double kStepGrowth = 1.25;

RestartOutcome run_restart(const kernels::FactorTopology& topo, ModelKind kind, const TrainConfig& cfg,
                           std::size_t restart, std::vector<EpochRecord>& log,
                           const std::function<void(const EpochRecord&)>& on_epoch) {
    const Exec exec = cfg.exec;
    RestartOutcome out;
    out.model = initial_model(topo.ds, kind, cfg, derive_seed(cfg.seed, SeedPurpose::train_init, restart));
    auto& f = out.model;

    std::vector<double> e;
    kernels::residuals(topo, f, e, exec);
    double sse_now = kernels::sum_squares(e, exec);
    double obj = sse_now + f.lambda * kernels::penalty(topo, f, exec);
    if (!std::isfinite(obj)) {
        out.diverged = true;
        return out;
    }

    double scale = cfg.learning_rate;
    std::size_t below = 0;
    Factorization trial;
    std::vector<double> trial_e;
    std::size_t epoch = 0;
    while (epoch < cfg.max_epochs) {
        int halvings = 0;
        bool accepted = false;
        bool nonfinite = false;
        double trial_obj = 0.0, trial_sse = 0.0;
        while (halvings <= kMaxConsecutiveHalvings) {
            trial = f;
            kernels::step_items(topo, trial, e, scale, exec);
            kernels::residuals(topo, trial, trial_e, exec);
            kernels::step_users(topo, trial, trial_e, scale, exec);
            kernels::residuals(topo, trial, trial_e, exec);
            trial_sse = kernels::sum_squares(trial_e, exec);
            trial_obj = trial_sse + trial.lambda * kernels::penalty(topo, trial, exec);
            nonfinite = !std::isfinite(trial_obj);
            if (!nonfinite && trial_obj <= obj) {
                accepted = true;
                break;
            }
            scale *= 0.5;
            ++halvings;
        }
        if (!accepted) {
            if (nonfinite) out.diverged = true;
            break;  // no descent direction left at representable step sizes
        }
        ++epoch;
        const double improvement = obj > 0.0 ? (obj - trial_obj) / obj : 0.0;
        std::swap(f, trial);
        scale = std::min(cfg.learning_rate, scale * kStepGrowth);
        std::swap(e, trial_e);
        obj = trial_obj;
        sse_now = trial_sse;
        EpochRecord rec{restart, epoch, obj, sse_now, scale};
        log.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (obj == 0.0) break;
        below = improvement < cfg.tolerance ? below + 1 : 0;
        if (below >= cfg.patience) break;
    }
    out.hit_epoch_limit = epoch >= cfg.max_epochs;
    if (!out.diverged) out.objective = obj;
    return out;
}

}  // namespace

TrainResult train(const RatingDataset& ds, ModelKind kind, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
    cfg.validate();
    if (ds.empty()) throw DataError("cannot train on an empty dataset");

    const kernels::FactorTopology topo(ds);
    TrainResult result;
    std::optional<RestartOutcome> best;
    for (std::size_t r = 0; r < cfg.restarts; ++r) {
        auto outcome = run_restart(topo, kind, cfg, r, result.log, on_epoch);
        result.restart_objectives.push_back(outcome.objective);
        if (outcome.diverged) {
            result.warnings.push_back(fmt::format("restart {} diverged (objective became non-finite)", r));
            continue;
        }
        if (outcome.hit_epoch_limit)
            result.warnings.push_back(fmt::format("restart {} stopped at max_epochs={}", r, cfg.max_epochs));
        if (!best || outcome.objective < best->objective) {
            result.best_restart = r;
            best = std::move(outcome);
        }
    }
    if (!best) throw NumericalError(fmt::format("all {} restarts diverged", cfg.restarts));
    result.model = std::move(best->model);
    return result;
}

void write_model_binary(std::ostream& out, const Factorization& f, std::uint64_t config_hash) {
    BinaryWriter w(out);
    w.header(kModelMagic, 1, config_hash);
    w.u8(static_cast<std::uint8_t>(f.kind));
    w.u8(static_cast<std::uint8_t>(f.bias_penalty));
    w.u64(f.items());
    w.u64(f.users());
    w.u64(f.dims());
    w.f64(f.lambda);
    w.u64(f.seed);
    w.f64(f.mu);
    w.f64s({f.A.data(), static_cast<std::size_t>(f.A.size())});
    for (Eigen::Index r = 0; r < f.B.rows(); ++r)
        for (Eigen::Index u = 0; u < f.B.cols(); ++u) w.f64(f.B(r, u));
    if (f.has_biases()) {
        w.f64s({f.item_bias.data(), static_cast<std::size_t>(f.item_bias.size())});
        w.f64s({f.user_bias.data(), static_cast<std::size_t>(f.user_bias.size())});
    }
}

Factorization read_model_binary(std::istream& in, std::uint64_t* config_hash) {
    BinaryReader r(in);
    const auto h = r.header(kModelMagic, 1);
    if (config_hash) *config_hash = h.config_hash;
    const auto kind = r.u8();
    const auto bp = r.u8();
    if (kind > 2 || bp > 1) throw DataError("corrupt model snapshot");
    const auto I = r.u64(), U = r.u64(), d = r.u64();
    if (I > (1ULL << 32) || U > (1ULL << 32) || d > (1ULL << 16)) throw DataError("corrupt model snapshot");
    auto f = Factorization::zeros(static_cast<ModelKind>(kind), I, U, d, 0.0);
    f.bias_penalty = static_cast<BiasPenalty>(bp);
    f.lambda = r.f64();
    f.seed = r.u64();
    f.mu = r.f64();
    r.f64s({f.A.data(), static_cast<std::size_t>(f.A.size())});
    for (Eigen::Index row = 0; row < f.B.rows(); ++row)
        for (Eigen::Index u = 0; u < f.B.cols(); ++u) f.B(row, u) = r.f64();
    if (f.has_biases()) {
        r.f64s({f.item_bias.data(), static_cast<std::size_t>(f.item_bias.size())});
        r.f64s({f.user_bias.data(), static_cast<std::size_t>(f.user_bias.size())});
    }
    return f;
}

void write_model_items_csv(std::ostream& out, const Factorization& f, std::span<const ExternalId> item_ids) {
    out << "item_id";
    if (f.has_biases()) out << ",bias";
    for (std::size_t r = 0; r < f.dims(); ++r) out << ",f" << r;
    out << '\n';
    for (Eigen::Index i = 0; i < f.A.rows(); ++i) {
        out << item_ids[static_cast<std::size_t>(i)];
        if (f.has_biases()) out << ',' << format_double(f.item_bias[i]);
        for (Eigen::Index r = 0; r < f.A.cols(); ++r) out << ',' << format_double(f.A(i, r));
        out << '\n';
    }
}

void write_model_users_csv(std::ostream& out, const Factorization& f, std::span<const ExternalId> user_ids) {
    out << "user_id";
    if (f.has_biases()) out << ",bias";
    for (std::size_t r = 0; r < f.dims(); ++r) out << ",f" << r;
    out << '\n';
    for (Eigen::Index u = 0; u < f.B.cols(); ++u) {
        out << user_ids[static_cast<std::size_t>(u)];
        if (f.has_biases()) out << ',' << format_double(f.user_bias[u]);
        for (Eigen::Index r = 0; r < f.B.rows(); ++r) out << ',' << format_double(f.B(r, u));
        out << '\n';
    }
}

void write_training_log(std::ostream& out, const std::vector<EpochRecord>& log) {
    out << "restart,epoch,objective,sse,step_scale\n";
    for (const auto& e : log)
        out << e.restart << ',' << e.epoch << ',' << format_double(e.objective) << ',' << format_double(e.sse) << ','
            << format_double(e.step_scale) << '\n';
}

}  // namespace factorspace
