#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "factor_kernels.hpp"
#include "factorspace/error.hpp"
#include "factorspace/neighbor.hpp"
#include "factorspace/seeds.hpp"

namespace factorspace {

namespace {

bool connected(const DistanceMatrix& dm) {
    const auto n = dm.items();
    if (n <= 1) return true;
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::size_t components = n;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (!dm.is_missing(i, j)) {
                const auto a = find(i), b = find(j);
                if (a != b) {
                    parent[a] = b;
                    --components;
                }
            }
    return components == 1;
}

double row_distance(const RowMatrix& X, std::size_t i, std::size_t j) {
    return (X.row(static_cast<Eigen::Index>(i)) - X.row(static_cast<Eigen::Index>(j))).norm();
}

}  // namespace

double stress(const DistanceMatrix& dm, const RowMatrix& X, Exec exec) {
    const auto n = dm.items();
    if (static_cast<std::size_t>(X.rows()) != n) throw ConfigError("stress: configuration size mismatch");
    return kernels::chunked_sum(
        n,
        [&](std::size_t i) {
            double s = 0.0;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (dm.is_missing(i, j)) continue;
                const double e = dm.d(i, j) - row_distance(X, i, j);
                s += e * e;
            }
            return s;
        },
        exec);
}

namespace mds_detail {

Matrix weighted_laplacian(const DistanceMatrix& dm) {
    const auto n = static_cast<Eigen::Index>(dm.items());
    Matrix V = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (!dm.is_missing(static_cast<std::size_t>(i), static_cast<std::size_t>(j))) {
                V(i, j) = V(j, i) = -1.0;
                V(i, i) += 1.0;
                V(j, j) += 1.0;
            }
    return V;
}

void guttman_rhs(const DistanceMatrix& dm, const RowMatrix& X, RowMatrix& out, Exec exec) {
    const auto n = dm.items();
    const auto d = X.cols();
    out.setZero(X.rows(), d);
    const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(dynamic, 8) if (par)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        auto row = out.row(ii);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || dm.is_missing(i, j)) continue;
            const double dist = row_distance(X, i, j);
            if (dist <= 0.0) continue;
            row += (dm.d(i, j) / dist) * (X.row(ii) - X.row(static_cast<Eigen::Index>(j)));
        }
    }
}

}  // namespace mds_detail

namespace {

struct Run {
    RowMatrix X;
    double stress = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> trace;
};

Run smacof(const DistanceMatrix& dm, const Eigen::LLT<Matrix>& chol, std::size_t d, const MdsConfig& cfg,
           std::size_t restart, double init_scale) {
    const auto n = static_cast<Eigen::Index>(dm.items());
    Run run;
    std::mt19937_64 rng(derive_seed(cfg.seed, SeedPurpose::mds_init, restart));
    std::normal_distribution<double> normal(0.0, init_scale);
    run.X.resize(n, static_cast<Eigen::Index>(d));
    for (Eigen::Index k = 0; k < run.X.size(); ++k) run.X.data()[k] = normal(rng);
    run.X.rowwise() -= run.X.colwise().mean();

    run.stress = stress(dm, run.X, cfg.exec);
    run.trace.push_back(run.stress);
    RowMatrix rhs, next;
    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
        if (run.stress == 0.0) {
            run.converged = true;
            break;
        }
        mds_detail::guttman_rhs(dm, run.X, rhs, cfg.exec);
        next = chol.solve(Matrix(rhs));
        const double s = stress(dm, next, cfg.exec);
        if (!(s <= run.stress)) {  // majorization guarantees descent; anything else is rounding noise
            run.converged = true;
            break;
        }
        const double improvement = (run.stress - s) / run.stress;
        run.X.swap(next);
        run.stress = s;
        run.trace.push_back(s);
        run.iterations = it + 1;
        if (improvement < cfg.tolerance) {
            run.converged = true;
            break;
        }
    }
    return run;
}

}  // namespace

MdsResult mds_embed(const DistanceMatrix& dm, std::size_t d, const MdsConfig& cfg) {
    if (d == 0) throw ConfigError("mds: d must be at least 1");
    if (cfg.restarts < 1) throw ConfigError("mds: restarts must be >= 1");
    if (!(cfg.tolerance > 0.0)) throw ConfigError("mds: tolerance must be > 0");
    const auto n = dm.items();
    if (n == 0) throw DataError("mds: empty distance matrix");
    if (!connected(dm)) throw DataError("mds: distance structure is disconnected (some items share no defined distance)");

    double mean_distance = 0.0;
    std::size_t defined = 0;
    for (std::size_t k = 0; k < dm.distance.size(); ++k)
        if (!dm.missing[k]) {
            mean_distance += dm.distance[k];
            ++defined;
        }
    mean_distance = defined ? mean_distance / static_cast<double>(defined) : 0.0;
    const double init_scale = cfg.init_scale > 0.0 ? cfg.init_scale : (mean_distance > 0.0 ? mean_distance : 1.0);

    // V + 11^T/n is positive definite for a connected structure; its inverse
    // acts as V^+ on centred right-hand sides.
    Matrix V = mds_detail::weighted_laplacian(dm);
    V.array() += 1.0 / static_cast<double>(n);
    const Eigen::LLT<Matrix> chol(V);
    if (chol.info() != Eigen::Success) throw NumericalError("mds: weighted Laplacian factorization failed");

    MdsResult out;
    Run best;
    std::size_t best_restart = 0;
    for (std::size_t r = 0; r < cfg.restarts; ++r) {
        auto run = smacof(dm, chol, d, cfg, r, init_scale);
        if (!run.converged)
            out.warnings.push_back(fmt::format("mds restart {} did not converge within {} iterations (stress {})", r,
                                               cfg.max_iterations, run.stress));
        if (r == 0 || run.stress < best.stress) {
            best = std::move(run);
            best_restart = r;
        }
    }
    (void)best_restart;

    // Principal axes of the centred configuration.
    RowMatrix X = best.X;
    X.rowwise() -= X.colwise().mean();
    Eigen::JacobiSVD<Matrix> svd(Matrix(X), Eigen::ComputeThinV);
    out.space.coords = X * svd.matrixV();
    const Vector& s = svd.singularValues();
    out.space.column_scales.resize(static_cast<std::size_t>(s.size()));
    for (Eigen::Index k = 0; k < s.size(); ++k) out.space.column_scales[static_cast<std::size_t>(k)] = s[k] * s[k];
    canonicalize_signs(out.space.coords);
    out.space.family = "MDS";
    out.space.nominal_dims = d;
    out.stress = best.stress;
    out.iterations = best.iterations;
    out.stress_trace = std::move(best.trace);
    return out;
}

}  // namespace factorspace
