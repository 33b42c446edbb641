#include "factor_kernels.hpp"

#include <algorithm>
#include <cmath>

namespace factorspace::kernels {

FactorTopology::FactorTopology(const RatingDataset& data)
    : ds(data), by_user(RatingIndex::by_user(data)), item_count(data.items(), 0.0), user_count(data.users(), 0.0) {
    item_offsets.assign(ds.items() + 1, 0);
    for (const auto& r : ds.ratings()) ++item_offsets[r.item + 1];
    for (std::size_t i = 0; i < ds.items(); ++i) {
        item_count[i] = static_cast<double>(item_offsets[i + 1]);
        item_offsets[i + 1] += item_offsets[i];
    }
    for (std::size_t u = 0; u < ds.users(); ++u) user_count[u] = static_cast<double>(by_user.count(u));
}

namespace {

inline double dot(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t r = 0; r < d; ++r) s += a[r] * b[r];
    return s;
}

inline double squared_norm(const double* a, std::size_t d) { return dot(a, a, d); }

inline double bias_term(double delta, BiasPenalty p) { return p == BiasPenalty::squared ? delta * delta : delta; }

// d/d(delta) of the per-observation bias penalty (without lambda).
inline double bias_slope(double delta, BiasPenalty p) { return p == BiasPenalty::squared ? 2.0 * delta : 1.0; }

inline double bias_curvature(BiasPenalty p) { return p == BiasPenalty::squared ? 2.0 : 0.0; }

}  // namespace

void residuals(const FactorTopology& topo, const Factorization& f, std::vector<double>& residual, Exec exec) {
    const auto rs = topo.ds.ratings();
    const std::size_t d = f.dims();
    residual.resize(rs.size());
    const bool par = exec == Exec::parallel;
    const bool biases = f.has_biases();
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(rs.size()); ++k) {
        const auto& r = rs[static_cast<std::size_t>(k)];
        double pred = dot(f.A.row(r.item).data(), f.B.col(r.user).data(), d);
        if (biases) pred += f.mu + f.item_bias[r.item] + f.user_bias[r.user];
        residual[static_cast<std::size_t>(k)] = r.value - pred;
    }
}

double sum_squares(const std::vector<double>& residual, Exec exec) {
    return chunked_sum(residual.size(), [&](std::size_t k) { return residual[k] * residual[k]; }, exec);
}

double penalty(const FactorTopology& topo, const Factorization& f, Exec exec) {
    const std::size_t d = f.dims();
    const bool biases = f.has_biases();
    const double items = chunked_sum(
        f.items(),
        [&](std::size_t i) {
            double t = squared_norm(f.A.row(static_cast<Eigen::Index>(i)).data(), d);
            if (biases) t += bias_term(f.item_bias[static_cast<Eigen::Index>(i)], f.bias_penalty);
            return topo.item_count[i] * t;
        },
        exec);
    const double users = chunked_sum(
        f.users(),
        [&](std::size_t u) {
            double t = squared_norm(f.B.col(static_cast<Eigen::Index>(u)).data(), d);
            if (biases) t += bias_term(f.user_bias[static_cast<Eigen::Index>(u)], f.bias_penalty);
            return topo.user_count[u] * t;
        },
        exec);
    return items + users;
}

void gradient_items(const FactorTopology& topo, const Factorization& f, const std::vector<double>& residual,
                    Gradient& g, Exec exec) {
    const auto rs = topo.ds.ratings();
    const std::size_t d = f.dims();
    const double lambda = f.lambda;
    const bool biases = f.has_biases();
    g.A.resize(f.A.rows(), f.A.cols());
    if (biases) g.item_bias.resize(static_cast<Eigen::Index>(f.items()));
    const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(dynamic, 16) if (par)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(f.items()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double* gi = g.A.row(ii).data();
        const double* ai = f.A.row(ii).data();
        std::fill(gi, gi + d, 0.0);
        double gb = 0.0;
        for (std::size_t k = topo.item_offsets[i]; k < topo.item_offsets[i + 1]; ++k) {
            const double e = residual[k];
            const double* bu = f.B.col(rs[k].user).data();
            for (std::size_t r = 0; r < d; ++r) gi[r] -= 2.0 * e * bu[r];
            gb -= 2.0 * e;
        }
        const double cnt = topo.item_count[i];
        for (std::size_t r = 0; r < d; ++r) gi[r] += 2.0 * lambda * cnt * ai[r];
        if (biases) g.item_bias[ii] = gb + lambda * cnt * bias_slope(f.item_bias[ii], f.bias_penalty);
    }
}

void gradient_users(const FactorTopology& topo, const Factorization& f, const std::vector<double>& residual,
                    Gradient& g, Exec exec) {
    const auto& idx = topo.by_user;
    const std::size_t d = f.dims();
    const double lambda = f.lambda;
    const bool biases = f.has_biases();
    g.B.resize(f.B.rows(), f.B.cols());
    if (biases) g.user_bias.resize(static_cast<Eigen::Index>(f.users()));
    const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(dynamic, 16) if (par)
    for (std::ptrdiff_t uu = 0; uu < static_cast<std::ptrdiff_t>(f.users()); ++uu) {
        const auto u = static_cast<std::size_t>(uu);
        double* gu = g.B.col(uu).data();
        const double* bu = f.B.col(uu).data();
        std::fill(gu, gu + d, 0.0);
        double gb = 0.0;
        for (std::size_t k = idx.offsets[u]; k < idx.offsets[u + 1]; ++k) {
            const double e = residual[idx.rating_pos[k]];
            const double* ai = f.A.row(idx.partner[k]).data();
            for (std::size_t r = 0; r < d; ++r) gu[r] -= 2.0 * e * ai[r];
            gb -= 2.0 * e;
        }
        const double cnt = topo.user_count[u];
        for (std::size_t r = 0; r < d; ++r) gu[r] += 2.0 * lambda * cnt * bu[r];
        if (biases) g.user_bias[uu] = gb + lambda * cnt * bias_slope(f.user_bias[uu], f.bias_penalty);
    }
}

namespace {

// Shared body of the two block steps. `entries` visits (rating position,
// partner vector) pairs of one row.
template <class Visit>
void scaled_step(double* x, double* bias, std::size_t d, double cnt, double lambda, BiasPenalty bp, bool nonneg,
                 double scale, Visit visit) {
    constexpr std::size_t kMaxInline = 256;
    double g_buf[kMaxInline], h_buf[kMaxInline];
    std::vector<double> g_heap, h_heap;
    double* g = g_buf;
    double* h = h_buf;
    if (d > kMaxInline) {
        g_heap.assign(d, 0.0);
        h_heap.assign(d, 0.0);
        g = g_heap.data();
        h = h_heap.data();
    } else {
        std::fill(g, g + d, 0.0);
        std::fill(h, h + d, 0.0);
    }
    double gb = 0.0;
    visit([&](double e, const double* partner) {
        for (std::size_t r = 0; r < d; ++r) {
            g[r] -= 2.0 * e * partner[r];
            h[r] += 2.0 * partner[r] * partner[r];
        }
        gb -= 2.0 * e;
    });
    for (std::size_t r = 0; r < d; ++r) {
        const double grad = g[r] + 2.0 * lambda * cnt * x[r];
        const double curv = h[r] + 2.0 * lambda * cnt;
        if (curv <= 0.0) continue;
        double v = x[r] - scale * grad / curv;
        if (nonneg && v < 0.0) v = 0.0;
        x[r] = v;
    }
    if (bias) {
        const double grad = gb + lambda * cnt * bias_slope(*bias, bp);
        const double curv = 2.0 * cnt + lambda * cnt * bias_curvature(bp);
        if (curv > 0.0) *bias -= scale * grad / curv;
    }
}

}  // namespace

void step_items(const FactorTopology& topo, Factorization& f, const std::vector<double>& residual, double scale,
                Exec exec) {
    const auto rs = topo.ds.ratings();
    const std::size_t d = f.dims();
    const bool nonneg = f.kind == ModelKind::nnmf;
    const bool biases = f.has_biases();
    const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(dynamic, 16) if (par)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(f.items()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        scaled_step(f.A.row(ii).data(), biases ? &f.item_bias[ii] : nullptr, d, topo.item_count[i], f.lambda,
                    f.bias_penalty, nonneg, scale, [&](auto&& accept) {
                        for (std::size_t k = topo.item_offsets[i]; k < topo.item_offsets[i + 1]; ++k)
                            accept(residual[k], f.B.col(rs[k].user).data());
                    });
    }
}

void step_users(const FactorTopology& topo, Factorization& f, const std::vector<double>& residual, double scale,
                Exec exec) {
    const auto& idx = topo.by_user;
    const std::size_t d = f.dims();
    const bool nonneg = f.kind == ModelKind::nnmf;
    const bool biases = f.has_biases();
    const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(dynamic, 16) if (par)
    for (std::ptrdiff_t uu = 0; uu < static_cast<std::ptrdiff_t>(f.users()); ++uu) {
        const auto u = static_cast<std::size_t>(uu);
        scaled_step(f.B.col(uu).data(), biases ? &f.user_bias[uu] : nullptr, d, topo.user_count[u], f.lambda,
                    f.bias_penalty, nonneg, scale, [&](auto&& accept) {
                        for (std::size_t k = idx.offsets[u]; k < idx.offsets[u + 1]; ++k)
                            accept(residual[idx.rating_pos[k]], f.A.row(idx.partner[k]).data());
                    });
    }
}

namespace reference {

double sse(const RatingDataset& ds, const Factorization& f) {
    double s = 0.0;
    for (const auto& r : ds.ratings()) {
        const double e = r.value - predict(f, r.item, r.user);
        s += e * e;
    }
    return s;
}

double objective(const RatingDataset& ds, const Factorization& f) {
    double pen = 0.0;
    for (const auto& r : ds.ratings()) {
        double t = f.A.row(r.item).squaredNorm() + f.B.col(r.user).squaredNorm();
        if (f.has_biases())
            t += bias_term(f.item_bias[r.item], f.bias_penalty) + bias_term(f.user_bias[r.user], f.bias_penalty);
        pen += t;
    }
    return reference::sse(ds, f) + f.lambda * pen;
}

Gradient gradient(const RatingDataset& ds, const Factorization& f) {
    Gradient g;
    g.A = RowMatrix::Zero(f.A.rows(), f.A.cols());
    g.B = Matrix::Zero(f.B.rows(), f.B.cols());
    if (f.has_biases()) {
        g.item_bias = Vector::Zero(f.item_bias.size());
        g.user_bias = Vector::Zero(f.user_bias.size());
    }
    for (const auto& r : ds.ratings()) {
        const double e = r.value - predict(f, r.item, r.user);
        g.A.row(r.item) += -2.0 * e * f.B.col(r.user).transpose() + 2.0 * f.lambda * f.A.row(r.item);
        g.B.col(r.user) += -2.0 * e * f.A.row(r.item).transpose() + 2.0 * f.lambda * f.B.col(r.user);
        if (f.has_biases()) {
            g.item_bias[r.item] += -2.0 * e + f.lambda * bias_slope(f.item_bias[r.item], f.bias_penalty);
            g.user_bias[r.user] += -2.0 * e + f.lambda * bias_slope(f.user_bias[r.user], f.bias_penalty);
        }
    }
    return g;
}

}  // namespace reference

}  // namespace factorspace::kernels
