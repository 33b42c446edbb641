#pragma once

// Reference computations for tests. Each one is written from the defining
// formula with different data structures than the library code.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

#include "factorspace/classify.hpp"
#include "factorspace/factor.hpp"
#include "factorspace/ingest.hpp"

namespace oracle {

using namespace factorspace;

inline double predict(const Factorization& f, std::size_t i, std::size_t u) {
    double v = 0.0;
    for (Eigen::Index r = 0; r < f.A.cols(); ++r) v += f.A(static_cast<Eigen::Index>(i), r) * f.B(r, static_cast<Eigen::Index>(u));
    if (f.kind == ModelKind::delta_svd) v += f.mu + f.item_bias[static_cast<Eigen::Index>(i)] + f.user_bias[static_cast<Eigen::Index>(u)];
    return v;
}

// SSE + lambda * sum over observed (i,u) of the penalised parameters.
inline double objective(const RatingDataset& ds, const Factorization& f) {
    long double total = 0.0L;
    for (const auto& r : ds.ratings()) {
        const double e = r.value - oracle::predict(f, r.item, r.user);
        long double pen = 0.0L;
        for (Eigen::Index k = 0; k < f.A.cols(); ++k) {
            pen += static_cast<long double>(f.A(r.item, k)) * f.A(r.item, k);
            pen += static_cast<long double>(f.B(k, r.user)) * f.B(k, r.user);
        }
        if (f.kind == ModelKind::delta_svd) {
            const double di = f.item_bias[r.item], du = f.user_bias[r.user];
            pen += f.bias_penalty == BiasPenalty::squared ? static_cast<long double>(di) * di + static_cast<long double>(du) * du
                                                          : static_cast<long double>(di) + du;
        }
        total += static_cast<long double>(e) * e + f.lambda * pen;
    }
    return static_cast<double>(total);
}

// Central differences of oracle::objective with step h.
inline Gradient finite_difference_gradient(const RatingDataset& ds, Factorization f, double h = 1e-5) {
    Gradient g;
    g.A = RowMatrix::Zero(f.A.rows(), f.A.cols());
    g.B = Matrix::Zero(f.B.rows(), f.B.cols());
    auto diff = [&](double& x) {
        const double keep = x;
        x = keep + h;
        const double up = oracle::objective(ds, f);
        x = keep - h;
        const double down = oracle::objective(ds, f);
        x = keep;
        return (up - down) / (2.0 * h);
    };
    for (Eigen::Index i = 0; i < f.A.rows(); ++i)
        for (Eigen::Index r = 0; r < f.A.cols(); ++r) g.A(i, r) = diff(f.A(i, r));
    for (Eigen::Index r = 0; r < f.B.rows(); ++r)
        for (Eigen::Index u = 0; u < f.B.cols(); ++u) g.B(r, u) = diff(f.B(r, u));
    if (f.kind == ModelKind::delta_svd) {
        g.item_bias = Vector::Zero(f.item_bias.size());
        g.user_bias = Vector::Zero(f.user_bias.size());
        for (Eigen::Index i = 0; i < f.item_bias.size(); ++i) g.item_bias[i] = diff(f.item_bias[i]);
        for (Eigen::Index u = 0; u < f.user_bias.size(); ++u) g.user_bias[u] = diff(f.user_bias[u]);
    }
    return g;
}

struct DenseStandardized {
    Eigen::MatrixXd A;  // U S^1/2
    Eigen::MatrixXd B;  // S^1/2 V^T
    Eigen::VectorXd s;
};

// SVD of the explicitly formed product, truncated to rank r, with the
// largest-|entry|-positive sign rule applied column by column.
inline DenseStandardized dense_standardize(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, Eigen::Index r) {
    const Eigen::MatrixXd P = A * B;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(P, Eigen::ComputeThinU | Eigen::ComputeThinV);
    DenseStandardized out;
    out.s = svd.singularValues().head(r);
    const Eigen::VectorXd root = out.s.cwiseSqrt();
    out.A = svd.matrixU().leftCols(r) * root.asDiagonal();
    out.B = root.asDiagonal() * svd.matrixV().leftCols(r).transpose();
    for (Eigen::Index c = 0; c < r; ++c) {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < out.A.rows(); ++i)
            if (std::abs(out.A(i, c)) > std::abs(out.A(best, c))) best = i;
        if (out.A(best, c) < 0) {
            out.A.col(c) *= -1.0;
            out.B.row(c) *= -1.0;
        }
    }
    return out;
}

struct PearsonValue {
    std::optional<double> rho;
    std::uint32_t n = 0;
};

// The displayed correlation with co-rater means, from per-item user maps.
inline PearsonValue pearson(const RatingDataset& ds, std::size_t i, std::size_t j) {
    std::map<Index, double> ri, rj;
    for (const auto& r : ds.ratings()) {
        if (r.item == i) ri[r.user] = r.value;
        if (r.item == j) rj[r.user] = r.value;
    }
    std::vector<std::pair<double, double>> common;
    for (const auto& [u, v] : ri) {
        const auto it = rj.find(u);
        if (it != rj.end()) common.emplace_back(v, it->second);
    }
    PearsonValue out;
    out.n = static_cast<std::uint32_t>(common.size());
    if (common.empty()) return out;
    bool const_x = true, const_y = true;
    for (const auto& [x, y] : common) {
        const_x = const_x && x == common[0].first;
        const_y = const_y && y == common[0].second;
    }
    if (const_x || const_y) return out;
    long double mx = 0, my = 0;
    for (const auto& [x, y] : common) {
        mx += x;
        my += y;
    }
    mx /= common.size();
    my /= common.size();
    long double num = 0, dx = 0, dy = 0;
    for (const auto& [x, y] : common) {
        num += (x - mx) * (y - my);
        dx += (x - mx) * (x - mx);
        dy += (y - my) * (y - my);
    }
    out.rho = std::clamp(static_cast<double>(num / std::sqrt(dx * dy)), -1.0, 1.0);
    return out;
}

inline double knn_distance(DistanceType t, const std::vector<double>& scale, const double* x, const double* y, std::size_t d) {
    long double acc = 0, xx = 0, yy = 0;
    switch (t) {
    case DistanceType::euclidean:
        for (std::size_t k = 0; k < d; ++k) acc += (x[k] - y[k]) * static_cast<long double>(x[k] - y[k]);
        return static_cast<double>(std::sqrt(acc));
    case DistanceType::standardized_euclidean:
        for (std::size_t k = 0; k < d; ++k) {
            const long double z = (x[k] - y[k]) / static_cast<long double>(scale[k]);
            acc += z * z;
        }
        return static_cast<double>(std::sqrt(acc));
    case DistanceType::negative_scalar_product:
        for (std::size_t k = 0; k < d; ++k) acc += static_cast<long double>(x[k]) * y[k];
        return static_cast<double>(-acc);
    case DistanceType::cosine:
        for (std::size_t k = 0; k < d; ++k) {
            acc += static_cast<long double>(x[k]) * y[k];
            xx += static_cast<long double>(x[k]) * x[k];
            yy += static_cast<long double>(y[k]) * y[k];
        }
        if (xx == 0 || yy == 0) return 2.0;
        return static_cast<double>(1.0L - acc / std::sqrt(xx * yy));
    }
    return 0.0;
}

// Population standard deviation per column, 1 where it vanishes.
inline std::vector<double> column_sd(const RowMatrix& X) {
    std::vector<double> sd(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        long double m = 0, v = 0;
        for (Eigen::Index r = 0; r < X.rows(); ++r) m += X(r, c);
        m /= X.rows();
        for (Eigen::Index r = 0; r < X.rows(); ++r) v += (X(r, c) - m) * (X(r, c) - m);
        v /= X.rows();
        sd[static_cast<std::size_t>(c)] = v > 0 ? static_cast<double>(std::sqrt(v)) : 1.0;
    }
    return sd;
}

// Full sort of every training distance under `dist`, ties by index.
template <class Distance>
std::vector<std::size_t> knn_order_by(const RowMatrix& train, Distance dist, const double* x) {
    std::vector<std::pair<double, std::size_t>> all;
    for (Eigen::Index r = 0; r < train.rows(); ++r) all.emplace_back(dist(train.row(r).data(), x), static_cast<std::size_t>(r));
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> order;
    for (const auto& p : all) order.push_back(p.second);
    return order;
}

inline std::vector<std::size_t> knn_order(const RowMatrix& train, DistanceType t, const std::vector<double>& scale,
                                          const double* x) {
    const auto d = static_cast<std::size_t>(train.cols());
    return knn_order_by(train, [&](const double* a, const double* b) { return knn_distance(t, scale, a, b, d); }, x);
}

// Majority of the first k entries of a full-sort order.
inline bool vote(const std::vector<std::size_t>& order, const std::vector<std::uint8_t>& labels, std::size_t k) {
    std::size_t pos = 0;
    for (std::size_t q = 0; q < k; ++q) pos += labels[order[q]];
    return 2 * pos > k;
}

inline bool knn_classify(const LabeledPoints& train, DistanceType t, const std::vector<double>& scale, std::size_t k,
                         const double* x) {
    return vote(knn_order(train.points, t, scale, x), train.labels, k);
}

struct DualSolution {
    Eigen::VectorXd alpha;
    double bias = 0.0;
    double objective = -std::numeric_limits<double>::infinity();
};

// Exhaustive active-set search: every assignment of each alpha to
// {0, C, free} is solved as a linear KKT system and the feasible solution
// with the largest dual objective wins. Feasible for m <= ~8.
inline DualSolution svm_dual(const LabeledPoints& data, const KernelSpec& kernel, double C) {
    const auto m = static_cast<Eigen::Index>(data.size());
    Eigen::MatrixXd K(m, m);
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        y[i] = data.labels[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            const auto xi = data.points.row(i), xj = data.points.row(j);
            K(i, j) = kernel(std::span<const double>(xi.data(), static_cast<std::size_t>(xi.size())),
                             std::span<const double>(xj.data(), static_cast<std::size_t>(xj.size())));
        }
    }
    const Eigen::MatrixXd Q = (y * y.transpose()).cwiseProduct(K);
    DualSolution best;
    std::vector<int> state(static_cast<std::size_t>(m), 0);
    std::size_t combos = 1;
    for (Eigen::Index i = 0; i < m; ++i) combos *= 3;
    for (std::size_t code = 0; code < combos; ++code) {
        std::size_t c = code;
        std::vector<Eigen::Index> free;
        Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            state[static_cast<std::size_t>(i)] = static_cast<int>(c % 3);
            c /= 3;
            if (state[static_cast<std::size_t>(i)] == 1) alpha[i] = C;
            if (state[static_cast<std::size_t>(i)] == 2) free.push_back(i);
        }
        const auto nf = static_cast<Eigen::Index>(free.size());
        double b = 0.0;
        if (nf > 0) {
            // [Q_FF y_F; y_F^T 0] [alpha_F; b] = [1 - Q_FC alpha_C; -y_C^T alpha_C]
            Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nf + 1, nf + 1);
            Eigen::VectorXd rhs(nf + 1);
            for (Eigen::Index a = 0; a < nf; ++a) {
                for (Eigen::Index bcol = 0; bcol < nf; ++bcol) M(a, bcol) = Q(free[a], free[bcol]);
                M(a, nf) = y[free[a]];
                M(nf, a) = y[free[a]];
                rhs[a] = 1.0 - Q.row(free[a]).dot(alpha);
            }
            rhs[nf] = -y.dot(alpha);
            Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
            if (!lu.isInvertible()) continue;
            const Eigen::VectorXd sol = lu.solve(rhs);
            if ((M * sol - rhs).norm() > 1e-9 * (1.0 + rhs.norm())) continue;
            bool ok = true;
            for (Eigen::Index a = 0; a < nf; ++a) {
                if (!(sol[a] > 0.0 && sol[a] < C)) ok = false;
                alpha[free[a]] = sol[a];
            }
            if (!ok) continue;
            b = sol[nf];
        } else {
            if (std::abs(y.dot(alpha)) > 1e-9) continue;
            // Bias only bounded by the KKT inequalities; take the midpoint.
            double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
            const Eigen::VectorXd g = Q * alpha;
            for (Eigen::Index i = 0; i < m; ++i) {
                // y_i (sum + b) >= 1 for alpha 0, <= 1 for alpha C
                const double bound = y[i] * (1.0 - g[i]);
                const bool at_zero = state[static_cast<std::size_t>(i)] == 0;
                if ((y[i] > 0) == at_zero) lo = std::max(lo, bound);
                else hi = std::min(hi, bound);
            }
            if (lo > hi + 1e-12) continue;
            b = std::isfinite(lo) && std::isfinite(hi) ? 0.5 * (lo + hi) : (std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : 0.0));
        }
        const Eigen::VectorXd f = K * alpha.cwiseProduct(y) + Eigen::VectorXd::Constant(m, b);
        bool kkt = true;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double margin = y[i] * f[i];
            const int s = state[static_cast<std::size_t>(i)];
            if (s == 0 && margin < 1.0 - 1e-9) kkt = false;
            if (s == 1 && margin > 1.0 + 1e-9) kkt = false;
        }
        if (!kkt) continue;
        const double obj = alpha.sum() - 0.5 * alpha.dot(Q * alpha);
        if (obj > best.objective) {
            best.alpha = alpha;
            best.bias = b;
            best.objective = obj;
        }
    }
    return best;
}

using Rational = boost::multiprecision::cpp_rational;

// Exact (acc - acc_maj) / (1 - acc_maj) from the four fractions.
inline Rational kappa_exact(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
    const Rational n = Rational(tp) + fp + fn + tn;
    const Rational a_tp = Rational(tp) / n, a_fp = Rational(fp) / n, a_fn = Rational(fn) / n, a_tn = Rational(tn) / n;
    const Rational acc = a_tp + a_tn;
    const Rational pos = a_tp + a_fn, neg = a_fp + a_tn;
    const Rational acc_maj = pos > neg ? pos : neg;
    return (acc - acc_maj) / (Rational(1) - acc_maj);
}

// True when d is a nearest double to the exact value r.
inline bool is_correctly_rounded(double d, const Rational& r) {
    const Rational err = abs(Rational(d) - r);
    const double up = std::nextafter(d, std::numeric_limits<double>::infinity());
    const double down = std::nextafter(d, -std::numeric_limits<double>::infinity());
    return err <= abs(Rational(up) - r) && err <= abs(Rational(down) - r);
}

}  // namespace oracle
