#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "factorspace/classify.hpp"
#include "factorspace/error.hpp"
#include "factorspace/snapshot.hpp"

namespace factorspace {

void LabeledPoints::validate() const {
    if (labels.empty()) throw ConfigError("labeled point set is empty");
    if (static_cast<std::size_t>(points.rows()) != labels.size())
        throw ConfigError(fmt::format("{} points but {} labels", points.rows(), labels.size()));
    if (!points.allFinite()) throw ConfigError("labeled points contain non-finite coordinates");
}

double KernelSpec::operator()(std::span<const double> x, std::span<const double> y) const {
    if (kind == KernelKind::linear) {
        double s = 0.0;
        for (std::size_t r = 0; r < x.size(); ++r) s += x[r] * y[r];
        return s;
    }
    double s = 0.0;
    for (std::size_t r = 0; r < x.size(); ++r) {
        const double t = x[r] - y[r];
        s += t * t;
    }
    return std::exp(-gamma * s);
}

namespace {

std::span<const double> row(const RowMatrix& m, std::size_t i) {
    return {m.row(static_cast<Eigen::Index>(i)).data(), static_cast<std::size_t>(m.cols())};
}

}  // namespace

double SvmModel::decision(std::span<const double> x) const {
    if (constant) return constant_label ? 1.0 : -1.0;
    double f = bias;
    for (std::size_t t = 0; t < coefficients.size(); ++t) f += coefficients[t] * kernel(row(support, t), x);
    return f;
}

bool svm_predict(const SvmModel& m, std::span<const double> x) {
    if (m.constant) return m.constant_label;
    return m.decision(x) > 0.0;
}

double svm_dual_objective(const LabeledPoints& data, const KernelSpec& kernel, std::span<const double> alpha) {
    const auto m = data.size();
    double lin = 0.0, quad = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        lin += alpha[i];
        if (alpha[i] == 0.0) continue;
        const double yi = data.labels[i] ? 1.0 : -1.0;
        for (std::size_t j = 0; j < m; ++j) {
            if (alpha[j] == 0.0) continue;
            const double yj = data.labels[j] ? 1.0 : -1.0;
            quad += alpha[i] * alpha[j] * yi * yj * kernel(row(data.points, i), row(data.points, j));
        }
    }
    return lin - 0.5 * quad;
}

SvmTrainResult svm_train(const LabeledPoints& data, const KernelSpec& kernel, double C, const SvmOptions& opts) {
    data.validate();
    if (!(C > 0.0) || !std::isfinite(C)) throw ConfigError("SVM: C must be > 0");
    if (kernel.kind == KernelKind::rbf && !(kernel.gamma > 0.0)) throw ConfigError("SVM: gamma must be > 0");

    SvmTrainResult out;
    auto& model = out.model;
    model.kernel = kernel;
    model.C = C;
    const std::size_t m = data.size();
    model.alpha.assign(m, 0.0);

    const auto positives = static_cast<std::size_t>(std::count(data.labels.begin(), data.labels.end(), 1));
    if (positives == 0 || positives == m) {
        model.constant = true;
        model.constant_label = positives == m;
        out.warnings.push_back(fmt::format("SVM training data holds a single class; constant {} classifier returned",
                                           model.constant_label ? "positive" : "negative"));
        return out;
    }

    std::vector<double> y(m);
    for (std::size_t t = 0; t < m; ++t) y[t] = data.labels[t] ? 1.0 : -1.0;

    // Full kernel matrix; training sets stay in the low thousands.
    Matrix K(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) {
            const double v = kernel(row(data.points, i), row(data.points, j));
            K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            K(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }

    auto& alpha = model.alpha;
    std::vector<double> G(m, -1.0);  // gradient of 1/2 a'Qa - e'a
    const std::size_t max_iter = opts.max_iterations ? opts.max_iterations : std::max<std::size_t>(10000000, 100 * m);
    auto in_up = [&](std::size_t t) { return (y[t] > 0 && alpha[t] < C) || (y[t] < 0 && alpha[t] > 0); };
    auto in_low = [&](std::size_t t) { return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < C); };

    std::size_t iter = 0;
    model.converged = false;
    for (; iter < max_iter; ++iter) {
        // Maximal violating pair.
        double gmax = -std::numeric_limits<double>::infinity();
        double gmin = std::numeric_limits<double>::infinity();
        std::size_t i = m, j = m;
        for (std::size_t t = 0; t < m; ++t) {
            const double v = -y[t] * G[t];
            if (in_up(t) && v > gmax) {
                gmax = v;
                i = t;
            }
            if (in_low(t) && v < gmin) {
                gmin = v;
                j = t;
            }
        }
        if (i == m || j == m || gmax - gmin < opts.tolerance) {
            model.converged = true;
            break;
        }

        const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
        const double Qij = y[i] * y[j] * K(ii, jj);
        const double old_i = alpha[i], old_j = alpha[j];
        if (y[i] != y[j]) {
            double quad = K(ii, ii) + K(jj, jj) + 2.0 * Qij;
            if (quad <= 0.0) quad = opts.tau;
            const double delta = (-G[i] - G[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if (diff > 0.0) {
                if (alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = C - diff;
                }
            } else if (alpha[j] > C) {
                alpha[j] = C;
                alpha[i] = C + diff;
            }
        } else {
            double quad = K(ii, ii) + K(jj, jj) - 2.0 * Qij;
            if (quad <= 0.0) quad = opts.tau;
            const double delta = (G[i] - G[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > C) {
                if (alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = sum - C;
                }
            } else if (alpha[j] < 0.0) {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if (sum > C) {
                if (alpha[j] > C) {
                    alpha[j] = C;
                    alpha[i] = sum - C;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
        for (std::size_t t = 0; t < m; ++t) {
            const auto tt = static_cast<Eigen::Index>(t);
            G[t] += y[t] * (y[i] * K(tt, ii) * di + y[j] * K(tt, jj) * dj);
        }
    }
    model.iterations = iter;
    if (!model.converged)
        out.warnings.push_back(fmt::format("SVM solver stopped after {} iterations without reaching tolerance", iter));

    // Bias from free vectors, or the midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t free = 0;
    for (std::size_t t = 0; t < m; ++t) {
        const double yG = y[t] * G[t];
        if (alpha[t] >= C) {
            if (y[t] < 0) ub = std::min(ub, yG);
            else lb = std::max(lb, yG);
        } else if (alpha[t] <= 0.0) {
            if (y[t] > 0) ub = std::min(ub, yG);
            else lb = std::max(lb, yG);
        } else {
            ++free;
            sum_free += yG;
        }
    }
    const double rho = free > 0 ? sum_free / static_cast<double>(free) : (ub + lb) / 2.0;
    model.bias = -rho;

    std::size_t nsv = 0;
    for (double a : alpha) nsv += a > 0.0;
    model.support.resize(static_cast<Eigen::Index>(nsv), data.points.cols());
    model.coefficients.reserve(nsv);
    for (std::size_t t = 0, s = 0; t < m; ++t)
        if (alpha[t] > 0.0) {
            model.support.row(static_cast<Eigen::Index>(s++)) = data.points.row(static_cast<Eigen::Index>(t));
            model.coefficients.push_back(alpha[t] * y[t]);
        }
    return out;
}

void write_svm_binary(std::ostream& out, const SvmModel& m) {
    BinaryWriter w(out);
    w.header(kSvmMagic, 1, 0);
    w.u8(static_cast<std::uint8_t>(m.kernel.kind));
    w.f64(m.kernel.gamma);
    w.f64(m.C);
    w.f64(m.bias);
    w.u8(m.constant);
    w.u8(m.constant_label);
    w.u64(static_cast<std::uint64_t>(m.support.rows()));
    w.u64(static_cast<std::uint64_t>(m.support.cols()));
    w.f64s(m.coefficients);
    w.f64s({m.support.data(), static_cast<std::size_t>(m.support.size())});
}

SvmModel read_svm_binary(std::istream& in) {
    BinaryReader r(in);
    r.header(kSvmMagic, 1);
    SvmModel m;
    const auto kind = r.u8();
    if (kind > 1) throw DataError("corrupt SVM snapshot");
    m.kernel.kind = static_cast<KernelKind>(kind);
    m.kernel.gamma = r.f64();
    m.C = r.f64();
    m.bias = r.f64();
    m.constant = r.u8() != 0;
    m.constant_label = r.u8() != 0;
    const auto n = r.u64(), d = r.u64();
    if (n > (1ULL << 32) || d > (1ULL << 16)) throw DataError("corrupt SVM snapshot");
    m.coefficients.resize(n);
    r.f64s(m.coefficients);
    m.support.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    r.f64s({m.support.data(), static_cast<std::size_t>(m.support.size())});
    return m;
}

}  // namespace factorspace
