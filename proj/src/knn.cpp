#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "factorspace/classify.hpp"
#include "factorspace/error.hpp"

namespace factorspace {

std::string short_name(DistanceType t) {
    switch (t) {
        case DistanceType::euclidean: return "Eucl";
        case DistanceType::standardized_euclidean: return "sEucl";
        case DistanceType::negative_scalar_product: return "scal";
        case DistanceType::cosine: return "cos";
    }
    return "?";
}

DistanceType parse_distance_type(const std::string& name) {
    if (name == "Eucl" || name == "euclidean") return DistanceType::euclidean;
    if (name == "sEucl" || name == "standardized_euclidean") return DistanceType::standardized_euclidean;
    if (name == "scal" || name == "negative_scalar_product") return DistanceType::negative_scalar_product;
    if (name == "cos" || name == "cosine") return DistanceType::cosine;
    throw ConfigError(fmt::format("unknown distance '{}' (expected Eucl, sEucl, scal or cos)", name));
}

DistanceKind DistanceKind::fitted(DistanceType type, const RowMatrix& train, Warnings* warnings) {
    DistanceKind kind;
    kind.type = type;
    if (type != DistanceType::standardized_euclidean) return kind;
    const auto n = train.rows();
    kind.scale.assign(static_cast<std::size_t>(train.cols()), 1.0);
    std::size_t flat = 0;
    for (Eigen::Index c = 0; c < train.cols(); ++c) {
        if (n == 0) break;
        const double mean = train.col(c).mean();
        const double var = (train.col(c).array() - mean).square().sum() / static_cast<double>(n);
        if (var > 0.0) {
            kind.scale[static_cast<std::size_t>(c)] = std::sqrt(var);
        } else {
            ++flat;
        }
    }
    if (flat > 0 && warnings)
        warnings->push_back(fmt::format("{} zero-variance dimensions use unit scale in sEucl", flat));
    return kind;
}

double knn_distance(const DistanceKind& kind, std::span<const double> x, std::span<const double> y) {
    const std::size_t d = x.size();
    switch (kind.type) {
        case DistanceType::euclidean: {
            double s = 0.0;
            for (std::size_t r = 0; r < d; ++r) {
                const double t = x[r] - y[r];
                s += t * t;
            }
            return std::sqrt(s);
        }
        case DistanceType::standardized_euclidean: {
            double s = 0.0;
            for (std::size_t r = 0; r < d; ++r) {
                const double t = (x[r] - y[r]) / (r < kind.scale.size() ? kind.scale[r] : 1.0);
                s += t * t;
            }
            return std::sqrt(s);
        }
        case DistanceType::negative_scalar_product: {
            double s = 0.0;
            for (std::size_t r = 0; r < d; ++r) s += x[r] * y[r];
            return -s;
        }
        case DistanceType::cosine: {
            double xy = 0.0, xx = 0.0, yy = 0.0;
            for (std::size_t r = 0; r < d; ++r) {
                xy += x[r] * y[r];
                xx += x[r] * x[r];
                yy += y[r] * y[r];
            }
            if (xx == 0.0 || yy == 0.0) return kCosineZeroDistance;
            return 1.0 - xy / (std::sqrt(xx) * std::sqrt(yy));
        }
    }
    return 0.0;
}

namespace {

std::span<const double> row(const RowMatrix& m, Eigen::Index i) {
    return {m.row(i).data(), static_cast<std::size_t>(m.cols())};
}

}  // namespace

std::vector<std::vector<std::uint32_t>> knn_neighbors(const RowMatrix& train, const DistanceKind& kind,
                                                      std::size_t kmax, const RowMatrix& queries, Exec exec) {
    const auto m = static_cast<std::size_t>(train.rows());
    if (kmax == 0 || kmax > m)
        throw ConfigError(fmt::format("kNN: k = {} must lie in [1, training size {}]", kmax, m));
    if (train.cols() != queries.cols()) throw ConfigError("kNN: query dimension mismatch");
    const auto q = static_cast<std::size_t>(queries.rows());
    std::vector<std::vector<std::uint32_t>> out(q);
    const bool par = exec == Exec::parallel;
#pragma omp parallel if (par)
    {
        std::vector<std::pair<double, std::uint32_t>> dist(m);
#pragma omp for schedule(dynamic, 8)
        for (std::ptrdiff_t qq = 0; qq < static_cast<std::ptrdiff_t>(q); ++qq) {
            const auto x = row(queries, qq);
            for (std::size_t t = 0; t < m; ++t)
                dist[t] = {knn_distance(kind, row(train, static_cast<Eigen::Index>(t)), x), static_cast<std::uint32_t>(t)};
            // Pair ordering breaks distance ties by lower training index.
            std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kmax), dist.end());
            auto& nn = out[static_cast<std::size_t>(qq)];
            nn.resize(kmax);
            for (std::size_t k = 0; k < kmax; ++k) nn[k] = dist[k].second;
        }
    }
    return out;
}

bool knn_vote(std::span<const std::uint32_t> neighbors, std::span<const std::uint8_t> labels, std::size_t k) {
    std::size_t pos = 0;
    for (std::size_t n = 0; n < k; ++n) pos += labels[neighbors[n]] != 0;
    return 2 * pos > k;
}

bool knn_classify(const LabeledPoints& train, const DistanceKind& kind, std::size_t k, std::span<const double> x) {
    train.validate();
    if (k % 2 == 0) throw ConfigError(fmt::format("kNN: k = {} must be odd", k));
    if (x.size() != train.dims()) throw ConfigError("kNN: query dimension mismatch");
    RowMatrix query(1, static_cast<Eigen::Index>(x.size()));
    std::copy(x.begin(), x.end(), query.data());
    const auto nn = knn_neighbors(train.points, kind, k, query, Exec::serial);
    return knn_vote(nn[0], train.labels, k);
}

}  // namespace factorspace
