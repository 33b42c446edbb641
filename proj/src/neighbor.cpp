#include "factorspace/neighbor.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "factorspace/error.hpp"
#include "factorspace/snapshot.hpp"

namespace factorspace {

namespace {

// Correlation of paired samples with two-pass centring.
std::optional<double> correlate(const double* x, const double* y, std::size_t n) {
    if (n == 0) return std::nullopt;
    if (std::all_of(x, x + n, [&](double v) { return v == x[0]; }) ||
        std::all_of(y, y + n, [&](double v) { return v == y[0]; }))
        return std::nullopt;
    double sx = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        sx += x[k];
        sy += y[k];
    }
    const double mx = sx / static_cast<double>(n);
    const double my = sy / static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double dx = x[k] - mx;
        const double dy = y[k] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

}  // namespace

PearsonResult pearson(const RatingIndex& by_item, std::size_t i, std::size_t j) {
    if (i >= by_item.rows() || j >= by_item.rows())
        throw ConfigError(fmt::format("pearson: item index ({}, {}) out of range", i, j));
    std::vector<double> x, y;
    std::size_t a = by_item.offsets[i], b = by_item.offsets[j];
    const std::size_t ae = by_item.offsets[i + 1], be = by_item.offsets[j + 1];
    while (a < ae && b < be) {
        const auto ua = by_item.partner[a], ub = by_item.partner[b];
        if (ua < ub) {
            ++a;
        } else if (ub < ua) {
            ++b;
        } else {
            x.push_back(by_item.value[a++]);
            y.push_back(by_item.value[b++]);
        }
    }
    return {correlate(x.data(), y.data(), x.size()), static_cast<std::uint32_t>(x.size())};
}

PearsonResult pearson(const RatingDataset& ds, std::size_t i, std::size_t j) {
    return pearson(RatingIndex::by_item(ds), i, j);
}

double shrink(double rho, std::uint32_t n, double lambda) {
    if (n == 0) return 0.0;
    const double nn = static_cast<double>(n);
    return nn / (nn + lambda) * rho;
}

double to_distance(double s) {
    s = std::clamp(s, kSimilarityFloor, 1.0);
    // log1p keeps d > 0 for every s < 1; adding 0.0 turns -0 into +0.
    return -std::log1p((s - 1.0) * 0.5) + 0.0;
}

double distance_cap() { return to_distance(kSimilarityFloor); }

std::size_t DistanceMatrix::missing_count() const {
    return static_cast<std::size_t>(std::count(missing.begin(), missing.end(), std::uint8_t{1}));
}

double DistanceMatrix::missing_fraction() const {
    return missing.empty() ? 0.0 : static_cast<double>(missing_count()) / static_cast<double>(missing.size());
}

DistanceMatrix DistanceMatrix::from_dense(const Matrix& dense) {
    const auto n = static_cast<std::size_t>(dense.rows());
    DistanceMatrix dm;
    dm.index = PackedIndex(n, false);
    dm.distance.assign(dm.index.size(), 0.0);
    dm.missing.assign(dm.index.size(), 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            const auto k = dm.index(i, j);
            if (std::isnan(v)) {
                dm.missing[k] = 1;
            } else {
                if (v < 0.0) throw DataError("distances must be non-negative");
                dm.distance[k] = v;
            }
        }
    return dm;
}

namespace {

// Row kernel: correlations of item i with items j in [first, items), using a
// dense scatter of item i's ratings. Co-rater pairs are collected in
// ascending user order, the same order pearson() visits them, so both paths
// produce identical values.
struct RowScatter {
    std::vector<double> value;
    std::vector<std::size_t> stamp;
    std::vector<double> x, y;
    std::size_t epoch = 0;

    explicit RowScatter(std::size_t users) : value(users, 0.0), stamp(users, 0) {}

    void load(const RatingIndex& idx, std::size_t i) {
        ++epoch;
        for (std::size_t k = idx.offsets[i]; k < idx.offsets[i + 1]; ++k) {
            value[idx.partner[k]] = idx.value[k];
            stamp[idx.partner[k]] = epoch;
        }
    }

    PearsonResult against(const RatingIndex& idx, std::size_t j) {
        x.clear();
        y.clear();
        for (std::size_t k = idx.offsets[j]; k < idx.offsets[j + 1]; ++k) {
            const auto u = idx.partner[k];
            if (stamp[u] == epoch) {
                x.push_back(value[u]);
                y.push_back(idx.value[k]);
            }
        }
        return {correlate(x.data(), y.data(), x.size()), static_cast<std::uint32_t>(x.size())};
    }
};

template <class Emit>
void for_each_pair(const RatingDataset& ds, bool with_diagonal, Exec exec, Emit emit) {
    const auto idx = RatingIndex::by_item(ds);
    const std::size_t I = ds.items();
    if (exec == Exec::serial) {
        for (std::size_t i = 0; i < I; ++i)
            for (std::size_t j = with_diagonal ? i : i + 1; j < I; ++j) emit(i, j, pearson(idx, i, j));
        return;
    }
#pragma omp parallel
    {
        RowScatter scatter(ds.users());
#pragma omp for schedule(dynamic, 4)
        for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(I); ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            scatter.load(idx, i);
            for (std::size_t j = with_diagonal ? i : i + 1; j < I; ++j) emit(i, j, scatter.against(idx, j));
        }
    }
}

}  // namespace

SimilarityMatrix build_similarity_matrix(const RatingDataset& ds, double lambda, Exec exec) {
    if (!(lambda >= 0.0)) throw ConfigError("shrinkage lambda must be >= 0");
    SimilarityMatrix sm;
    sm.index = PackedIndex(ds.items(), true);
    sm.similarity.assign(sm.index.size(), 0.0);
    sm.co_raters.assign(sm.index.size(), 0);
    sm.missing.assign(sm.index.size(), 0);
    sm.shrink_lambda = lambda;
    for_each_pair(ds, true, exec, [&](std::size_t i, std::size_t j, const PearsonResult& p) {
        const auto k = sm.index(i, j);
        sm.co_raters[k] = p.n;
        if (i == j) {
            // An item correlates perfectly with itself.
            sm.similarity[k] = shrink(1.0, p.n, lambda);
        } else if (p.rho) {
            sm.similarity[k] = shrink(*p.rho, p.n, lambda);
        } else {
            sm.missing[k] = 1;
        }
    });
    return sm;
}

DistanceMatrix to_distance_matrix(const SimilarityMatrix& sim) {
    DistanceMatrix dm;
    const auto I = sim.items();
    dm.index = PackedIndex(I, false);
    dm.distance.assign(dm.index.size(), 0.0);
    dm.missing.assign(dm.index.size(), 0);
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = i + 1; j < I; ++j) {
            const auto k = dm.index(i, j);
            if (sim.is_missing(i, j)) {
                dm.missing[k] = 1;
            } else {
                dm.distance[k] = to_distance(sim.s(i, j));
            }
        }
    return dm;
}

DistanceMatrix build_distance_matrix(const RatingDataset& ds, double lambda, Exec exec) {
    if (!(lambda >= 0.0)) throw ConfigError("shrinkage lambda must be >= 0");
    if (ds.empty()) throw DataError("cannot build a distance matrix from an empty dataset");
    DistanceMatrix dm;
    dm.index = PackedIndex(ds.items(), false);
    dm.distance.assign(dm.index.size(), 0.0);
    dm.missing.assign(dm.index.size(), 0);
    for_each_pair(ds, false, exec, [&](std::size_t i, std::size_t j, const PearsonResult& p) {
        const auto k = dm.index(i, j);
        if (p.rho)
            dm.distance[k] = to_distance(shrink(*p.rho, p.n, lambda));
        else
            dm.missing[k] = 1;
    });
    return dm;
}

void write_distance_binary(std::ostream& out, const DistanceMatrix& dm, std::uint64_t config_hash) {
    BinaryWriter w(out);
    w.header(kDistanceMagic, 1, config_hash);
    w.u64(dm.items());
    w.f64s(dm.distance);
    // Missing-entry bitmap, LSB first.
    std::vector<std::uint8_t> bits((dm.missing.size() + 7) / 8, 0);
    for (std::size_t k = 0; k < dm.missing.size(); ++k)
        if (dm.missing[k]) bits[k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
    w.raw(bits.data(), bits.size());
}

DistanceMatrix read_distance_binary(std::istream& in, std::uint64_t* config_hash) {
    BinaryReader r(in);
    const auto h = r.header(kDistanceMagic, 1);
    if (config_hash) *config_hash = h.config_hash;
    const auto n = r.u64();
    if (n > (1ULL << 20)) throw DataError("corrupt distance snapshot");
    DistanceMatrix dm;
    dm.index = PackedIndex(n, false);
    dm.distance.resize(dm.index.size());
    r.f64s(dm.distance);
    std::vector<std::uint8_t> bits((dm.index.size() + 7) / 8, 0);
    r.raw(bits.data(), bits.size());
    dm.missing.assign(dm.index.size(), 0);
    for (std::size_t k = 0; k < dm.missing.size(); ++k) dm.missing[k] = (bits[k / 8] >> (k % 8)) & 1u;
    return dm;
}

void write_distance_csv(std::ostream& out, const DistanceMatrix& dm) {
    const auto n = dm.items();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j) out << ',';
            if (!dm.is_missing(i, j)) out << format_double(dm.d(i, j));
        }
        out << '\n';
    }
}

}  // namespace factorspace
