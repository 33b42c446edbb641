#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <vector>

#include "factorspace/ingest.hpp"
#include "factorspace/parallel.hpp"
#include "factorspace/standardize.hpp"
#include "factorspace/types.hpp"

namespace factorspace {

// Upper-triangle storage for symmetric I x I matrices.
class PackedIndex {
public:
    PackedIndex() = default;
    PackedIndex(std::size_t n, bool with_diagonal) : n_(n), diag_(with_diagonal) {}

    std::size_t n() const { return n_; }
    std::size_t size() const { return diag_ ? n_ * (n_ + 1) / 2 : (n_ ? n_ * (n_ - 1) / 2 : 0); }
    // Requires i != j unless the layout stores the diagonal.
    std::size_t operator()(std::size_t i, std::size_t j) const {
        if (i > j) std::swap(i, j);
        return diag_ ? i * n_ - (i * (i - 1)) / 2 + (j - i) : (i * (2 * n_ - i - 1)) / 2 + (j - i - 1);
    }

private:
    std::size_t n_ = 0;
    bool diag_ = false;
};

struct PearsonResult {
    std::optional<double> rho;  // empty: no co-raters or a constant co-rater vector
    std::uint32_t n = 0;        // number of co-raters
};

// Pearson correlation of items i and j over the users who rated both, with
// means taken over those co-raters only.
PearsonResult pearson(const RatingIndex& by_item, std::size_t i, std::size_t j);
PearsonResult pearson(const RatingDataset& ds, std::size_t i, std::size_t j);

// n / (n + lambda) * rho; 0 when n = 0.
double shrink(double rho, std::uint32_t n, double lambda);

// Similarity floor used by to_distance: s is clamped to at least -1 + 1e-6,
// which caps distances at -ln(0.5e-6).
inline constexpr double kSimilarityFloor = -1.0 + 1e-6;
double distance_cap();

// -ln((1 + s) / 2), with s clamped to [kSimilarityFloor, 1].
double to_distance(double s);

// Shrunk item-item similarities, packed with diagonal.
struct SimilarityMatrix {
    PackedIndex index;
    std::vector<double> similarity;
    std::vector<std::uint32_t> co_raters;
    std::vector<std::uint8_t> missing;
    double shrink_lambda = 0.0;

    std::size_t items() const { return index.n(); }
    double s(std::size_t i, std::size_t j) const { return similarity[index(i, j)]; }
    std::uint32_t n(std::size_t i, std::size_t j) const { return co_raters[index(i, j)]; }
    bool is_missing(std::size_t i, std::size_t j) const { return missing[index(i, j)] != 0; }
};

// Pairwise dissimilarities, packed without diagonal (self-distance is 0).
struct DistanceMatrix {
    PackedIndex index;
    std::vector<double> distance;
    std::vector<std::uint8_t> missing;

    std::size_t items() const { return index.n(); }
    double d(std::size_t i, std::size_t j) const { return i == j ? 0.0 : distance[index(i, j)]; }
    bool is_missing(std::size_t i, std::size_t j) const { return i != j && missing[index(i, j)] != 0; }
    std::size_t missing_count() const;
    double missing_fraction() const;

    // Builds from a dense symmetric matrix; NaN entries become missing.
    static DistanceMatrix from_dense(const Matrix& dense);
};

SimilarityMatrix build_similarity_matrix(const RatingDataset& ds, double lambda, Exec exec = Exec::parallel);
// pearson -> shrink -> to_distance for every pair; undefined correlations
// become missing entries.
DistanceMatrix build_distance_matrix(const RatingDataset& ds, double lambda, Exec exec = Exec::parallel);
DistanceMatrix to_distance_matrix(const SimilarityMatrix& sim);

struct MdsConfig {
    std::size_t max_iterations = 500;
    double tolerance = 1e-6;  // relative stress improvement
    std::size_t restarts = 1;
    std::uint64_t seed = 1;
    double init_scale = 0.0;  // <= 0: mean defined distance
    Exec exec = Exec::parallel;
};

struct MdsResult {
    CoordinateSpace space;
    double stress = 0.0;
    std::size_t iterations = 0;
    std::vector<double> stress_trace;  // best restart, one value per iteration (incl. initial)
    Warnings warnings;
};

// Weighted metric stress sum over defined pairs (d_ij - ||x_i - x_j||)^2.
double stress(const DistanceMatrix& dm, const RowMatrix& X, Exec exec = Exec::parallel);

// Metric MDS by stress majorization (SMACOF) with zero weight on missing
// pairs. The result is centred and rotated onto its principal axes in order
// of decreasing variance; column_scales hold the per-axis sums of squares.
MdsResult mds_embed(const DistanceMatrix& dm, std::size_t d, const MdsConfig& cfg = {});

// One Guttman transform X -> (V + 11^T/n)^{-1} B(X) X given the Cholesky
// factor of V + 11^T/n; exposed for testing and benchmarking.
namespace mds_detail {
Matrix weighted_laplacian(const DistanceMatrix& dm);
void guttman_rhs(const DistanceMatrix& dm, const RowMatrix& X, RowMatrix& out, Exec exec);
}  // namespace mds_detail

inline constexpr std::string_view kDistanceMagic = "FSPDIST1";
void write_distance_binary(std::ostream& out, const DistanceMatrix& dm, std::uint64_t config_hash = 0);
DistanceMatrix read_distance_binary(std::istream& in, std::uint64_t* config_hash = nullptr);
// Dense CSV (empty cell = missing); intended for small instances.
void write_distance_csv(std::ostream& out, const DistanceMatrix& dm);

}  // namespace factorspace
