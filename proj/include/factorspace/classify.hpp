#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "factorspace/parallel.hpp"
#include "factorspace/types.hpp"

namespace factorspace {

// Points with binary labels (true = holds the genre).
struct LabeledPoints {
    RowMatrix points;                 // m x d
    std::vector<std::uint8_t> labels;  // m

    std::size_t size() const { return labels.size(); }
    std::size_t dims() const { return static_cast<std::size_t>(points.cols()); }
    // Throws ConfigError if empty, mis-sized or non-finite.
    void validate() const;
};

enum class KernelKind { linear, rbf };

struct KernelSpec {
    KernelKind kind = KernelKind::linear;
    double gamma = 0.1;  // rbf: exp(-gamma * ||x - y||^2)

    double operator()(std::span<const double> x, std::span<const double> y) const;
};

struct SvmOptions {
    double tolerance = 1e-3;          // maximal KKT violation at termination
    std::size_t max_iterations = 0;   // 0: max(10^7, 100 m)
    double tau = 1e-12;               // curvature floor for non-PSD pairs
};

struct SvmModel {
    KernelSpec kernel;
    double C = 4.0;
    std::vector<double> alpha;        // dual variables, one per training point (0 for constant models)
    std::vector<double> coefficients; // alpha_t * y_t for the support points
    RowMatrix support;                // support points, one per row
    double bias = 0.0;
    bool constant = false;            // degenerate single-class model
    bool constant_label = false;
    std::size_t iterations = 0;
    bool converged = true;

    double decision(std::span<const double> x) const;
};

struct SvmTrainResult {
    SvmModel model;
    Warnings warnings;
};

// Soft-margin SVM dual solved by SMO with maximal-violating-pair selection.
SvmTrainResult svm_train(const LabeledPoints& data, const KernelSpec& kernel, double C, const SvmOptions& opts = {});

// Sign of the decision function; f = 0 maps to the negative class.
bool svm_predict(const SvmModel& m, std::span<const double> x);

// Dual objective sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij, for tests.
double svm_dual_objective(const LabeledPoints& data, const KernelSpec& kernel, std::span<const double> alpha);

enum class DistanceType { euclidean, standardized_euclidean, negative_scalar_product, cosine };

struct DistanceKind {
    DistanceType type = DistanceType::euclidean;
    std::vector<double> scale;  // per-dimension sigma for standardized_euclidean

    // Distance kind with sigma computed from `train` (population standard
    // deviation; zero-variance dimensions use 1 and are reported).
    static DistanceKind fitted(DistanceType type, const RowMatrix& train, Warnings* warnings = nullptr);
};

// "Eucl", "sEucl", "scal", "cos".
std::string short_name(DistanceType t);
DistanceType parse_distance_type(const std::string& name);

// Cosine distance of a zero vector is defined as the maximum, 2.
inline constexpr double kCosineZeroDistance = 2.0;

double knn_distance(const DistanceKind& kind, std::span<const double> x, std::span<const double> y);

// Majority vote of the k nearest training points; distance ties go to the
// lower training index. k must be odd and <= training size.
bool knn_classify(const LabeledPoints& train, const DistanceKind& kind, std::size_t k, std::span<const double> x);

// Indices of the k nearest training points of every query row, nearest first.
// Shared by all k <= kmax and all labelings of the same training set.
std::vector<std::vector<std::uint32_t>> knn_neighbors(const RowMatrix& train, const DistanceKind& kind,
                                                      std::size_t kmax, const RowMatrix& queries,
                                                      Exec exec = Exec::parallel);

// Vote among the first k entries of a neighbor list.
bool knn_vote(std::span<const std::uint32_t> neighbors, std::span<const std::uint8_t> labels, std::size_t k);

inline constexpr std::string_view kSvmMagic = "FSPSVM01";
void write_svm_binary(std::ostream& out, const SvmModel& m);
SvmModel read_svm_binary(std::istream& in);

}  // namespace factorspace
