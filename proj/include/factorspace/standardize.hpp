#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "factorspace/types.hpp"

namespace factorspace {

// Canonical item coordinates: orthogonal axes ordered by decreasing scale.
// For spaces produced by standardize(), coords = U S^{1/2} and
// column_scales = diag(S), so the squared norm of column r equals
// column_scales[r].
struct CoordinateSpace {
    RowMatrix coords;                 // I x d
    std::vector<double> column_scales;
    std::string family;               // "SVD", "DSVD", "NNMF", "MDS", ...
    std::size_t nominal_dims = 0;     // requested d (coords may be narrower on rank loss)
    std::string provenance;           // free-form description of extractor + config
    std::vector<ExternalId> item_ids; // row keys

    std::size_t items() const { return static_cast<std::size_t>(coords.rows()); }
    std::size_t dims() const { return static_cast<std::size_t>(coords.cols()); }
    // "SVD-10" style identifier.
    std::string id() const;
};

struct StandardizeResult {
    CoordinateSpace space;  // A'
    Matrix user_coords;     // B' = S^{1/2} V, d x U
    Warnings warnings;
};

struct StandardizeOptions {
    // Singular values below rank_tolerance * s_max count as zero.
    double rank_tolerance = 1e-10;
    // Adjacent singular values closer than this (relative) are reported.
    double degenerate_gap = 1e-9;
};

// SVD of the product A * B computed from QR factors of A and B^T and the SVD
// of the small R_A R_B^T core, without forming the I x U product.
// A' = U S^{1/2}, B' = S^{1/2} V with singular values in decreasing order and
// each column of A' signed so that its largest-magnitude entry is positive.
StandardizeResult standardize(const RowMatrix& A, const Matrix& B, const StandardizeOptions& opts = {});

// Population variance of each coordinate column.
std::vector<double> column_variances(const CoordinateSpace& space);

// Flips columns so the largest-magnitude entry of each is positive (ties go
// to the lowest row); applies the same flips to the rows of `partner` when
// given. Returns the sign vector.
std::vector<double> canonicalize_signs(RowMatrix& coords, Matrix* partner = nullptr);

inline constexpr std::string_view kSpaceMagic = "FSPSPAC1";
void write_space_binary(std::ostream& out, const CoordinateSpace& space, std::uint64_t config_hash = 0);
CoordinateSpace read_space_binary(std::istream& in, std::uint64_t* config_hash = nullptr);
// item_id,c0,c1,...
void write_space_csv(std::ostream& out, const CoordinateSpace& space);

}  // namespace factorspace
