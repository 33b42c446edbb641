#include "factorspace/standardize.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "factorspace/error.hpp"
#include "factorspace/snapshot.hpp"

namespace factorspace {

std::string CoordinateSpace::id() const { return fmt::format("{}-{}", family, nominal_dims); }

std::vector<double> canonicalize_signs(RowMatrix& coords, Matrix* partner) {
    std::vector<double> signs(static_cast<std::size_t>(coords.cols()), 1.0);
    for (Eigen::Index c = 0; c < coords.cols(); ++c) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < coords.rows(); ++i) {
            const double v = std::abs(coords(i, c));
            if (v > best) {  // strict: first (lowest) index wins ties
                best = v;
                arg = i;
            }
        }
        if (coords.rows() > 0 && coords(arg, c) < 0.0) {
            coords.col(c) *= -1.0;
            if (partner) partner->row(c) *= -1.0;
            signs[static_cast<std::size_t>(c)] = -1.0;
        }
    }
    return signs;
}

namespace {

// Thin QR: X (m x d) = Q (m x k) R (k x d), k = min(m, d).
void thin_qr(const Matrix& X, Matrix& Q, Matrix& R) {
    const auto m = X.rows(), d = X.cols();
    const auto k = std::min(m, d);
    Eigen::HouseholderQR<Matrix> qr(X);
    Q = qr.householderQ() * Matrix::Identity(m, k);
    R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
}

}  // namespace

StandardizeResult standardize(const RowMatrix& A, const Matrix& B, const StandardizeOptions& opts) {
    if (A.cols() != B.rows())
        throw ConfigError(fmt::format("standardize: A is {}x{} but B is {}x{}", A.rows(), A.cols(), B.rows(), B.cols()));
    if (!A.allFinite() || !B.allFinite()) throw NumericalError("standardize: non-finite input");

    StandardizeResult out;
    const auto d = A.cols();
    out.space.nominal_dims = static_cast<std::size_t>(d);

    Matrix Qa, Ra, Qb, Rb;
    thin_qr(A, Qa, Ra);
    thin_qr(B.transpose(), Qb, Rb);
    const Matrix core = Ra * Rb.transpose();  // ka x kb

    Eigen::JacobiSVD<Matrix> svd(core, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& s = svd.singularValues();  // decreasing
    const double smax = s.size() ? s[0] : 0.0;
    Eigen::Index rank = 0;
    while (rank < s.size() && s[rank] > opts.rank_tolerance * smax && s[rank] > 0.0) ++rank;
    if (rank < d)
        out.warnings.push_back(fmt::format("product A*B has rank {} < d = {}; returning {} columns", rank, d, rank));
    for (Eigen::Index r = 0; r + 1 < rank; ++r)
        if (s[r] - s[r + 1] <= opts.degenerate_gap * s[r])
            out.warnings.push_back(fmt::format(
                "singular values {} and {} nearly coincide ({} vs {}); axes are unique only within their subspace", r,
                r + 1, s[r], s[r + 1]));

    const Matrix U = Qa * svd.matrixU().leftCols(rank);
    const Matrix V = Qb * svd.matrixV().leftCols(rank);  // U x rank; V^T is the row-orthonormal factor
    const Vector root = s.head(rank).cwiseSqrt();

    out.space.coords = U * root.asDiagonal();
    out.user_coords = root.asDiagonal() * V.transpose();
    canonicalize_signs(out.space.coords, &out.user_coords);
    out.space.column_scales.assign(s.data(), s.data() + rank);
    return out;
}

std::vector<double> column_variances(const CoordinateSpace& space) {
    std::vector<double> var(space.dims(), 0.0);
    const auto n = space.coords.rows();
    if (n == 0) return var;
    for (Eigen::Index c = 0; c < space.coords.cols(); ++c) {
        const auto col = space.coords.col(c);
        const double mean = col.mean();
        var[static_cast<std::size_t>(c)] = (col.array() - mean).square().sum() / static_cast<double>(n);
    }
    return var;
}

void write_space_binary(std::ostream& out, const CoordinateSpace& space, std::uint64_t config_hash) {
    BinaryWriter w(out);
    w.header(kSpaceMagic, 1, config_hash);
    w.str(space.family);
    w.u64(space.nominal_dims);
    w.str(space.provenance);
    w.u64(space.items());
    w.u64(space.dims());
    w.f64s(space.column_scales);
    w.i64s(space.item_ids);
    w.f64s({space.coords.data(), static_cast<std::size_t>(space.coords.size())});
}

CoordinateSpace read_space_binary(std::istream& in, std::uint64_t* config_hash) {
    BinaryReader r(in);
    const auto h = r.header(kSpaceMagic, 1);
    if (config_hash) *config_hash = h.config_hash;
    CoordinateSpace s;
    s.family = r.str();
    s.nominal_dims = r.u64();
    s.provenance = r.str();
    const auto I = r.u64(), d = r.u64();
    if (I > (1ULL << 32) || d > (1ULL << 16)) throw DataError("corrupt space snapshot");
    s.column_scales.resize(d);
    r.f64s(s.column_scales);
    s.item_ids.resize(I);
    r.i64s(s.item_ids);
    s.coords.resize(static_cast<Eigen::Index>(I), static_cast<Eigen::Index>(d));
    r.f64s({s.coords.data(), static_cast<std::size_t>(s.coords.size())});
    return s;
}

void write_space_csv(std::ostream& out, const CoordinateSpace& space) {
    out << "item_id";
    for (std::size_t c = 0; c < space.dims(); ++c) out << ",c" << c;
    out << '\n';
    for (Eigen::Index i = 0; i < space.coords.rows(); ++i) {
        out << (static_cast<std::size_t>(i) < space.item_ids.size() ? space.item_ids[static_cast<std::size_t>(i)] : i);
        for (Eigen::Index c = 0; c < space.coords.cols(); ++c) out << ',' << format_double(space.coords(i, c));
        out << '\n';
    }
}

}  // namespace factorspace
