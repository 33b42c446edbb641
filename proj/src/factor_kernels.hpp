#pragma once

// Inner loops of the factor-model trainer. Every kernel takes an Exec flag:
// with Exec::parallel the loops run under OpenMP, otherwise on the calling
// thread. Because each output element is owned by one loop iteration and
// partial sums are reduced over fixed-size chunks in index order, both modes
// produce bitwise-identical results.

#include <cstddef>
#include <vector>

#include "factorspace/factor.hpp"

namespace factorspace::kernels {

inline constexpr std::size_t kReduceChunk = 4096;

// Per-dataset structure reused across epochs.
struct FactorTopology {
    explicit FactorTopology(const RatingDataset& ds);

    const RatingDataset& ds;
    std::vector<std::size_t> item_offsets;  // ratings are sorted by item
    RatingIndex by_user;
    std::vector<double> item_count;
    std::vector<double> user_count;
};

// Sum of term(k) for k in [0, n) over fixed chunks, reduced in chunk order.
template <class Term>
double chunked_sum(std::size_t n, Term term, Exec exec) {
    const std::size_t chunks = (n + kReduceChunk - 1) / kReduceChunk;
    std::vector<double> partial(chunks, 0.0);
    const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        const std::size_t lo = static_cast<std::size_t>(c) * kReduceChunk;
        const std::size_t hi = std::min(n, lo + kReduceChunk);
        double s = 0.0;
        for (std::size_t k = lo; k < hi; ++k) s += term(k);
        partial[static_cast<std::size_t>(c)] = s;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

// residual[k] = r_k - prediction for rating k.
void residuals(const FactorTopology& topo, const Factorization& f, std::vector<double>& residual, Exec exec);

double sum_squares(const std::vector<double>& residual, Exec exec);

// Regulariser without the lambda factor.
double penalty(const FactorTopology& topo, const Factorization& f, Exec exec);

void gradient_items(const FactorTopology& topo, const Factorization& f, const std::vector<double>& residual,
                    Gradient& g, Exec exec);
void gradient_users(const FactorTopology& topo, const Factorization& f, const std::vector<double>& residual,
                    Gradient& g, Exec exec);

// One curvature-scaled step on the item block (A rows and item biases) or
// the user block. The step for each parameter is scale * g / h with h the
// diagonal of the objective's Hessian for that parameter. NNMF entries are
// projected onto [0, inf).
void step_items(const FactorTopology& topo, Factorization& f, const std::vector<double>& residual, double scale,
                Exec exec);
void step_users(const FactorTopology& topo, Factorization& f, const std::vector<double>& residual, double scale,
                Exec exec);

// Serial reference implementations: literal per-rating loops.
namespace reference {
double sse(const RatingDataset& ds, const Factorization& f);
double objective(const RatingDataset& ds, const Factorization& f);
Gradient gradient(const RatingDataset& ds, const Factorization& f);
}  // namespace reference

}  // namespace factorspace::kernels
