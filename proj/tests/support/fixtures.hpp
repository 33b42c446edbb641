#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "factorspace/factor.hpp"
#include "factorspace/ingest.hpp"

namespace fixture {

using namespace factorspace;

// Dataset holding every entry of R where mask is true (all entries when the
// mask is empty). Scale bounds are wide enough for arbitrary reals.
inline RatingDataset from_matrix(const Eigen::MatrixXd& R, const std::vector<std::vector<bool>>& mask = {}) {
    std::vector<Rating> ratings;
    for (Eigen::Index i = 0; i < R.rows(); ++i)
        for (Eigen::Index u = 0; u < R.cols(); ++u)
            if (mask.empty() || mask[static_cast<std::size_t>(i)][static_cast<std::size_t>(u)])
                ratings.push_back({static_cast<Index>(i), static_cast<Index>(u), R(i, u)});
    std::vector<ExternalId> items(static_cast<std::size_t>(R.rows())), users(static_cast<std::size_t>(R.cols()));
    for (std::size_t i = 0; i < items.size(); ++i) items[i] = static_cast<ExternalId>(i + 1);
    for (std::size_t u = 0; u < users.size(); ++u) users[u] = static_cast<ExternalId>(u + 1);
    return RatingDataset(std::move(ratings), std::move(items), std::move(users), -1e6, 1e6);
}

// Random sparse instance on the 0.5 rating grid; every item and user keeps
// at least one rating.
inline RatingDataset random_dataset(std::mt19937_64& rng, std::size_t items, std::size_t users, double density) {
    std::bernoulli_distribution keep(density);
    std::uniform_int_distribution<int> half(1, 10);
    std::vector<std::vector<bool>> mask(items, std::vector<bool>(users, false));
    for (std::size_t i = 0; i < items; ++i)
        for (std::size_t u = 0; u < users; ++u) mask[i][u] = keep(rng);
    for (std::size_t i = 0; i < items; ++i) mask[i][i % users] = true;
    for (std::size_t u = 0; u < users; ++u) mask[u % items][u] = true;
    Eigen::MatrixXd R(static_cast<Eigen::Index>(items), static_cast<Eigen::Index>(users));
    for (Eigen::Index i = 0; i < R.rows(); ++i)
        for (Eigen::Index u = 0; u < R.cols(); ++u) R(i, u) = 0.5 * half(rng);
    return from_matrix(R, mask);
}

// Model with normal(0, scale) factors (uniform(0, 2 scale) for NNMF) and
// normal biases.
inline Factorization random_model(std::mt19937_64& rng, ModelKind kind, const RatingDataset& ds, std::size_t d,
                                  double lambda, double scale = 0.7) {
    auto f = Factorization::zeros(kind, ds.items(), ds.users(), d, lambda);
    std::normal_distribution<double> normal(0.0, scale);
    std::uniform_real_distribution<double> pos(0.0, 2.0 * scale);
    auto draw = [&] { return kind == ModelKind::nnmf ? pos(rng) : normal(rng); };
    for (Eigen::Index i = 0; i < f.A.size(); ++i) f.A.data()[i] = draw();
    for (Eigen::Index i = 0; i < f.B.size(); ++i) f.B.data()[i] = draw();
    if (kind == ModelKind::delta_svd) {
        f.mu = ds.mean_rating();
        for (Eigen::Index i = 0; i < f.item_bias.size(); ++i) f.item_bias[i] = normal(rng);
        for (Eigen::Index u = 0; u < f.user_bias.size(); ++u) f.user_bias[u] = normal(rng);
    }
    return f;
}

}  // namespace fixture
