#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "factorspace/error.hpp"
#include "factorspace/factor.hpp"

using namespace factorspace;

namespace {

double max_rel_error(const Gradient& g, const Gradient& ref) {
    double scale = std::max(1.0, ref.max_abs()), err = 0.0;
    auto cmp = [&](const auto& a, const auto& b) {
        for (Eigen::Index k = 0; k < a.size(); ++k) err = std::max(err, std::abs(a.data()[k] - b.data()[k]) / scale);
    };
    cmp(g.A, ref.A);
    cmp(g.B, ref.B);
    cmp(g.item_bias, ref.item_bias);
    cmp(g.user_bias, ref.user_bias);
    return err;
}

}  // namespace

TEST(Sse, Examples) {
    const auto empty = RatingDataset();
    EXPECT_EQ(sse(empty, Factorization::zeros(ModelKind::svd, 0, 0, 2)), 0.0);

    Eigen::MatrixXd R(1, 1);
    R << 4.0;
    const auto ds = fixture::from_matrix(R);
    auto f = Factorization::zeros(ModelKind::svd, 1, 1, 1);
    f.A(0, 0) = 2.5;
    f.B(0, 0) = 1.0;
    EXPECT_EQ(sse(ds, f), 2.25);
    f.A(0, 0) = 4.0;
    EXPECT_EQ(sse(ds, f), 0.0);

    EXPECT_THROW(sse(ds, Factorization::zeros(ModelKind::svd, 2, 1, 1)), ConfigError);
}

TEST(Predict, Examples) {
    auto d = Factorization::zeros(ModelKind::delta_svd, 3, 4, 2);
    d.mu = 3.5;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t u = 0; u < 4; ++u) EXPECT_EQ(predict(d, i, u), 3.5);

    auto s = Factorization::zeros(ModelKind::svd, 1, 1, 2);
    s.A << 1, 2;
    s.B << 3, -1;
    EXPECT_EQ(predict(s, 0, 0), 1.0);

    EXPECT_EQ(predict(Factorization::zeros(ModelKind::nnmf, 2, 2, 3), 1, 1), 0.0);
    EXPECT_THROW(predict(s, 1, 0), ConfigError);
    EXPECT_THROW(predict(s, 0, 1), ConfigError);
}

TEST(Objective, Examples) {
    std::mt19937_64 rng(5);
    const auto ds = fixture::random_dataset(rng, 6, 7, 0.5);
    for (auto kind : {ModelKind::svd, ModelKind::delta_svd, ModelKind::nnmf}) {
        const auto f = fixture::random_model(rng, kind, ds, 2, 0.0);
        EXPECT_EQ(objective(ds, f), sse(ds, f));
    }

    auto zero = Factorization::zeros(ModelKind::delta_svd, ds.items(), ds.users(), 3, 0.5);
    zero.mu = ds.mean_rating();
    double expect = 0.0;
    for (const auto& r : ds.ratings()) expect += (r.value - zero.mu) * (r.value - zero.mu);
    EXPECT_NEAR(objective(ds, zero), expect, 1e-12 * expect);

    Eigen::MatrixXd R(1, 1);
    R << 1.0;
    const auto one = fixture::from_matrix(R);
    auto f = Factorization::zeros(ModelKind::svd, 1, 1, 1, 0.04);
    f.A(0, 0) = 1.0;
    f.B(0, 0) = 1.0;
    EXPECT_DOUBLE_EQ(objective(one, f), 0.08);
}

TEST(Objective, MatchesDirectFormula) {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 30; ++rep) {
        const auto ds = fixture::random_dataset(rng, 8, 9, 0.4);
        for (auto kind : {ModelKind::svd, ModelKind::delta_svd, ModelKind::nnmf}) {
            auto f = fixture::random_model(rng, kind, ds, 3, 0.1);
            if (rep % 2) f.bias_penalty = BiasPenalty::linear;
            const double ref = oracle::objective(ds, f);
            EXPECT_NEAR(objective(ds, f, Exec::serial), ref, 1e-12 * ref);
            EXPECT_NEAR(objective(ds, f, Exec::parallel), ref, 1e-12 * ref);
        }
    }
}

TEST(Gradient, MatchesFiniteDifferences) {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        const auto ds = fixture::random_dataset(rng, 1 + rng() % 8, 1 + rng() % 8, 0.5);
        for (auto kind : {ModelKind::svd, ModelKind::delta_svd, ModelKind::nnmf}) {
            auto f = fixture::random_model(rng, kind, ds, 1 + rng() % 3, 0.04);
            if (rep % 3 == 0) f.bias_penalty = BiasPenalty::linear;
            const auto fd = oracle::finite_difference_gradient(ds, f);
            EXPECT_LT(max_rel_error(gradient(ds, f, Exec::serial), fd), 1e-5);
            EXPECT_LT(max_rel_error(gradient(ds, f, Exec::parallel), fd), 1e-5);
        }
    }
}

TEST(Gradient, ExactlyZeroAtUnregularizedPerfectFit) {
    std::mt19937_64 rng(2);
    Eigen::MatrixXd a = Eigen::MatrixXd::Random(5, 2), b = Eigen::MatrixXd::Random(2, 6);
    // dyadic entries make the products exact
    a = (a * 8).array().round() / 8;
    b = (b * 8).array().round() / 8;
    const auto ds = fixture::from_matrix(a * b);
    auto f = Factorization::zeros(ModelKind::svd, 5, 6, 2, 0.0);
    f.A = a;
    f.B = b;
    EXPECT_EQ(sse(ds, f), 0.0);
    EXPECT_EQ(gradient(ds, f).max_abs(), 0.0);
    EXPECT_EQ(gradient(ds, f, Exec::serial).max_abs(), 0.0);
}

TEST(Gradient, StationaryAfterTraining) {
    Eigen::VectorXd a(4), b(5);
    a << 1.0, 2.0, -1.0, 0.5;
    b << 1.0, -2.0, 0.5, 1.5, 1.0;
    const auto ds = fixture::from_matrix(a * b.transpose());
    TrainConfig cfg;
    cfg.d = 1;
    cfg.lambda = 0.0;
    cfg.max_epochs = 2000;
    cfg.tolerance = 1e-15;
    cfg.restarts = 1;
    const auto res = train(ds, ModelKind::svd, cfg);
    EXPECT_LT(gradient(ds, res.model).max_abs(), 1e-8);
}

TEST(Train, RankOneRecovery) {
    Eigen::VectorXd a(6), b(7);
    a << 1.0, 2.0, 0.5, 1.5, 3.0, 0.7;
    b << 0.3, 1.2, 2.0, 0.8, 1.1, 0.4, 2.5;
    const Eigen::MatrixXd R = a * b.transpose();
    const auto ds = fixture::from_matrix(R);
    for (auto kind : {ModelKind::svd, ModelKind::nnmf}) {
        TrainConfig cfg;
        cfg.d = 1;
        cfg.lambda = 0.0;
        cfg.max_epochs = 5000;
        cfg.tolerance = 1e-14;
        cfg.restarts = 1;
        const auto res = train(ds, kind, cfg);
        EXPECT_LT(sse(ds, res.model), 1e-6 * R.squaredNorm()) << family_name(kind);
    }
}

TEST(Train, InvalidConfigRejected) {
    std::mt19937_64 rng(1);
    const auto ds = fixture::random_dataset(rng, 4, 4, 0.5);
    TrainConfig cfg;
    cfg.d = 0;
    EXPECT_THROW(train(ds, ModelKind::svd, cfg), ConfigError);
    cfg = {};
    cfg.lambda = -1;
    EXPECT_THROW(train(ds, ModelKind::svd, cfg), ConfigError);
    cfg = {};
    cfg.restarts = 0;
    EXPECT_THROW(train(ds, ModelKind::svd, cfg), ConfigError);
    cfg = {};
    cfg.tolerance = 0;
    EXPECT_THROW(train(ds, ModelKind::svd, cfg), ConfigError);
    EXPECT_THROW(train(RatingDataset(), ModelKind::svd, TrainConfig{}), DataError);
}

TEST(Train, DeterministicMonotoneAndFeasible) {
    std::mt19937_64 rng(4);
    const auto ds = fixture::random_dataset(rng, 20, 25, 0.3);
    for (auto kind : {ModelKind::svd, ModelKind::delta_svd, ModelKind::nnmf}) {
        TrainConfig cfg;
        cfg.d = 3;
        cfg.max_epochs = 80;
        cfg.seed = 99;
        std::vector<EpochRecord> seen;
        const auto a = train(ds, kind, cfg, [&](const EpochRecord& e) { seen.push_back(e); });
        const auto b = train(ds, kind, cfg);
        EXPECT_TRUE(a.model.A == b.model.A);
        EXPECT_TRUE(a.model.B == b.model.B);
        EXPECT_TRUE(a.model.item_bias == b.model.item_bias);
        EXPECT_EQ(seen.size(), a.log.size());
        EXPECT_EQ(a.restart_objectives.size(), 3u);
        for (std::size_t k = 1; k < a.log.size(); ++k)
            if (a.log[k].restart == a.log[k - 1].restart) EXPECT_LE(a.log[k].objective, a.log[k - 1].objective);
        const double best = a.restart_objectives[a.best_restart];
        for (double o : a.restart_objectives) EXPECT_LE(best, o);
        EXPECT_NEAR(objective(ds, a.model), best, 1e-9 * best);
        if (kind == ModelKind::nnmf) {
            EXPECT_GE(a.model.A.minCoeff(), 0.0);
            EXPECT_GE(a.model.B.minCoeff(), 0.0);
        }
        if (kind == ModelKind::delta_svd) EXPECT_EQ(a.model.mu, ds.mean_rating());
    }
}

TEST(Train, ThreadCountDoesNotChangeResult) {
    std::mt19937_64 rng(6);
    const auto ds = fixture::random_dataset(rng, 40, 60, 0.2);
    TrainConfig cfg;
    cfg.d = 4;
    cfg.max_epochs = 40;
    cfg.restarts = 1;
    set_thread_limit(1);
    const auto one = train(ds, ModelKind::delta_svd, cfg);
    set_thread_limit(3);
    const auto three = train(ds, ModelKind::delta_svd, cfg);
    set_thread_limit(0);
    EXPECT_TRUE(one.model.A == three.model.A);
    EXPECT_TRUE(one.model.B == three.model.B);
    EXPECT_TRUE(one.model.user_bias == three.model.user_bias);
}

TEST(Train, AllRestartsDivergingIsNumericalError) {
    std::vector<Rating> r{{0, 0, 1e200}};
    const RatingDataset ds(r, {1}, {1}, 0.0, 1e300);
    TrainConfig cfg;
    cfg.d = 1;
    cfg.restarts = 2;
    EXPECT_THROW(train(ds, ModelKind::svd, cfg), NumericalError);
}

TEST(Sse, InvariantUnderInvertibleTransform) {
    std::mt19937_64 rng(12);
    const auto ds = fixture::random_dataset(rng, 12, 15, 0.4);
    for (int rep = 0; rep < 20; ++rep) {
        auto f = fixture::random_model(rng, ModelKind::svd, ds, 3, 0.0);
        Eigen::MatrixXd M = Eigen::MatrixXd::Random(3, 3) + 2.0 * Eigen::MatrixXd::Identity(3, 3);
        auto g = f;
        g.A = f.A * M;
        g.B = M.inverse() * f.B;
        const double s = sse(ds, f);
        EXPECT_NEAR(sse(ds, g), s, 1e-10 * s);
    }
}

TEST(ParallelKernels, AgreeWithSerialReference) {
    std::mt19937_64 rng(30);
    const auto ds = fixture::random_dataset(rng, 50, 70, 0.3);
    for (auto kind : {ModelKind::svd, ModelKind::delta_svd, ModelKind::nnmf}) {
        const auto f = fixture::random_model(rng, kind, ds, 5, 0.04);
        const double s_ref = sse(ds, f, Exec::serial);
        const auto g_ref = gradient(ds, f, Exec::serial);
        for (int threads : {1, 2, 4}) {
            set_thread_limit(threads);
            EXPECT_NEAR(sse(ds, f, Exec::parallel), s_ref, 1e-12 * s_ref);
            EXPECT_LT(max_rel_error(gradient(ds, f, Exec::parallel), g_ref), 1e-12);
        }
        set_thread_limit(1);
        const auto g1 = gradient(ds, f);
        const double s1 = sse(ds, f);
        set_thread_limit(4);
        EXPECT_TRUE(gradient(ds, f).A == g1.A);
        EXPECT_EQ(sse(ds, f), s1);
        set_thread_limit(0);
    }
}

TEST(ModelIo, RoundTripAndCsv) {
    std::mt19937_64 rng(3);
    const auto ds = fixture::random_dataset(rng, 5, 6, 0.5);
    for (auto kind : {ModelKind::svd, ModelKind::delta_svd, ModelKind::nnmf}) {
        auto f = fixture::random_model(rng, kind, ds, 2, 0.04);
        f.seed = 77;
        std::stringstream bin;
        write_model_binary(bin, f, 5);
        std::uint64_t h = 0;
        const auto back = read_model_binary(bin, &h);
        EXPECT_EQ(h, 5u);
        EXPECT_EQ(back.kind, f.kind);
        EXPECT_TRUE(back.A == f.A);
        EXPECT_TRUE(back.B == f.B);
        EXPECT_TRUE(back.item_bias == f.item_bias);
        EXPECT_EQ(back.mu, f.mu);
        EXPECT_EQ(back.lambda, f.lambda);
        EXPECT_EQ(back.seed, 77u);

        std::stringstream items, users;
        write_model_items_csv(items, f, ds.item_ids());
        write_model_users_csv(users, f, ds.user_ids());
        const auto item_text = items.str(), user_text = users.str();
        EXPECT_EQ(std::count(item_text.begin(), item_text.end(), '\n'), 6);
        EXPECT_EQ(std::count(user_text.begin(), user_text.end(), '\n'), 7);
    }
    EXPECT_EQ(parse_model_kind("delta_svd"), ModelKind::delta_svd);
    EXPECT_THROW(parse_model_kind("pca"), ConfigError);
}
