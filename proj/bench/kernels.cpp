// Serial reference vs OpenMP kernels. Arg "parallel" picks Exec::parallel
// over the serial reference, "threads" caps the OpenMP team.

#include <benchmark/benchmark.h>

#include <random>

#include "factorspace/classify.hpp"
#include "factorspace/factor.hpp"
#include "factorspace/neighbor.hpp"
#include "factorspace/synthetic.hpp"

using namespace factorspace;

namespace {

Exec exec_of(const benchmark::State& state) {
    set_thread_limit(static_cast<int>(state.range(1)));
    return state.range(0) ? Exec::parallel : Exec::serial;
}

void modes(benchmark::internal::Benchmark* b) {
    b->ArgNames({"parallel", "threads"});
    b->Args({0, 1});
    for (int t : {1, 2, 4}) b->Args({1, t});
    b->Unit(benchmark::kMillisecond)->UseRealTime();
}

const PlantedData& ratings() {
    static const PlantedData data = [] {
        PlantedOptions po;
        po.items = 1500;
        po.users = 4000;
        po.density = 0.05;
        return make_planted(po);
    }();
    return data;
}

Factorization model(const RatingDataset& ds, std::size_t d) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 0.1);
    auto f = Factorization::zeros(ModelKind::delta_svd, ds.items(), ds.users(), d, 0.04);
    f.mu = ds.mean_rating();
    for (Eigen::Index k = 0; k < f.A.size(); ++k) f.A.data()[k] = n(rng);
    for (Eigen::Index k = 0; k < f.B.size(); ++k) f.B.data()[k] = n(rng);
    return f;
}

RowMatrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    RowMatrix m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = n(rng);
    return m;
}

void BM_Gradient(benchmark::State& state) {
    const auto& ds = ratings().ratings;
    const auto f = model(ds, 50);
    for (auto _ : state) benchmark::DoNotOptimize(gradient(ds, f, exec_of(state)));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * ds.size()));
}

void BM_Objective(benchmark::State& state) {
    const auto& ds = ratings().ratings;
    const auto f = model(ds, 50);
    for (auto _ : state) benchmark::DoNotOptimize(objective(ds, f, exec_of(state)));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * ds.size()));
}

void BM_DistanceMatrix(benchmark::State& state) {
    PlantedOptions po;
    po.items = 400;
    po.users = 2000;
    const auto data = make_planted(po);
    for (auto _ : state) benchmark::DoNotOptimize(build_distance_matrix(data.ratings, 20.0, exec_of(state)));
}

void BM_GuttmanRhs(benchmark::State& state) {
    const std::size_t n = 1500;
    const RowMatrix X = gaussian(static_cast<Eigen::Index>(n), 10, 2);
    const RowMatrix truth = gaussian(static_cast<Eigen::Index>(n), 10, 3);
    Matrix dense(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < dense.rows(); ++i)
        for (Eigen::Index j = 0; j < dense.cols(); ++j) dense(i, j) = (truth.row(i) - truth.row(j)).norm();
    const auto dm = DistanceMatrix::from_dense(dense);
    RowMatrix out;
    for (auto _ : state) {
        mds_detail::guttman_rhs(dm, X, out, exec_of(state));
        benchmark::DoNotOptimize(out.data());
    }
}

void BM_KnnNeighbors(benchmark::State& state) {
    const RowMatrix train = gaussian(3600, 100, 4), queries = gaussian(540, 100, 5);
    const auto kind = DistanceKind::fitted(DistanceType::cosine, train);
    for (auto _ : state) benchmark::DoNotOptimize(knn_neighbors(train, kind, 9, queries, exec_of(state)));
}

}  // namespace

BENCHMARK(BM_Gradient)->Apply(modes);
BENCHMARK(BM_Objective)->Apply(modes);
BENCHMARK(BM_DistanceMatrix)->Apply(modes);
BENCHMARK(BM_GuttmanRhs)->Apply(modes);
BENCHMARK(BM_KnnNeighbors)->Apply(modes);

BENCHMARK_MAIN();
