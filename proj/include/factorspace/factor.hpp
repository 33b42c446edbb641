#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "factorspace/ingest.hpp"
#include "factorspace/parallel.hpp"
#include "factorspace/types.hpp"

namespace factorspace {

enum class ModelKind { svd, delta_svd, nnmf };

ModelKind parse_model_kind(const std::string& name);
// "SVD", "DSVD", "NNMF": the family label used in space ids and reports.
std::string family_name(ModelKind kind);

// How the delta-SVD bias terms enter the penalty. `squared` is the ridge
// form; `linear` adds delta_i + delta_u unsquared per observation (bounded
// below only while biases stay positive, kept for fidelity experiments).
enum class BiasPenalty { squared, linear };

// Trained factor model: R is approximated by A * B (+ mu + item/user biases
// for delta-SVD). A is I x d with one item per row, B is d x U with one user
// per column.
struct Factorization {
    ModelKind kind = ModelKind::svd;
    RowMatrix A;
    Matrix B;
    double mu = 0.0;
    Vector item_bias;  // size I for delta-SVD, empty otherwise
    Vector user_bias;  // size U for delta-SVD, empty otherwise
    double lambda = 0.0;
    BiasPenalty bias_penalty = BiasPenalty::squared;
    std::uint64_t seed = 0;

    std::size_t items() const { return static_cast<std::size_t>(A.rows()); }
    std::size_t users() const { return static_cast<std::size_t>(B.cols()); }
    std::size_t dims() const { return static_cast<std::size_t>(A.cols()); }
    bool has_biases() const { return kind == ModelKind::delta_svd; }

    // Zero-initialised model of the given shape.
    static Factorization zeros(ModelKind kind, std::size_t items, std::size_t users, std::size_t d,
                               double lambda = 0.0);
};

// Partial derivatives of objective() with the same layout as Factorization's
// free parameters (mu is fixed and has no gradient).
struct Gradient {
    RowMatrix A;
    Matrix B;
    Vector item_bias;
    Vector user_bias;

    double max_abs() const;
};

struct TrainConfig {
    std::size_t d = 10;
    double lambda = 0.04;
    double learning_rate = 1.0;  // initial step scale of the curvature-scaled step
    std::size_t max_epochs = 300;
    double tolerance = 1e-5;     // relative objective improvement
    std::size_t patience = 3;    // consecutive epochs below tolerance before stopping
    std::size_t restarts = 3;
    std::uint64_t seed = 1;
    double init_scale = 0.0;     // <= 0 selects 0.1 / sqrt(d)
    BiasPenalty bias_penalty = BiasPenalty::squared;
    Exec exec = Exec::parallel;

    // Throws ConfigError on invalid values.
    void validate() const;
    double effective_init_scale() const;
};

// Presets for the dimensionalities used in the published experiments.
inline constexpr std::size_t kPresetDims[] = {10, 50, 100};

struct EpochRecord {
    std::size_t restart = 0;
    std::size_t epoch = 0;
    double objective = 0.0;
    double sse = 0.0;
    double step_scale = 0.0;
};

struct TrainResult {
    Factorization model;
    std::vector<EpochRecord> log;  // accepted epochs of every restart
    std::vector<double> restart_objectives;  // NaN for diverged restarts
    std::size_t best_restart = 0;
    Warnings warnings;
};

double predict(const Factorization& f, std::size_t item, std::size_t user);
double sse(const RatingDataset& ds, const Factorization& f, Exec exec = Exec::parallel);
double objective(const RatingDataset& ds, const Factorization& f, Exec exec = Exec::parallel);
Gradient gradient(const RatingDataset& ds, const Factorization& f, Exec exec = Exec::parallel);

// Fits a model of the given kind by curvature-scaled gradient descent and
// returns the restart with the lowest final objective.
TrainResult train(const RatingDataset& ds, ModelKind kind, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// Snapshot I/O. CSV export writes one row per item (external id, optional
// bias, factors) and one row per user.
inline constexpr std::string_view kModelMagic = "FSPMODL1";
void write_model_binary(std::ostream& out, const Factorization& f, std::uint64_t config_hash = 0);
Factorization read_model_binary(std::istream& in, std::uint64_t* config_hash = nullptr);
void write_model_items_csv(std::ostream& out, const Factorization& f, std::span<const ExternalId> item_ids);
void write_model_users_csv(std::ostream& out, const Factorization& f, std::span<const ExternalId> user_ids);
void write_training_log(std::ostream& out, const std::vector<EpochRecord>& log);

}  // namespace factorspace
