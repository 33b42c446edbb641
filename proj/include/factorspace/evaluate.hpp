#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "factorspace/classify.hpp"
#include "factorspace/ingest.hpp"
#include "factorspace/parallel.hpp"
#include "factorspace/standardize.hpp"

namespace factorspace {

struct SplitPair {
    std::vector<std::uint32_t> train;  // ascending item indices
    std::vector<std::uint32_t> test;   // ascending, disjoint from train
};

struct SplitOptions {
    std::size_t pairs = 20;
    double train_fraction = 0.40;
    double test_fraction = 0.10;
    // true: test size = round(test_fraction * (I - |train|)); false: of all items.
    bool test_of_remaining = true;
};

struct SplitPlan {
    std::vector<SplitPair> pairs;
    SplitOptions options;
    std::uint64_t seed = 0;
    std::size_t items = 0;
};

// Deterministic in (items, options, seed). Pair p shuffles with its own
// derived seed, so plans with more pairs extend plans with fewer.
SplitPlan make_splits(std::size_t items, const SplitOptions& opts, std::uint64_t seed);
// split,role,item_index
void write_splits_csv(std::ostream& out, const SplitPlan& plan);

// Confusion counts on one test set.
struct Outcome {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
    double alpha_tp() const { return fraction(tp); }
    double alpha_fp() const { return fraction(fp); }
    double alpha_fn() const { return fraction(fn); }
    double alpha_tn() const { return fraction(tn); }
    double accuracy() const { return fraction(tp + tn); }
    // Accuracy of always answering the more frequent test class.
    double majority_accuracy() const { return fraction(std::max(tp + fn, fp + tn)); }

    void add(bool truth, bool predicted);

private:
    double fraction(std::uint64_t c) const {
        return total() ? static_cast<double>(c) / static_cast<double>(total()) : 0.0;
    }
};

// (acc - acc_maj) / (1 - acc_maj); empty when acc_maj = 1 (single-class test
// set) or the outcome is empty.
std::optional<double> kappa(const Outcome& o);

struct ClassifierSpec {
    enum class Type { svm, knn, majority };
    Type type = Type::svm;
    KernelSpec kernel;
    double C = 4.0;
    std::size_t k = 1;
    DistanceType distance = DistanceType::euclidean;

    // "SVM-lin", "SVM-RBF", "9NN-cos", "Majority".
    std::string id() const;
    static ClassifierSpec parse(const std::string& id, double C = 4.0, double gamma = 0.1);
};

// The 14 classifiers of the published protocol, in table order.
std::vector<ClassifierSpec> default_classifiers(double C = 4.0, double gamma = 0.1);

struct EvalOptions {
    bool standardize_svm_features = false;
    SvmOptions svm;
    Exec exec = Exec::parallel;
};

struct KappaCell {
    std::size_t space = 0;       // index into EvalReport::spaces
    std::size_t classifier = 0;  // index into EvalReport::classifiers
    std::size_t genre = 0;       // index into EvalReport::genres
    std::size_t split = 0;
    Outcome outcome;
    std::optional<double> kappa;
};

struct SpaceKey {
    std::string family;
    std::size_t d = 0;
    std::string id() const;
};

struct Aggregate {
    std::size_t space = 0;
    std::size_t classifier = 0;
    std::optional<std::size_t> genre;  // empty: over all genres
    double mean = 0.0;
    std::size_t cells = 0;             // defined cells averaged
};

struct EvalReport {
    std::vector<SpaceKey> spaces;
    std::vector<std::string> classifiers;
    std::vector<std::string> genres;
    std::size_t splits = 0;
    std::vector<KappaCell> cells;        // ordered space, classifier, genre, split
    std::vector<Aggregate> genre_means;  // per (space, classifier, genre), over splits
    std::vector<Aggregate> means;        // per (space, classifier), over genre x split
    Warnings warnings;

    const KappaCell& cell(std::size_t space, std::size_t classifier, std::size_t genre, std::size_t split) const;
    std::optional<double> mean(std::size_t space, std::size_t classifier) const;
    std::optional<double> genre_mean(std::size_t space, std::size_t classifier, std::size_t genre) const;
    std::optional<std::size_t> find_space(const std::string& id) const;
    std::optional<std::size_t> find_classifier(const std::string& id) const;
};

// Evaluates every (space, classifier, genre, split) cell. All spaces must
// list the same item ids as the label set, in the same order.
EvalReport run_experiment(const std::vector<CoordinateSpace>& spaces, const LabelSet& labels, const SplitPlan& plan,
                          const std::vector<ClassifierSpec>& classifiers, const EvalOptions& opts = {});

// Recomputes genre_means and means from cells.
void aggregate(EvalReport& report);

struct RenderOptions {
    double bold_threshold = 0.10;
    double genre_bold_threshold = 0.20;
    std::vector<std::string> genre_classifiers = {"SVM-RBF"};
    std::vector<std::size_t> genre_dims;  // empty: every dimensionality
};

struct RenderedTables {
    std::string text;  // aligned plain text, emphasised cells as **x**
    std::string tsv;   // same layout, numeric cells only
};

// Two decimals, half away from zero; negatives that round to zero keep
// their sign ("-0.00").
std::string format_kappa(double v);

// One classifier x dimensionality table per space family, then one
// genre x space table per classifier in opts.genre_classifiers.
RenderedTables render_tables(const EvalReport& report, const RenderOptions& opts = {});

// space,d,classifier,genre,split,kappa (kappa "NA" for excluded cells)
void write_cells_csv(std::ostream& out, const EvalReport& report);
// space,d,classifier,mean_kappa,cells
void write_means_csv(std::ostream& out, const EvalReport& report);
// space,d,classifier,genre,mean_kappa,cells
void write_genre_means_csv(std::ostream& out, const EvalReport& report);

inline constexpr std::string_view kReportMagic = "FSPEVAL1";
void write_report_binary(std::ostream& out, const EvalReport& report, std::uint64_t config_hash = 0);
EvalReport read_report_binary(std::istream& in, std::uint64_t* config_hash = nullptr);

}  // namespace factorspace
