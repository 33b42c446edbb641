#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "factorspace/types.hpp"

namespace factorspace {

struct Rating {
    Index item = 0;
    Index user = 0;
    double value = 0.0;

    friend bool operator==(const Rating&, const Rating&) = default;
};

// Sparse item-user rating matrix. Items and users are densely indexed in
// [0, items) and [0, users); item_ids/user_ids map dense indices back to the
// external identifiers and are sorted ascending. Immutable once built.
class RatingDataset {
public:
    RatingDataset() = default;

    // Validates the invariants (dense indices, unique pairs, scale bounds,
    // sorted unique ids) and throws DataError on violation.
    RatingDataset(std::vector<Rating> ratings, std::vector<ExternalId> item_ids,
                  std::vector<ExternalId> user_ids, double scale_min, double scale_max);

    std::size_t items() const { return item_ids_.size(); }
    std::size_t users() const { return user_ids_.size(); }
    std::size_t size() const { return ratings_.size(); }
    bool empty() const { return ratings_.empty(); }
    double scale_min() const { return scale_min_; }
    double scale_max() const { return scale_max_; }

    std::span<const Rating> ratings() const { return ratings_; }
    std::span<const ExternalId> item_ids() const { return item_ids_; }
    std::span<const ExternalId> user_ids() const { return user_ids_; }

    // Dense index of an external item id, or -1.
    std::ptrdiff_t find_item(ExternalId id) const;

    double mean_rating() const;

    friend bool operator==(const RatingDataset&, const RatingDataset&) = default;

private:
    std::vector<Rating> ratings_;
    std::vector<ExternalId> item_ids_;
    std::vector<ExternalId> user_ids_;
    double scale_min_ = 0.0;
    double scale_max_ = 0.0;
};

// Compressed per-item (or per-user) view of a dataset. Entry k of a row holds
// the partner index and rating; rows are sorted by partner index.
struct RatingIndex {
    std::vector<std::size_t> offsets;     // rows + 1
    std::vector<Index> partner;           // user for item rows, item for user rows
    std::vector<double> value;
    std::vector<std::size_t> rating_pos;  // position of the entry in ds.ratings()

    std::size_t rows() const { return offsets.empty() ? 0 : offsets.size() - 1; }
    std::size_t count(std::size_t row) const { return offsets[row + 1] - offsets[row]; }

    static RatingIndex by_item(const RatingDataset& ds);
    static RatingIndex by_user(const RatingDataset& ds);
};

enum class RatingFormat {
    movielens,  // UserID::MovieID::Rating::Timestamp
    csv,        // headered CSV item,user,rating
    ml100k,     // tab-separated user item rating timestamp (MovieLens 100K u.data)
};

enum class DuplicatePolicy { error, keep_last };

struct ParseOptions {
    double scale_min = 0.5;
    double scale_max = 5.0;
    DuplicatePolicy duplicates = DuplicatePolicy::error;
};

RatingFormat parse_rating_format(const std::string& name);
std::string to_string(RatingFormat f);

// Parses a rating stream. Errors carry the 1-based line number.
RatingDataset parse_ratings(std::istream& in, RatingFormat format, const ParseOptions& opts = {});

// Keeps items with at least min_per_item ratings, then (optionally) users
// with at least min_per_user ratings among the kept items. Users left
// without ratings are always dropped.
RatingDataset filter_min_ratings(const RatingDataset& ds, std::size_t min_per_item,
                                 std::size_t min_per_user = 0);

// Multi-label assignment of retained labels to dataset items.
struct LabelSet {
    std::vector<std::string> labels;                 // sorted by name
    std::vector<std::vector<std::uint32_t>> assignments;  // per item, sorted label indices
    std::vector<double> frequencies;                 // per label, fraction of items
    std::vector<ExternalId> item_ids;                // item universe (copied from dataset)

    std::size_t items() const { return assignments.size(); }
    bool holds(std::size_t item, std::size_t label) const;
    // Per-item boolean membership for one label.
    std::vector<std::uint8_t> indicator(std::size_t label) const;
    double mean_labels_per_item() const;
};

enum class LabelFormat {
    csv,        // headered CSV item_id,label
    movielens,  // MovieID::Title::Genre|Genre (movies.dat)
    ml100k,     // u.item: id|title|date|video|url|19 genre flags
};

enum class UnknownItemPolicy { skip, fail };

struct LabelOptions {
    double cutoff = 0.05;
    UnknownItemPolicy unknown_items = UnknownItemPolicy::skip;
    LabelFormat format = LabelFormat::csv;
};

LabelFormat parse_label_format(const std::string& name);

// Parses label assignments for the items of `ds` and drops labels held by
// fewer than cutoff * I items. Skipped unknown items are reported in
// `warnings` when given.
LabelSet parse_labels(std::istream& in, const RatingDataset& ds, const LabelOptions& opts = {},
                      Warnings* warnings = nullptr);

// Snapshots. The binary form is exact; the CSV form writes
// item_id,user_id,rating using external ids and re-parses with
// RatingFormat::csv.
void write_dataset_binary(std::ostream& out, const RatingDataset& ds, std::uint64_t config_hash = 0);
RatingDataset read_dataset_binary(std::istream& in, std::uint64_t* config_hash = nullptr);
void write_dataset_csv(std::ostream& out, const RatingDataset& ds);
// Sidecar: kind,index,external_id for every item and user.
void write_id_map(std::ostream& out, const RatingDataset& ds);

void write_labels_csv(std::ostream& out, const LabelSet& labels);
void write_label_frequencies(std::ostream& out, const LabelSet& labels);
void write_labels_binary(std::ostream& out, const LabelSet& labels, std::uint64_t config_hash = 0);
LabelSet read_labels_binary(std::istream& in, std::uint64_t* config_hash = nullptr);

inline constexpr std::string_view kDatasetMagic = "FSPDSET1";
inline constexpr std::string_view kLabelsMagic = "FSPLABL1";

}  // namespace factorspace
