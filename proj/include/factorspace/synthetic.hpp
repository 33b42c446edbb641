#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "factorspace/ingest.hpp"

namespace factorspace {

// Ratings generated from known item and user factors. Label k is held by
// items whose factor k exceeds label_threshold, so each planted label is a
// half-space in the true item space.
struct PlantedOptions {
    std::size_t items = 500;
    std::size_t users = 2000;
    std::size_t dims = 5;
    double density = 0.1;        // fraction of (item, user) pairs observed
    double noise = 0.25;         // sd of Gaussian rating noise
    double spread = 0.8;         // sd of the factor term
    double mean = 3.0;
    bool quantize = true;        // round to the 0.5 grid and clamp to [0.5, 5]
    std::size_t planted_labels = 1;
    double label_threshold = 0.0;
    std::uint64_t seed = 1;
};

struct PlantedData {
    RatingDataset ratings;
    RowMatrix item_factors;                        // items x dims
    std::vector<std::vector<std::string>> labels;  // per item
};

PlantedData make_planted(const PlantedOptions& opts);

// item_id,label CSV readable by parse_labels with LabelFormat::csv.
void write_planted_labels(std::ostream& out, const PlantedData& data);
LabelSet planted_label_set(const PlantedData& data, double cutoff = 0.0);

}  // namespace factorspace
