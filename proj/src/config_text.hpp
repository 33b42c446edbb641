#pragma once

#include <string>

#include "factorspace/pipeline.hpp"

namespace factorspace::config_text {

// key=value listings of the settings each stage depends on; hashed into
// stage snapshots.
std::string data(const ExperimentConfig& cfg);
std::string model(const ModelSpec& m);
std::string mds(const ExperimentConfig& cfg);
std::string standardize(const ExperimentConfig& cfg);
std::string evaluate(const ExperimentConfig& cfg);
std::string render(const ExperimentConfig& cfg);

}  // namespace factorspace::config_text
