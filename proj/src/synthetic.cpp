#include "factorspace/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "factorspace/error.hpp"

namespace factorspace {

PlantedData make_planted(const PlantedOptions& o) {
    if (o.items == 0 || o.users == 0 || o.dims == 0) throw ConfigError("planted data needs items, users and dims > 0");
    if (!(o.density > 0.0 && o.density <= 1.0)) throw ConfigError("planted density must be in (0, 1]");
    if (o.planted_labels > o.dims) throw ConfigError("more planted labels than dimensions");

    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    PlantedData out;
    out.item_factors.resize(static_cast<Eigen::Index>(o.items), static_cast<Eigen::Index>(o.dims));
    for (Eigen::Index i = 0; i < out.item_factors.rows(); ++i)
        for (Eigen::Index r = 0; r < out.item_factors.cols(); ++r) out.item_factors(i, r) = normal(rng);
    Matrix users(static_cast<Eigen::Index>(o.dims), static_cast<Eigen::Index>(o.users));
    for (Eigen::Index u = 0; u < users.cols(); ++u)
        for (Eigen::Index r = 0; r < users.rows(); ++r) users(r, u) = normal(rng);

    const double scale = o.spread / std::sqrt(static_cast<double>(o.dims));
    auto value = [&](std::size_t i, std::size_t u) {
        double v = o.mean + scale * out.item_factors.row(static_cast<Eigen::Index>(i)).dot(users.col(static_cast<Eigen::Index>(u))) +
                   o.noise * normal(rng);
        if (o.quantize) v = std::clamp(std::round(v * 2.0) / 2.0, 0.5, 5.0);
        return v;
    };

    std::vector<Rating> ratings;
    std::vector<std::uint8_t> user_seen(o.users, 0);
    for (std::size_t i = 0; i < o.items; ++i) {
        bool any = false;
        for (std::size_t u = 0; u < o.users; ++u) {
            if (unit(rng) >= o.density) continue;
            ratings.push_back({static_cast<Index>(i), static_cast<Index>(u), value(i, u)});
            user_seen[u] = 1;
            any = true;
        }
        if (!any) {
            const auto u = static_cast<std::size_t>(rng() % o.users);
            ratings.push_back({static_cast<Index>(i), static_cast<Index>(u), value(i, u)});
            user_seen[u] = 1;
        }
    }
    for (std::size_t u = 0; u < o.users; ++u)
        if (!user_seen[u]) {
            const auto i = static_cast<std::size_t>(rng() % o.items);
            ratings.push_back({static_cast<Index>(i), static_cast<Index>(u), value(i, u)});
        }
    std::sort(ratings.begin(), ratings.end(), [](const Rating& a, const Rating& b) {
        return a.item != b.item ? a.item < b.item : a.user < b.user;
    });

    std::vector<ExternalId> item_ids(o.items), user_ids(o.users);
    for (std::size_t i = 0; i < o.items; ++i) item_ids[i] = static_cast<ExternalId>(i + 1);
    for (std::size_t u = 0; u < o.users; ++u) user_ids[u] = static_cast<ExternalId>(u + 1);
    out.ratings = RatingDataset(std::move(ratings), std::move(item_ids), std::move(user_ids), 0.5, 5.0);

    out.labels.resize(o.items);
    for (std::size_t i = 0; i < o.items; ++i)
        for (std::size_t k = 0; k < o.planted_labels; ++k)
            if (out.item_factors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) > o.label_threshold)
                out.labels[i].push_back(fmt::format("axis{}", k));
    return out;
}

void write_planted_labels(std::ostream& out, const PlantedData& data) {
    out << "item_id,label\n";
    for (std::size_t i = 0; i < data.labels.size(); ++i)
        for (const auto& l : data.labels[i]) out << data.ratings.item_ids()[i] << ',' << l << '\n';
}

LabelSet planted_label_set(const PlantedData& data, double cutoff) {
    std::stringstream ss;
    write_planted_labels(ss, data);
    LabelOptions lo;
    lo.cutoff = cutoff;
    lo.format = LabelFormat::csv;
    return parse_labels(ss, data.ratings, lo);
}

}  // namespace factorspace
