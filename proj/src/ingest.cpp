#include "factorspace/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <string_view>

#include <fmt/format.h>

#include "factorspace/error.hpp"
#include "factorspace/snapshot.hpp"

namespace factorspace {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view s, std::string_view delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + delim.size();
    }
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        const auto start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

bool to_id(std::string_view s, ExternalId& out) {
    s = trim(s);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size() && !s.empty();
}

bool to_real(std::string_view s, double& out) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size() && !s.empty() && std::isfinite(out);
}

std::string lower(std::string_view s) {
    std::string r(s);
    std::transform(r.begin(), r.end(), r.begin(), [](unsigned char c) { return std::tolower(c); });
    return r;
}

struct RawRating {
    ExternalId item;
    ExternalId user;
    double value;
    std::size_t line;
};

std::vector<ExternalId> sorted_unique(std::vector<ExternalId> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

Index dense_index(std::span<const ExternalId> sorted, ExternalId id) {
    return static_cast<Index>(std::lower_bound(sorted.begin(), sorted.end(), id) - sorted.begin());
}

}  // namespace

RatingDataset::RatingDataset(std::vector<Rating> ratings, std::vector<ExternalId> item_ids,
                             std::vector<ExternalId> user_ids, double scale_min, double scale_max)
    : ratings_(std::move(ratings)),
      item_ids_(std::move(item_ids)),
      user_ids_(std::move(user_ids)),
      scale_min_(scale_min),
      scale_max_(scale_max) {
    if (!(scale_min_ <= scale_max_)) throw DataError("rating scale: scale_min must not exceed scale_max");
    if (!std::is_sorted(item_ids_.begin(), item_ids_.end()) ||
        std::adjacent_find(item_ids_.begin(), item_ids_.end()) != item_ids_.end())
        throw DataError("item ids must be strictly ascending");
    if (!std::is_sorted(user_ids_.begin(), user_ids_.end()) ||
        std::adjacent_find(user_ids_.begin(), user_ids_.end()) != user_ids_.end())
        throw DataError("user ids must be strictly ascending");

    std::sort(ratings_.begin(), ratings_.end(), [](const Rating& a, const Rating& b) {
        return a.item != b.item ? a.item < b.item : a.user < b.user;
    });
    std::vector<std::uint8_t> item_seen(item_ids_.size(), 0), user_seen(user_ids_.size(), 0);
    for (std::size_t k = 0; k < ratings_.size(); ++k) {
        const auto& r = ratings_[k];
        if (r.item >= item_ids_.size() || r.user >= user_ids_.size())
            throw DataError("rating references an index outside the dataset");
        if (!(r.value >= scale_min_ && r.value <= scale_max_))
            throw DataError(fmt::format("rating {} outside scale [{}, {}]", r.value, scale_min_, scale_max_));
        if (k > 0 && ratings_[k - 1].item == r.item && ratings_[k - 1].user == r.user)
            throw DataError(fmt::format("duplicate rating for item {} user {}", item_ids_[r.item],
                                        user_ids_[r.user]));
        item_seen[r.item] = 1;
        user_seen[r.user] = 1;
    }
    if (std::find(item_seen.begin(), item_seen.end(), 0) != item_seen.end() ||
        std::find(user_seen.begin(), user_seen.end(), 0) != user_seen.end())
        throw DataError("dataset indices are not dense: an item or user has no ratings");
}

std::ptrdiff_t RatingDataset::find_item(ExternalId id) const {
    const auto it = std::lower_bound(item_ids_.begin(), item_ids_.end(), id);
    if (it == item_ids_.end() || *it != id) return -1;
    return it - item_ids_.begin();
}

double RatingDataset::mean_rating() const {
    if (ratings_.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : ratings_) s += r.value;
    return s / static_cast<double>(ratings_.size());
}

namespace {

RatingIndex build_index(const RatingDataset& ds, bool items) {
    RatingIndex idx;
    const auto rows = items ? ds.items() : ds.users();
    const auto rs = ds.ratings();
    idx.offsets.assign(rows + 1, 0);
    for (const auto& r : rs) ++idx.offsets[(items ? r.item : r.user) + 1];
    std::partial_sum(idx.offsets.begin(), idx.offsets.end(), idx.offsets.begin());
    idx.partner.resize(rs.size());
    idx.value.resize(rs.size());
    idx.rating_pos.resize(rs.size());
    std::vector<std::size_t> fill(idx.offsets.begin(), idx.offsets.end() - 1);
    // Ratings are sorted by (item, user), so both views come out sorted by partner.
    for (std::size_t k = 0; k < rs.size(); ++k) {
        const auto row = items ? rs[k].item : rs[k].user;
        const auto slot = fill[row]++;
        idx.partner[slot] = items ? rs[k].user : rs[k].item;
        idx.value[slot] = rs[k].value;
        idx.rating_pos[slot] = k;
    }
    return idx;
}

}  // namespace

RatingIndex RatingIndex::by_item(const RatingDataset& ds) { return build_index(ds, true); }
RatingIndex RatingIndex::by_user(const RatingDataset& ds) { return build_index(ds, false); }

RatingFormat parse_rating_format(const std::string& name) {
    const auto n = lower(name);
    if (n == "movielens" || n == "dat") return RatingFormat::movielens;
    if (n == "csv") return RatingFormat::csv;
    if (n == "ml100k" || n == "tsv") return RatingFormat::ml100k;
    throw ConfigError(fmt::format("unknown rating format '{}' (expected movielens, csv or ml100k)", name));
}

std::string to_string(RatingFormat f) {
    switch (f) {
        case RatingFormat::movielens: return "movielens";
        case RatingFormat::csv: return "csv";
        case RatingFormat::ml100k: return "ml100k";
    }
    return "?";
}

RatingDataset parse_ratings(std::istream& in, RatingFormat format, const ParseOptions& opts) {
    std::vector<RawRating> raw;
    std::string line;
    std::size_t lineno = 0;
    int item_col = 0, user_col = 1, value_col = 2;
    bool header_pending = format == RatingFormat::csv;

    auto malformed = [&](std::string_view why) {
        return DataError(fmt::format("line {}: malformed record ({}): '{}'", lineno, why, trim(line)));
    };

    while (std::getline(in, line)) {
        ++lineno;
        const auto text = trim(line);
        if (text.empty()) continue;

        if (header_pending) {
            header_pending = false;
            item_col = user_col = value_col = -1;
            const auto cols = split(text, ",");
            for (int c = 0; c < static_cast<int>(cols.size()); ++c) {
                const auto name = lower(trim(cols[c]));
                if (name == "item" || name == "item_id") item_col = c;
                else if (name == "user" || name == "user_id") user_col = c;
                else if (name == "rating" || name == "value") value_col = c;
            }
            if (item_col < 0 || user_col < 0 || value_col < 0)
                throw malformed("CSV header must name item, user and rating columns");
            continue;
        }

        RawRating r{0, 0, 0.0, lineno};
        switch (format) {
            case RatingFormat::movielens: {
                const auto f = split(text, "::");
                if (f.size() < 3 || f.size() > 4) throw malformed("expected UserID::MovieID::Rating::Timestamp");
                if (!to_id(f[0], r.user) || !to_id(f[1], r.item)) throw malformed("bad id");
                if (!to_real(f[2], r.value)) throw malformed("bad rating");
                break;
            }
            case RatingFormat::csv: {
                const auto f = split(text, ",");
                const auto need = static_cast<std::size_t>(std::max({item_col, user_col, value_col}));
                if (f.size() <= need) throw malformed("too few columns");
                if (!to_id(f[item_col], r.item) || !to_id(f[user_col], r.user)) throw malformed("bad id");
                if (!to_real(f[value_col], r.value)) throw malformed("bad rating");
                break;
            }
            case RatingFormat::ml100k: {
                const auto f = split_ws(text);
                if (f.size() < 3 || f.size() > 4) throw malformed("expected user item rating timestamp");
                if (!to_id(f[0], r.user) || !to_id(f[1], r.item)) throw malformed("bad id");
                if (!to_real(f[2], r.value)) throw malformed("bad rating");
                break;
            }
        }
        if (r.value < opts.scale_min || r.value > opts.scale_max)
            throw DataError(fmt::format("line {}: rating {} outside scale [{}, {}]", lineno, r.value,
                                        opts.scale_min, opts.scale_max));
        raw.push_back(r);
    }
    if (header_pending && lineno > 0) throw DataError("CSV ratings: missing header");

    std::stable_sort(raw.begin(), raw.end(), [](const RawRating& a, const RawRating& b) {
        return a.item != b.item ? a.item < b.item : a.user < b.user;
    });
    std::vector<RawRating> unique;
    unique.reserve(raw.size());
    for (const auto& r : raw) {
        if (!unique.empty() && unique.back().item == r.item && unique.back().user == r.user) {
            if (opts.duplicates == DuplicatePolicy::error)
                throw DataError(fmt::format("line {}: duplicate rating for item {} user {} (first seen on line {})",
                                            r.line, r.item, r.user, unique.back().line));
            unique.back() = r;  // stable sort keeps record order, so this is the later one
            continue;
        }
        unique.push_back(r);
    }

    std::vector<ExternalId> items, users;
    items.reserve(unique.size());
    users.reserve(unique.size());
    for (const auto& r : unique) {
        items.push_back(r.item);
        users.push_back(r.user);
    }
    items = sorted_unique(std::move(items));
    users = sorted_unique(std::move(users));

    std::vector<Rating> ratings;
    ratings.reserve(unique.size());
    for (const auto& r : unique)
        ratings.push_back({dense_index(items, r.item), dense_index(users, r.user), r.value});
    return RatingDataset(std::move(ratings), std::move(items), std::move(users), opts.scale_min, opts.scale_max);
}

RatingDataset filter_min_ratings(const RatingDataset& ds, std::size_t min_per_item, std::size_t min_per_user) {
    std::vector<std::size_t> item_count(ds.items(), 0);
    for (const auto& r : ds.ratings()) ++item_count[r.item];

    std::vector<std::size_t> user_count(ds.users(), 0);
    for (const auto& r : ds.ratings())
        if (item_count[r.item] >= min_per_item) ++user_count[r.user];
    const auto user_min = std::max<std::size_t>(1, min_per_user);

    std::vector<std::int64_t> item_map(ds.items(), -1), user_map(ds.users(), -1);
    std::vector<ExternalId> items, users;
    // Items that lose every rater to the user threshold are dropped too.
    std::vector<std::size_t> kept_item_count(ds.items(), 0);
    for (const auto& r : ds.ratings())
        if (item_count[r.item] >= min_per_item && user_count[r.user] >= user_min) ++kept_item_count[r.item];
    for (std::size_t i = 0; i < ds.items(); ++i)
        if (kept_item_count[i] > 0) {
            item_map[i] = static_cast<std::int64_t>(items.size());
            items.push_back(ds.item_ids()[i]);
        }
    for (std::size_t u = 0; u < ds.users(); ++u)
        if (user_count[u] >= user_min) {
            user_map[u] = static_cast<std::int64_t>(users.size());
            users.push_back(ds.user_ids()[u]);
        }

    std::vector<Rating> ratings;
    ratings.reserve(ds.size());
    for (const auto& r : ds.ratings())
        if (item_map[r.item] >= 0 && user_map[r.user] >= 0)
            ratings.push_back({static_cast<Index>(item_map[r.item]), static_cast<Index>(user_map[r.user]), r.value});
    return RatingDataset(std::move(ratings), std::move(items), std::move(users), ds.scale_min(), ds.scale_max());
}

bool LabelSet::holds(std::size_t item, std::size_t label) const {
    const auto& a = assignments[item];
    return std::binary_search(a.begin(), a.end(), static_cast<std::uint32_t>(label));
}

std::vector<std::uint8_t> LabelSet::indicator(std::size_t label) const {
    std::vector<std::uint8_t> out(items(), 0);
    for (std::size_t i = 0; i < items(); ++i) out[i] = holds(i, label) ? 1 : 0;
    return out;
}

double LabelSet::mean_labels_per_item() const {
    if (assignments.empty()) return 0.0;
    std::size_t total = 0;
    for (const auto& a : assignments) total += a.size();
    return static_cast<double>(total) / static_cast<double>(assignments.size());
}

LabelFormat parse_label_format(const std::string& name) {
    const auto n = lower(name);
    if (n == "csv") return LabelFormat::csv;
    if (n == "movielens" || n == "dat") return LabelFormat::movielens;
    if (n == "ml100k") return LabelFormat::ml100k;
    throw ConfigError(fmt::format("unknown label format '{}' (expected csv, movielens or ml100k)", name));
}

namespace {

const char* const kMl100kGenres[] = {"unknown",  "Action",    "Adventure", "Animation", "Children's",
                                     "Comedy",   "Crime",     "Documentary", "Drama",   "Fantasy",
                                     "Film-Noir", "Horror",   "Musical",   "Mystery",   "Romance",
                                     "Sci-Fi",   "Thriller",  "War",       "Western"};

}  // namespace

LabelSet parse_labels(std::istream& in, const RatingDataset& ds, const LabelOptions& opts, Warnings* warnings) {
    if (!(opts.cutoff >= 0.0 && opts.cutoff <= 1.0)) throw ConfigError("label cutoff must lie in [0, 1]");
    if (ds.items() == 0) throw DataError("cannot attach labels to an empty dataset");

    std::map<std::string, std::vector<Index>> members;
    std::size_t unknown = 0;
    std::vector<ExternalId> unknown_examples;
    std::string line;
    std::size_t lineno = 0;
    bool header_pending = opts.format == LabelFormat::csv;

    auto assign = [&](ExternalId id, std::string_view label) {
        label = trim(label);
        if (label.empty()) return;
        const auto pos = ds.find_item(id);
        if (pos < 0) {
            if (opts.unknown_items == UnknownItemPolicy::fail)
                throw DataError(fmt::format("line {}: label for unknown item id {}", lineno, id));
            ++unknown;
            if (unknown_examples.size() < 5 &&
                std::find(unknown_examples.begin(), unknown_examples.end(), id) == unknown_examples.end())
                unknown_examples.push_back(id);
            return;
        }
        members[std::string(label)].push_back(static_cast<Index>(pos));
    };

    while (std::getline(in, line)) {
        ++lineno;
        const auto text = trim(line);
        if (text.empty()) continue;
        if (header_pending) {
            header_pending = false;
            const auto cols = split(text, ",");
            if (cols.size() < 2 || lower(trim(cols[0])) != "item_id" || lower(trim(cols[1])) != "label")
                throw DataError(fmt::format("line {}: label CSV header must be 'item_id,label'", lineno));
            continue;
        }
        ExternalId id = 0;
        switch (opts.format) {
            case LabelFormat::csv: {
                const auto f = split(text, ",");
                if (f.size() != 2 || !to_id(f[0], id))
                    throw DataError(fmt::format("line {}: malformed label record '{}'", lineno, text));
                assign(id, f[1]);
                break;
            }
            case LabelFormat::movielens: {
                const auto f = split(text, "::");
                if (f.size() != 3 || !to_id(f[0], id))
                    throw DataError(fmt::format("line {}: malformed movies.dat record", lineno));
                for (const auto g : split(f[2], "|"))
                    if (g != "(no genres listed)") assign(id, g);
                break;
            }
            case LabelFormat::ml100k: {
                const auto f = split(text, "|");
                if (f.size() != 24 || !to_id(f[0], id))
                    throw DataError(fmt::format("line {}: malformed u.item record", lineno));
                for (std::size_t g = 0; g < 19; ++g)
                    if (trim(f[5 + g]) == "1") assign(id, kMl100kGenres[g]);
                break;
            }
        }
    }
    if (unknown > 0 && warnings) {
        std::string ex;
        for (auto id : unknown_examples) ex += (ex.empty() ? "" : ", ") + std::to_string(id);
        warnings->push_back(fmt::format("skipped {} label assignments for unknown items (e.g. {})", unknown, ex));
    }

    LabelSet out;
    out.item_ids.assign(ds.item_ids().begin(), ds.item_ids().end());
    out.assignments.resize(ds.items());
    const auto I = static_cast<double>(ds.items());
    for (auto& [name, items] : members) {
        std::sort(items.begin(), items.end());
        items.erase(std::unique(items.begin(), items.end()), items.end());
        const double freq = static_cast<double>(items.size()) / I;
        if (freq < opts.cutoff) continue;
        const auto label = static_cast<std::uint32_t>(out.labels.size());
        out.labels.push_back(name);
        out.frequencies.push_back(freq);
        for (auto i : items) out.assignments[i].push_back(label);
    }
    if (out.labels.empty())
        throw DataError(fmt::format("no label reaches the cutoff {} (label universe empty)", opts.cutoff));
    return out;
}

void write_dataset_binary(std::ostream& out, const RatingDataset& ds, std::uint64_t config_hash) {
    BinaryWriter w(out);
    w.header(kDatasetMagic, 1, config_hash);
    w.f64(ds.scale_min());
    w.f64(ds.scale_max());
    w.u64(ds.items());
    w.u64(ds.users());
    w.u64(ds.size());
    w.i64s(ds.item_ids());
    w.i64s(ds.user_ids());
    for (const auto& r : ds.ratings()) {
        w.u32(r.item);
        w.u32(r.user);
        w.f64(r.value);
    }
}

RatingDataset read_dataset_binary(std::istream& in, std::uint64_t* config_hash) {
    BinaryReader r(in);
    const auto h = r.header(kDatasetMagic, 1);
    if (config_hash) *config_hash = h.config_hash;
    const double lo = r.f64();
    const double hi = r.f64();
    const auto I = r.u64(), U = r.u64(), n = r.u64();
    if (I > (1ULL << 32) || U > (1ULL << 32) || n > (1ULL << 40)) throw DataError("corrupt dataset snapshot");
    std::vector<ExternalId> items(I), users(U);
    r.i64s(items);
    r.i64s(users);
    std::vector<Rating> ratings(n);
    for (auto& x : ratings) {
        x.item = r.u32();
        x.user = r.u32();
        x.value = r.f64();
    }
    return RatingDataset(std::move(ratings), std::move(items), std::move(users), lo, hi);
}

void write_dataset_csv(std::ostream& out, const RatingDataset& ds) {
    out << "item,user,rating\n";
    for (const auto& r : ds.ratings())
        out << ds.item_ids()[r.item] << ',' << ds.user_ids()[r.user] << ',' << format_double(r.value) << '\n';
}

void write_id_map(std::ostream& out, const RatingDataset& ds) {
    out << "kind,index,external_id\n";
    for (std::size_t i = 0; i < ds.items(); ++i) out << "item," << i << ',' << ds.item_ids()[i] << '\n';
    for (std::size_t u = 0; u < ds.users(); ++u) out << "user," << u << ',' << ds.user_ids()[u] << '\n';
}

void write_labels_csv(std::ostream& out, const LabelSet& labels) {
    out << "item_id,label\n";
    for (std::size_t i = 0; i < labels.items(); ++i)
        for (auto g : labels.assignments[i]) out << labels.item_ids[i] << ',' << labels.labels[g] << '\n';
}

void write_label_frequencies(std::ostream& out, const LabelSet& labels) {
    out << "label,items,frequency\n";
    for (std::size_t g = 0; g < labels.labels.size(); ++g) {
        const auto count = static_cast<std::size_t>(std::llround(labels.frequencies[g] * labels.items()));
        out << labels.labels[g] << ',' << count << ',' << format_double(labels.frequencies[g]) << '\n';
    }
}

void write_labels_binary(std::ostream& out, const LabelSet& labels, std::uint64_t config_hash) {
    BinaryWriter w(out);
    w.header(kLabelsMagic, 1, config_hash);
    w.u64(labels.labels.size());
    for (std::size_t g = 0; g < labels.labels.size(); ++g) {
        w.str(labels.labels[g]);
        w.f64(labels.frequencies[g]);
    }
    w.u64(labels.items());
    w.i64s(labels.item_ids);
    for (const auto& a : labels.assignments) {
        w.u32(static_cast<std::uint32_t>(a.size()));
        for (auto g : a) w.u32(g);
    }
}

LabelSet read_labels_binary(std::istream& in, std::uint64_t* config_hash) {
    BinaryReader r(in);
    const auto h = r.header(kLabelsMagic, 1);
    if (config_hash) *config_hash = h.config_hash;
    LabelSet out;
    const auto G = r.u64();
    if (G > (1ULL << 20)) throw DataError("corrupt label snapshot");
    for (std::uint64_t g = 0; g < G; ++g) {
        out.labels.push_back(r.str());
        out.frequencies.push_back(r.f64());
    }
    const auto I = r.u64();
    if (I > (1ULL << 32)) throw DataError("corrupt label snapshot");
    out.item_ids.resize(I);
    r.i64s(out.item_ids);
    out.assignments.resize(I);
    for (auto& a : out.assignments) {
        a.resize(r.u32());
        for (auto& g : a) {
            g = r.u32();
            if (g >= G) throw DataError("corrupt label snapshot");
        }
    }
    return out;
}

}  // namespace factorspace
