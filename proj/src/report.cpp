#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "factorspace/error.hpp"
#include "factorspace/evaluate.hpp"
#include "factorspace/snapshot.hpp"

namespace factorspace {

namespace {

long long hundredths(double v) { return static_cast<long long>(std::round(v * 100.0)); }

struct Table {
    std::string title;
    std::vector<std::string> columns;
    std::vector<std::string> rows;
    std::vector<std::vector<std::optional<double>>> values;  // rows x columns
    double threshold = 0.0;
};

void emit(const Table& t, std::string& text, std::string& tsv) {
    std::vector<std::vector<std::string>> grid;
    grid.push_back({""});
    for (const auto& c : t.columns) grid.back().push_back(c);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        std::vector<std::string> line{t.rows[r]};
        for (const auto& v : t.values[r]) {
            if (!v) line.push_back("NA");
            else if (hundredths(*v) > hundredths(t.threshold)) line.push_back("**" + format_kappa(*v) + "**");
            else line.push_back(format_kappa(*v));
        }
        grid.push_back(std::move(line));
    }
    std::vector<std::size_t> width(t.columns.size() + 1, 0);
    for (const auto& line : grid)
        for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());

    text += t.title + "\n\n";
    for (const auto& line : grid) {
        std::string out = fmt::format("{:<{}}", line[0], width[0]);
        for (std::size_t c = 1; c < line.size(); ++c) out += fmt::format("  {:>{}}", line[c], width[c]);
        while (!out.empty() && out.back() == ' ') out.pop_back();
        text += out + "\n";
    }
    text += "\n";

    tsv += "# " + t.title + "\n";
    for (const auto& c : t.columns) tsv += "\t" + c;
    tsv += "\n";
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        tsv += t.rows[r];
        for (const auto& v : t.values[r]) tsv += "\t" + (v ? format_kappa(*v) : std::string("NA"));
        tsv += "\n";
    }
    tsv += "\n";
}

std::string kappa_field(const std::optional<double>& k) { return k ? format_double(*k) : "NA"; }

}  // namespace

std::string format_kappa(double v) {
    const double r = std::round(std::fabs(v) * 100.0) / 100.0;
    return fmt::format("{}{:.2f}", v < 0.0 ? "-" : "", r);
}

RenderedTables render_tables(const EvalReport& report, const RenderOptions& opts) {
    RenderedTables out;
    std::vector<std::string> families;
    for (const auto& s : report.spaces)
        if (std::find(families.begin(), families.end(), s.family) == families.end()) families.push_back(s.family);

    auto spaces_of = [&](auto&& keep) {
        std::vector<std::size_t> idx;
        for (std::size_t s = 0; s < report.spaces.size(); ++s)
            if (keep(report.spaces[s])) idx.push_back(s);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return report.spaces[a].d < report.spaces[b].d;
        });
        return idx;
    };

    for (const auto& fam : families) {
        const auto cols = spaces_of([&](const SpaceKey& k) { return k.family == fam; });
        Table t;
        t.title = fmt::format("Kappas for coordinates generated by {}", fam);
        t.threshold = opts.bold_threshold;
        for (auto s : cols) t.columns.push_back(report.spaces[s].id());
        for (std::size_t c = 0; c < report.classifiers.size(); ++c) {
            t.rows.push_back(report.classifiers[c]);
            t.values.emplace_back();
            for (auto s : cols) t.values.back().push_back(report.mean(s, c));
        }
        emit(t, out.text, out.tsv);
    }

    for (const auto& cid : opts.genre_classifiers) {
        const auto c = report.find_classifier(cid);
        if (!c) continue;
        auto cols = spaces_of([&](const SpaceKey& k) {
            return opts.genre_dims.empty() ||
                   std::find(opts.genre_dims.begin(), opts.genre_dims.end(), k.d) != opts.genre_dims.end();
        });
        // Family order of first appearance, then d.
        std::stable_sort(cols.begin(), cols.end(), [&](std::size_t a, std::size_t b) {
            auto rank = [&](std::size_t s) {
                return std::find(families.begin(), families.end(), report.spaces[s].family) - families.begin();
            };
            return rank(a) < rank(b);
        });
        if (cols.empty()) continue;
        Table t;
        t.title = fmt::format("Kappas of {} per genre", cid);
        t.threshold = opts.genre_bold_threshold;
        for (auto s : cols) t.columns.push_back(report.spaces[s].id());
        for (std::size_t g = 0; g < report.genres.size(); ++g) {
            t.rows.push_back(report.genres[g]);
            t.values.emplace_back();
            for (auto s : cols) t.values.back().push_back(report.genre_mean(s, *c, g));
        }
        emit(t, out.text, out.tsv);
    }
    return out;
}

void write_cells_csv(std::ostream& out, const EvalReport& r) {
    out << "space,d,classifier,genre,split,kappa\n";
    for (const auto& c : r.cells) {
        const auto& s = r.spaces[c.space];
        out << s.family << ',' << s.d << ',' << r.classifiers[c.classifier] << ',' << r.genres[c.genre] << ','
            << c.split << ',' << kappa_field(c.kappa) << '\n';
    }
}

void write_means_csv(std::ostream& out, const EvalReport& r) {
    out << "space,d,classifier,mean_kappa,cells\n";
    for (const auto& a : r.means) {
        const auto& s = r.spaces[a.space];
        out << s.family << ',' << s.d << ',' << r.classifiers[a.classifier] << ','
            << kappa_field(a.cells ? std::optional<double>(a.mean) : std::nullopt) << ',' << a.cells << '\n';
    }
}

void write_genre_means_csv(std::ostream& out, const EvalReport& r) {
    out << "space,d,classifier,genre,mean_kappa,cells\n";
    for (const auto& a : r.genre_means) {
        const auto& s = r.spaces[a.space];
        out << s.family << ',' << s.d << ',' << r.classifiers[a.classifier] << ',' << r.genres[*a.genre] << ','
            << kappa_field(a.cells ? std::optional<double>(a.mean) : std::nullopt) << ',' << a.cells << '\n';
    }
}

void write_report_binary(std::ostream& out, const EvalReport& r, std::uint64_t config_hash) {
    BinaryWriter w(out);
    w.header(kReportMagic, 1, config_hash);
    w.u64(r.spaces.size());
    for (const auto& s : r.spaces) {
        w.str(s.family);
        w.u64(s.d);
    }
    w.u64(r.classifiers.size());
    for (const auto& c : r.classifiers) w.str(c);
    w.u64(r.genres.size());
    for (const auto& g : r.genres) w.str(g);
    w.u64(r.splits);
    for (const auto& c : r.cells) {
        w.u64(c.outcome.tp);
        w.u64(c.outcome.fp);
        w.u64(c.outcome.fn);
        w.u64(c.outcome.tn);
    }
    w.u64(r.warnings.size());
    for (const auto& s : r.warnings) w.str(s);
}

EvalReport read_report_binary(std::istream& in, std::uint64_t* config_hash) {
    BinaryReader rd(in);
    const auto h = rd.header(kReportMagic, 1);
    if (config_hash) *config_hash = h.config_hash;
    auto count = [&] {
        const auto n = rd.u64();
        if (n > (1ULL << 24)) throw DataError("corrupt report snapshot");
        return static_cast<std::size_t>(n);
    };
    EvalReport r;
    r.spaces.resize(count());
    for (auto& s : r.spaces) {
        s.family = rd.str();
        s.d = rd.u64();
    }
    r.classifiers.resize(count());
    for (auto& c : r.classifiers) c = rd.str();
    r.genres.resize(count());
    for (auto& g : r.genres) g = rd.str();
    r.splits = count();
    r.cells.resize(r.spaces.size() * r.classifiers.size() * r.genres.size() * r.splits);
    std::size_t at = 0;
    for (std::size_t s = 0; s < r.spaces.size(); ++s)
        for (std::size_t c = 0; c < r.classifiers.size(); ++c)
            for (std::size_t g = 0; g < r.genres.size(); ++g)
                for (std::size_t p = 0; p < r.splits; ++p) {
                    auto& cell = r.cells[at++];
                    cell.space = s;
                    cell.classifier = c;
                    cell.genre = g;
                    cell.split = p;
                    cell.outcome.tp = rd.u64();
                    cell.outcome.fp = rd.u64();
                    cell.outcome.fn = rd.u64();
                    cell.outcome.tn = rd.u64();
                    cell.kappa = kappa(cell.outcome);
                }
    r.warnings.resize(count());
    for (auto& s : r.warnings) s = rd.str();
    aggregate(r);
    return r;
}

}  // namespace factorspace
