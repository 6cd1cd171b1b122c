#include "bidhi/report.hpp"

#include "bidhi/error.hpp"
#include "bidhi/util.hpp"

#include <algorithm>
#include <cstdio>

namespace bidhi {

namespace {

Tenths metric_of(const CellMetrics& c, GridMetric metric) {
    return metric == GridMetric::Accuracy ? c.accuracy : c.compile_error;
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

// White (0 %) to a saturated blue (100 %); compile errors use red.
std::string fill_color(Tenths v, GridMetric metric) {
    const double t = std::clamp(v.pct() / 100.0, 0.0, 1.0);
    int r = 255, g = 255, b = 255;
    if (metric == GridMetric::Accuracy) {
        r = static_cast<int>(255 - t * (255 - 33));
        g = static_cast<int>(255 - t * (255 - 102));
        b = static_cast<int>(255 - t * (255 - 172));
    } else {
        g = static_cast<int>(255 - t * (255 - 59));
        b = static_cast<int>(255 - t * (255 - 48));
        r = static_cast<int>(255 - t * (255 - 214));
    }
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

std::string change_str(const std::optional<Tenths>& c) {
    if (!c) return "+inf";
    return (c->value >= 0 ? "+" : "") + c->str();
}

} // namespace

std::string format_grid_csv(const ResultsMatrix& m, GridMetric metric) {
    std::string out = "backend";
    for (auto a : m.approaches()) out += "," + std::string(to_string(a));
    out += "\n";
    for (const auto& b : m.backends()) {
        out += b;
        for (auto a : m.approaches()) {
            out += ",";
            if (m.contains(b, a)) out += metric_of(m.at(b, a), metric).str();
        }
        out += "\n";
    }
    return out;
}

std::string render_heatmap_svg(const ResultsMatrix& m, GridMetric metric, const std::string& title) {
    constexpr int cell_w = 110, cell_h = 36, left = 170, top = 70;
    const int width = left + cell_w * static_cast<int>(m.approaches().size()) + 20;
    const int height = top + cell_h * static_cast<int>(m.backends().size()) + 20;

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
           std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<text x=\"" + std::to_string(left) + "\" y=\"24\" font-size=\"16\">" + xml_escape(title) + "</text>\n";
    for (std::size_t j = 0; j < m.approaches().size(); ++j) {
        const int x = left + static_cast<int>(j) * cell_w + cell_w / 2;
        svg += "<text x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(top - 10) +
               "\" text-anchor=\"middle\" font-size=\"10\">" + std::string(to_string(m.approaches()[j])) + "</text>\n";
    }
    for (std::size_t i = 0; i < m.backends().size(); ++i) {
        const auto& b = m.backends()[i];
        const int y = top + static_cast<int>(i) * cell_h;
        svg += "<text x=\"" + std::to_string(left - 8) + "\" y=\"" + std::to_string(y + cell_h / 2 + 4) +
               "\" text-anchor=\"end\">" + xml_escape(b) + "</text>\n";
        for (std::size_t j = 0; j < m.approaches().size(); ++j) {
            const auto a = m.approaches()[j];
            const int x = left + static_cast<int>(j) * cell_w;
            if (!m.contains(b, a)) {
                svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
                       std::to_string(cell_w) + "\" height=\"" + std::to_string(cell_h) +
                       "\" fill=\"#dddddd\" stroke=\"#ffffff\"/>\n";
                continue;
            }
            const auto v = metric_of(m.at(b, a), metric);
            svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
                   std::to_string(cell_w) + "\" height=\"" + std::to_string(cell_h) + "\" fill=\"" +
                   fill_color(v, metric) + "\" stroke=\"#ffffff\"/>\n";
            svg += "<text x=\"" + std::to_string(x + cell_w / 2) + "\" y=\"" + std::to_string(y + cell_h / 2 + 4) +
                   "\" text-anchor=\"middle\" fill=\"" + (v.value > 550 ? "#ffffff" : "#000000") + "\">" + v.str() +
                   "</text>\n";
        }
    }
    svg += "</svg>\n";
    return svg;
}

std::vector<ImprovementReport> standard_improvements(const ResultsMatrix& m) {
    std::vector<ImprovementReport> out;
    if (m.backends().empty()) return out;
    auto computable = [&](const ApproachSelector& s) {
        for (const auto& b : m.backends()) {
            if (!m.contains(b, Approach::Vanilla)) return false;
            if (std::none_of(s.group.begin(), s.group.end(), [&](Approach a) { return m.contains(b, a); }))
                return false;
        }
        return true;
    };
    std::vector<ApproachSelector> selectors;
    for (auto a : m.approaches())
        if (a != Approach::Vanilla) selectors.push_back(ApproachSelector::single(a));
    selectors.push_back(ApproachSelector::best_of_translated());
    selectors.push_back(ApproachSelector::best_of_tdd());
    for (const auto& s : selectors)
        if (computable(s)) out.push_back(improvement_vs_baseline(m, s));
    return out;
}

std::string format_improvements_csv(const std::vector<ImprovementReport>& reports) {
    std::string out = "selector,backend,baseline_pct,value_pct,change_pct\n";
    for (const auto& r : reports)
        for (const auto& c : r.per_backend)
            out += r.label + "," + c.backend + "," + c.baseline.str() + "," + c.value.str() + "," +
                   change_str(c.change) + "\n";
    return out;
}

std::string format_improvement_ranges_csv(const std::vector<ImprovementReport>& reports) {
    std::string out = "selector,min_change_pct,max_change_pct\n";
    for (const auto& r : reports) {
        out += r.label + ",";
        out += r.range_min ? change_str(r.range_min) : std::string{};
        out += ",";
        out += r.range_max ? change_str(r.range_max) : std::string{};
        out += "\n";
    }
    return out;
}

std::string format_best_approach_csv(const ResultsMatrix& m) {
    std::string out = "backend,best_approach,accuracy_pct\n";
    for (const auto& b : m.backends()) {
        const auto a = m.best_approach(b);
        out += b + "," + std::string(to_string(a)) + "," + m.at(b, a).accuracy.str() + "\n";
    }
    return out;
}

std::string format_size_ratios_csv(const ResultsMatrix& m) {
    std::string out = "small_backend,large_backend,ratio_pct\n";
    for (const auto& s : m.backends()) {
        for (const auto& l : m.backends()) {
            if (s == l) continue;
            out += s + "," + l + ",";
            try {
                out += std::to_string(size_ratio(m, s, l));
            } catch (const ZeroDenominator&) {
                out += "inf";
            }
            out += "\n";
        }
    }
    return out;
}

std::vector<std::filesystem::path> write_report(const ResultsMatrix& m, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const auto improvements = standard_improvements(m);
    const std::vector<std::pair<std::string, std::string>> files{
        {"matrix.csv", format_matrix_csv(m)},
        {"accuracy_grid.csv", format_grid_csv(m, GridMetric::Accuracy)},
        {"compile_error_grid.csv", format_grid_csv(m, GridMetric::CompileError)},
        {"improvement.csv", format_improvements_csv(improvements)},
        {"improvement_ranges.csv", format_improvement_ranges_csv(improvements)},
        {"best_approach.csv", format_best_approach_csv(m)},
        {"size_ratios.csv", format_size_ratios_csv(m)},
        {"heatmap_accuracy.svg", render_heatmap_svg(m, GridMetric::Accuracy, "Overall accuracy (%)")},
        {"heatmap_compile_error.svg",
         render_heatmap_svg(m, GridMetric::CompileError, "Compilation error rate (%)")},
    };
    std::vector<std::filesystem::path> written;
    for (const auto& [name, body] : files) {
        write_file_atomic(out_dir / name, body);
        written.push_back(out_dir / name);
    }
    return written;
}

} // namespace bidhi
