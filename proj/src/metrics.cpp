#include "bidhi/metrics.hpp"

#include "bidhi/error.hpp"
#include "bidhi/util.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

namespace bidhi {

namespace {

void require_single_cell(std::span<const RunRecord> cell) {
    for (const auto& r : cell)
        if (r.backend_id != cell.front().backend_id || r.approach != cell.front().approach)
            throw Error("records span more than one (backend, approach) cell");
}

bool counts_for_accuracy(const RunRecord& r, InfraMode mode) {
    if (!r.verdict || r.has(RunFlag::Unscorable)) return false;
    return !(mode == InfraMode::Exclude && *r.verdict == Verdict::Infra);
}

bool counts_for_compile_rate(const RunRecord& r, InfraMode mode) {
    if (mode == InfraMode::CountAsIncorrect) return true;
    return !(r.verdict == Verdict::Infra);
}

std::string cell_label(std::span<const RunRecord> cell) {
    if (cell.empty()) return "empty cell";
    return cell.front().backend_id + "/" + std::string(to_string(cell.front().approach));
}

} // namespace

std::string Tenths::str() const {
    const auto mag = value < 0 ? -value : value;
    return std::string(value < 0 ? "-" : "") + std::to_string(mag / 10) + "." + std::to_string(mag % 10);
}

std::int64_t round_ratio(std::int64_t num, std::int64_t den) {
    if (den == 0) throw ZeroDenominator("division by zero");
    const bool negative = (num < 0) != (den < 0);
    const auto n = num < 0 ? -num : num;
    const auto d = den < 0 ? -den : den;
    const auto q = (2 * n + d) / (2 * d);
    return negative ? -q : q;
}

Tenths percent_tenths(std::int64_t num, std::int64_t den) {
    return Tenths{round_ratio(1000 * num, den)};
}

Tenths parse_tenths(std::string_view text) {
    auto t = trim(text);
    if (t.empty()) throw Error("empty percentage");
    bool negative = false;
    if (t.front() == '-' || t.front() == '+') {
        negative = t.front() == '-';
        t.remove_prefix(1);
    }
    std::int64_t whole = 0;
    std::size_t i = 0;
    for (; i < t.size() && t[i] != '.'; ++i) {
        if (t[i] < '0' || t[i] > '9') throw Error("not a percentage: '" + std::string(text) + "'");
        whole = whole * 10 + (t[i] - '0');
    }
    std::int64_t tenth = 0;
    bool round_up = false;
    if (i < t.size()) {
        const auto frac = t.substr(i + 1);
        for (std::size_t k = 0; k < frac.size(); ++k) {
            if (frac[k] < '0' || frac[k] > '9') throw Error("not a percentage: '" + std::string(text) + "'");
            if (k == 0) tenth = frac[k] - '0';
            if (k == 1) round_up = frac[k] >= '5';
        }
    }
    auto v = whole * 10 + tenth + (round_up ? 1 : 0);
    return Tenths{negative ? -v : v};
}

Tenths accuracy(std::span<const RunRecord> cell, InfraMode mode) {
    require_single_cell(cell);
    std::int64_t correct = 0, den = 0;
    for (const auto& r : cell) {
        if (!counts_for_accuracy(r, mode)) continue;
        ++den;
        if (*r.verdict == Verdict::Correct) ++correct;
    }
    if (den == 0) throw EmptyCell("no scored records in " + cell_label(cell));
    return percent_tenths(correct, den);
}

Tenths compile_error_rate(std::span<const RunRecord> cell, InfraMode mode) {
    require_single_cell(cell);
    std::int64_t errors = 0, den = 0;
    for (const auto& r : cell) {
        if (!counts_for_compile_rate(r, mode)) continue;
        ++den;
        if (r.final_exec && r.final_exec->status == ExecStatus::CompileError) ++errors;
    }
    if (den == 0) throw EmptyCell("no records in " + cell_label(cell));
    return percent_tenths(errors, den);
}

void ResultsMatrix::set(const std::string& backend, Approach approach, CellMetrics cell) {
    if (std::find(backends_.begin(), backends_.end(), backend) == backends_.end()) backends_.push_back(backend);
    if (std::find(approaches_.begin(), approaches_.end(), approach) == approaches_.end())
        approaches_.push_back(approach);
    cells_.insert_or_assign({backend, approach}, cell);
}

bool ResultsMatrix::contains(const std::string& backend, Approach approach) const {
    return cells_.contains({backend, approach});
}

const CellMetrics& ResultsMatrix::at(const std::string& backend, Approach approach) const {
    auto it = cells_.find({backend, approach});
    if (it == cells_.end())
        throw Error("matrix has no cell " + backend + "/" + std::string(to_string(approach)));
    return it->second;
}

Approach ResultsMatrix::best_approach(const std::string& backend) const {
    std::optional<Approach> best;
    Tenths best_value{};
    for (auto a : approaches_) {
        auto it = cells_.find({backend, a});
        if (it == cells_.end()) continue;
        if (!best || it->second.accuracy > best_value) {
            best = a;
            best_value = it->second.accuracy;
        }
    }
    if (!best) throw Error("matrix has no cells for backend " + backend);
    return *best;
}

Tenths ResultsMatrix::best_accuracy(const std::string& backend) const {
    return at(backend, best_approach(backend)).accuracy;
}

ResultsMatrix aggregate(std::span<const RunRecord> records, std::span<const std::string> backend_order,
                        std::span<const Approach> approach_order, InfraMode mode) {
    std::map<std::pair<std::string, Approach>, std::vector<RunRecord>> grouped;
    for (const auto& r : records) grouped[{r.backend_id, r.approach}].push_back(r);

    ResultsMatrix m;
    for (const auto& b : backend_order) {
        for (auto a : approach_order) {
            auto it = grouped.find({b, a});
            if (it == grouped.end()) continue;
            const auto& cell = it->second;
            CellMetrics metrics;
            try {
                metrics.accuracy = accuracy(cell, mode);
            } catch (const EmptyCell&) {
                continue;
            }
            metrics.compile_error = compile_error_rate(cell, mode);
            for (const auto& r : cell) {
                if (counts_for_accuracy(r, mode)) ++metrics.n_tasks;
                if (r.verdict == Verdict::Infra) ++metrics.n_infra;
            }
            m.set(b, a, metrics);
        }
    }
    return m;
}

std::string format_matrix_csv(const ResultsMatrix& m) {
    std::string out(kMatrixHeader);
    out.push_back('\n');
    for (const auto& b : m.backends()) {
        for (auto a : m.approaches()) {
            if (!m.contains(b, a)) continue;
            const auto& c = m.at(b, a);
            out += b + "," + std::string(to_string(a)) + "," + c.accuracy.str() + "," + c.compile_error.str() + "," +
                   std::to_string(c.n_tasks) + "\n";
        }
    }
    return out;
}

ResultsMatrix parse_matrix_csv(std::string_view text) {
    ResultsMatrix m;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        if (!header_seen) {
            if (!line.starts_with(kMatrixHeader))
                throw Error("matrix file: expected header '" + std::string(kMatrixHeader) + "'");
            header_seen = true;
            continue;
        }
        std::vector<std::string_view> fields;
        while (true) {
            const auto comma = line.find(',');
            fields.push_back(trim(line.substr(0, comma)));
            if (comma == std::string_view::npos) break;
            line = line.substr(comma + 1);
        }
        if (fields.size() < 5)
            throw Error("matrix file line " + std::to_string(line_no) + ": expected at least 5 fields");
        CellMetrics c;
        c.accuracy = parse_tenths(fields[2]);
        c.compile_error = parse_tenths(fields[3]);
        c.n_tasks = std::stoi(std::string(fields[4]));
        if (fields.size() > 5) c.n_infra = std::stoi(std::string(fields[5]));
        if (c.accuracy.value < 0 || c.accuracy.value > 1000)
            throw Error("matrix file line " + std::to_string(line_no) + ": accuracy out of range");
        m.set(std::string(fields[0]), approach_from_string(fields[1]), c);
    }
    if (!header_seen) throw Error("matrix file: missing header");
    return m;
}

ResultsMatrix load_matrix_csv(const std::filesystem::path& path) {
    return parse_matrix_csv(read_file(path));
}

ApproachSelector ApproachSelector::single(Approach a) {
    return {std::string(to_string(a)), {a}};
}

ApproachSelector ApproachSelector::best_of_translated() {
    return {"BEST_TRANSLATED", {Approach::TranslateA, Approach::TranslateB}};
}

ApproachSelector ApproachSelector::best_of_tdd() {
    return {"BEST_TDD", {Approach::TddGenerated, Approach::TddGiven, Approach::TddCombined}};
}

std::optional<Tenths> relative_change(Tenths value, Tenths baseline) {
    if (baseline.value == 0) return std::nullopt;
    return percent_tenths(value.value - baseline.value, baseline.value);
}

ImprovementReport improvement_vs_baseline(const ResultsMatrix& m, const ApproachSelector& selector) {
    ImprovementReport report;
    report.label = selector.label;
    for (const auto& b : m.backends()) {
        if (!m.contains(b, Approach::Vanilla)) throw Error("backend " + b + " has no VANILLA baseline");
        std::optional<Tenths> value;
        for (auto a : selector.group) {
            if (!m.contains(b, a)) continue;
            const auto v = m.at(b, a).accuracy;
            if (!value || v > *value) value = v;
        }
        if (!value) throw Error("backend " + b + " has no cell for selector " + selector.label);
        BackendChange change{b, m.at(b, Approach::Vanilla).accuracy, *value, std::nullopt};
        change.change = relative_change(change.value, change.baseline);
        if (change.change) {
            if (!report.range_min || *change.change < *report.range_min) report.range_min = change.change;
            if (!report.range_max || *change.change > *report.range_max) report.range_max = change.change;
        }
        report.per_backend.push_back(std::move(change));
    }
    return report;
}

std::int64_t size_ratio(const ResultsMatrix& m, const std::string& small_backend, const std::string& large_backend) {
    const auto small = m.best_accuracy(small_backend);
    const auto large = m.best_accuracy(large_backend);
    if (large.value == 0) throw ZeroDenominator("best accuracy of " + large_backend + " is zero");
    return round_ratio(100 * small.value, large.value);
}

} // namespace bidhi
