#pragma once

#include "bidhi/records.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bidhi {

/// A percentage held as an integer count of tenths (54.4 % is 544), so
/// table arithmetic and comparisons are exact.
struct Tenths {
    std::int64_t value = 0;

    double pct() const noexcept { return static_cast<double>(value) / 10.0; }
    /// "54.4", "-18.4", "0.0".
    std::string str() const;

    friend auto operator<=>(const Tenths&, const Tenths&) = default;
};

/// 100 * num / den as tenths, rounded half away from zero.
Tenths percent_tenths(std::int64_t num, std::int64_t den);

/// Round(num / den) to an integer, half away from zero.
std::int64_t round_ratio(std::int64_t num, std::int64_t den);

/// Parses a decimal percentage such as "54.4" or "-7" into tenths
/// (further digits round half away from zero).
Tenths parse_tenths(std::string_view text);

struct CellMetrics {
    Tenths accuracy;
    Tenths compile_error;
    int n_tasks = 0;
    int n_infra = 0;

    friend bool operator==(const CellMetrics&, const CellMetrics&) = default;
};

/// 100 * |Correct| / denominator. The denominator holds every scored
/// record, minus Infra ones under InfraMode::Exclude. Throws EmptyCell
/// when it is zero and Error when records span several cells.
Tenths accuracy(std::span<const RunRecord> cell, InfraMode mode = InfraMode::CountAsIncorrect);

/// 100 * |final_exec CompileError| / denominator. Compile errors need no
/// hidden tests, so unscored records count here; Infra ones are dropped
/// under InfraMode::Exclude.
Tenths compile_error_rate(std::span<const RunRecord> cell, InfraMode mode = InfraMode::CountAsIncorrect);

/// (backend × approach) grid; keeps the declared order of both axes.
class ResultsMatrix {
public:
    void set(const std::string& backend, Approach approach, CellMetrics cell);

    bool contains(const std::string& backend, Approach approach) const;
    const CellMetrics& at(const std::string& backend, Approach approach) const;

    const std::vector<std::string>& backends() const noexcept { return backends_; }
    const std::vector<Approach>& approaches() const noexcept { return approaches_; }
    std::size_t size() const noexcept { return cells_.size(); }

    /// Highest-accuracy approach for a backend; ties go to the earlier
    /// column.
    Approach best_approach(const std::string& backend) const;
    Tenths best_accuracy(const std::string& backend) const;

    friend bool operator==(const ResultsMatrix&, const ResultsMatrix&) = default;

private:
    std::vector<std::string> backends_;
    std::vector<Approach> approaches_;
    std::map<std::pair<std::string, Approach>, CellMetrics> cells_;
};

/// Groups records into cells in the given axis order; axis entries never
/// seen in `records` are skipped, as are cells with no scored record.
ResultsMatrix aggregate(std::span<const RunRecord> records, std::span<const std::string> backend_order,
                        std::span<const Approach> approach_order, InfraMode mode = InfraMode::CountAsIncorrect);

inline constexpr std::string_view kMatrixHeader = "backend,approach,accuracy_pct,compile_error_pct,n_tasks";

/// Comma-separated, header kMatrixHeader, one row per cell, backend-major.
std::string format_matrix_csv(const ResultsMatrix& m);
ResultsMatrix parse_matrix_csv(std::string_view text);
ResultsMatrix load_matrix_csv(const std::filesystem::path& path);

/// Which column(s) an improvement is measured for; several columns mean
/// the per-backend best of them.
struct ApproachSelector {
    std::string label;
    std::vector<Approach> group;

    static ApproachSelector single(Approach a);
    static ApproachSelector best_of_translated();
    static ApproachSelector best_of_tdd();
};

struct BackendChange {
    std::string backend;
    Tenths baseline;
    Tenths value;
    /// Unset when the baseline is zero (reported as +inf).
    std::optional<Tenths> change;
};

struct ImprovementReport {
    std::string label;
    std::vector<BackendChange> per_backend;
    std::optional<Tenths> range_min;
    std::optional<Tenths> range_max;
};

/// Signed 100 * (value - baseline) / baseline; nullopt for a zero baseline.
std::optional<Tenths> relative_change(Tenths value, Tenths baseline);

/// Change of the selected column(s) against VANILLA for every backend in
/// the matrix; backends missing VANILLA or all selected columns throw.
ImprovementReport improvement_vs_baseline(const ResultsMatrix& m, const ApproachSelector& selector);

/// 100 * best(small) / best(large), nearest integer.
std::int64_t size_ratio(const ResultsMatrix& m, const std::string& small_backend, const std::string& large_backend);

} // namespace bidhi
