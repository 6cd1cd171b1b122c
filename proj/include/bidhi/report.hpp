#pragma once

#include "bidhi/metrics.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace bidhi {

enum class GridMetric { Accuracy, CompileError };

/// Rows are backends, columns approaches; missing cells are empty fields.
std::string format_grid_csv(const ResultsMatrix& m, GridMetric metric);

/// Self-contained SVG heatmap with the value printed in each cell.
std::string render_heatmap_svg(const ResultsMatrix& m, GridMetric metric, const std::string& title);

/// One improvement report per column except VANILLA, then the
/// best-of-Translated and best-of-TDD groups.
std::vector<ImprovementReport> standard_improvements(const ResultsMatrix& m);

std::string format_improvements_csv(const std::vector<ImprovementReport>& reports);
std::string format_improvement_ranges_csv(const std::vector<ImprovementReport>& reports);
std::string format_best_approach_csv(const ResultsMatrix& m);
/// size_ratio for every ordered pair of distinct backends.
std::string format_size_ratios_csv(const ResultsMatrix& m);

/// Writes matrix.csv, accuracy_grid.csv, compile_error_grid.csv,
/// improvement.csv, improvement_ranges.csv, best_approach.csv,
/// size_ratios.csv, heatmap_accuracy.svg and heatmap_compile_error.svg.
/// Returns the written paths in that order.
std::vector<std::filesystem::path> write_report(const ResultsMatrix& m, const std::filesystem::path& out_dir);

} // namespace bidhi
