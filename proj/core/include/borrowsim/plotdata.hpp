#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace borrowsim {

enum class PlotView { ForestBySuccess, MetricVsTIE, MetricVsDrift, MetricVsESS };
/// Throws std::invalid_argument on an unknown name.
PlotView plot_view_from_string(std::string_view name);
std::string_view to_string(PlotView v);

/// RFC 4180 style table with a header row.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    /// Column position; throws std::invalid_argument if absent.
    std::size_t column(std::string_view name) const;
};
CsvTable read_csv(std::istream& in);
std::string csv_field(std::string_view s);

/// Long-format plot table with columns case_study, method, params_label, x,
/// y, y_lo, y_hi, panel. `metric` defaults to success_prob for the forest
/// view and mse otherwise.
std::string emit_plotdata(const CsvTable& results, PlotView view, std::string metric = {});

}  // namespace borrowsim
