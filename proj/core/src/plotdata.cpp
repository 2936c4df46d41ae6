#include "borrowsim/plotdata.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>

namespace borrowsim {

PlotView plot_view_from_string(std::string_view name) {
    if (name == "forest_by_success") return PlotView::ForestBySuccess;
    if (name == "metric_vs_tie") return PlotView::MetricVsTIE;
    if (name == "metric_vs_drift") return PlotView::MetricVsDrift;
    if (name == "metric_vs_ess") return PlotView::MetricVsESS;
    throw std::invalid_argument("unknown view '" + std::string(name) +
                                "' (expected forest_by_success|metric_vs_tie|metric_vs_drift|metric_vs_ess)");
}

std::string_view to_string(PlotView v) {
    switch (v) {
        case PlotView::ForestBySuccess: return "forest_by_success";
        case PlotView::MetricVsTIE: return "metric_vs_tie";
        case PlotView::MetricVsDrift: return "metric_vs_drift";
        case PlotView::MetricVsESS: return "metric_vs_ess";
    }
    return "unknown";
}

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw std::invalid_argument("results table has no column '" + std::string(name) + "'");
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

CsvTable read_csv(std::istream& in) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> rec;
    std::string field;
    bool quoted = false, any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            rec.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            rec.push_back(std::move(field));
            field.clear();
            records.push_back(std::move(rec));
            rec.clear();
            any = false;
        } else if (c != '\r') {
            field += c;
        }
    }
    if (quoted) throw std::invalid_argument("read_csv: unterminated quoted field");
    if (any) {
        rec.push_back(std::move(field));
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw std::invalid_argument("read_csv: empty table");
    CsvTable t;
    t.header = std::move(records.front());
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].size() != t.header.size())
            throw std::invalid_argument("read_csv: row " + std::to_string(i) + " has " + std::to_string(records[i].size()) +
                                        " fields, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(records[i]));
    }
    return t;
}

namespace {

double to_double(const std::string& s) {
    if (s.empty()) return std::nan("");
    return std::stod(s);
}

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

std::string emit_plotdata(const CsvTable& t, PlotView view, std::string metric) {
    if (metric.empty()) metric = view == PlotView::ForestBySuccess ? "success_prob" : "mse";
    const std::size_t c_case = t.column("case_study"), c_method = t.column("method"), c_label = t.column("params_label"),
                      c_key = t.column("method_key"), c_n = t.column("n_per_arm"), c_dl = t.column("drift_label"),
                      c_drift = t.column("drift"), c_sr = t.column("std_ratio"), c_df = t.column("denominator_factor"),
                      c_theta0 = t.column("theta0"), c_true = t.column("theta_true"), c_succ = t.column("success_prob"),
                      c_ess = t.column("ess_moment");
    const std::size_t c_y = t.column(metric), c_lo = t.column(metric + "_lo"), c_hi = t.column(metric + "_hi");

    const auto panel = [&](const std::vector<std::string>& r, bool with_drift) {
        std::string p = "n=" + r[c_n];
        if (with_drift) p += " drift=" + r[c_dl];
        return p + " sr=" + r[c_sr] + " df=" + r[c_df];
    };
    const auto is_null = [&](const std::vector<std::string>& r) {
        const double th0 = to_double(r[c_theta0]);
        return std::abs(to_double(r[c_true]) - th0) <= 1e-12 * std::max(1.0, std::abs(th0));
    };

    // Type 1 error per (design without drift, method).
    std::map<std::string, std::string> tie;
    if (view == PlotView::MetricVsTIE) {
        for (const auto& r : t.rows)
            if (is_null(r)) tie[panel(r, false) + "|" + r[c_key]] = r[c_succ];
        if (tie.empty()) throw std::invalid_argument("metric_vs_tie: results hold no scenario with theta_T = theta0");
    }

    std::string out = "case_study,method,params_label,x,y,y_lo,y_hi,panel\n";
    std::map<std::string, int> forest_pos;
    for (const auto& r : t.rows) {
        if (r[c_y].empty()) continue;
        std::string x, p;
        switch (view) {
            case PlotView::ForestBySuccess:
                p = panel(r, true);
                x = std::to_string(++forest_pos[p]);
                break;
            case PlotView::MetricVsTIE: {
                if (is_null(r)) continue;
                const auto it = tie.find(panel(r, false) + "|" + r[c_key]);
                if (it == tie.end()) continue;
                x = it->second;
                p = panel(r, true);
                break;
            }
            case PlotView::MetricVsDrift:
                x = r[c_drift];
                p = panel(r, false);
                break;
            case PlotView::MetricVsESS:
                if (r[c_ess].empty()) continue;
                x = r[c_ess];
                p = panel(r, true);
                break;
        }
        // The interval always brackets the point.
        const double y = to_double(r[c_y]);
        const double lo = std::min(to_double(r[c_lo]), y), hi = std::max(to_double(r[c_hi]), y);
        out += csv_field(r[c_case]) + "," + csv_field(r[c_method]) + "," + csv_field(r[c_label]) + "," + x + "," +
               num(y) + "," + num(lo) + "," + num(hi) + "," + csv_field(p) + "\n";
    }
    return out;
}

}  // namespace borrowsim
