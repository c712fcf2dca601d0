#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "judgeagg/analysis.hpp"
#include "judgeagg/core.hpp"
#include "judgeagg/errors.hpp"
#include "judgeagg/metrics.hpp"
#include "judgeagg/robustness.hpp"
#include "judgeagg/svg.hpp"

namespace judgeagg {

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::string to_csv(const Table& table) {
    std::string out;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c) out.push_back(',');
        out += csv_escape(table.columns[c]);
    }
    out.push_back('\n');
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out.push_back(',');
            out += csv_escape(row[c]);
        }
        out.push_back('\n');
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report payload
// ---------------------------------------------------------------------------

struct ModelScore {
    std::string model;
    double r2 = 0.0;
};

struct ScatterPoint {
    std::string record_id;
    double mean_judge_score = 0.0;
    double label = 0.0;
};

struct ExperimentReport {
    std::vector<ModelScore> model_r2;
    std::vector<std::pair<std::string, SweepResult>> sweeps;  // name -> result
    std::optional<ImportanceStabilityReport> importance;
    std::vector<std::pair<std::string, std::array<double, kNumJudges>>>
        permutation;  // model -> mean R^2 drops
    std::vector<SearchCell> gam_search;
    std::vector<SearchCell> mlp_search;
    std::vector<ScatterPoint> scatter;
    std::string scatter_condition;
    nlohmann::json provenance = nlohmann::json::object();
};

inline std::vector<Table> report_tables(const ExperimentReport& report) {
    std::vector<Table> tables;

    if (!report.model_r2.empty()) {
        Table t{"model_comparison", {"model", "r2"}, {}};
        for (const auto& score : report.model_r2) {
            t.rows.push_back({score.model, format_double(score.r2)});
        }
        tables.push_back(std::move(t));
    }

    for (const auto& [name, sweep] : report.sweeps) {
        Table t{name, {"arm", sweep.axis_name, "model", "r2"}, {}};
        for (const auto& p : sweep.points) {
            t.rows.push_back({p.arm, format_double(p.axis), p.model, format_double(p.r2)});
        }
        tables.push_back(std::move(t));
    }

    if (report.importance) {
        Table t{"importance_stability",
                {"judge", "mean_importance", "std_importance", "cv", "runs"},
                {}};
        const auto runs = std::to_string(report.importance->runs.size());
        for (std::size_t j = 0; j < kNumJudges; ++j) {
            const auto& stats = report.importance->per_judge[j];
            t.rows.push_back({std::string(kJudgeNames[j]), format_double(stats.mean),
                              format_double(stats.stddev),
                              stats.cv_defined ? format_double(stats.cv) : "", runs});
        }
        tables.push_back(std::move(t));
    }

    for (const auto& [model, drops] : report.permutation) {
        Table t{"permutation_importance_" + model, {"judge", "mean_r2_drop"}, {}};
        for (std::size_t j = 0; j < kNumJudges; ++j) {
            t.rows.push_back({std::string(kJudgeNames[j]), format_double(drops[j])});
        }
        tables.push_back(std::move(t));
    }

    auto search_table = [](const std::string& name, const std::string& a_col,
                           const std::string& b_col, const std::vector<SearchCell>& cells) {
        Table t{name, {a_col, b_col, "val_r2", "status"}, {}};
        for (const auto& cell : cells) {
            t.rows.push_back({format_double(cell.a), format_double(cell.b),
                              cell.failed ? "" : format_double(cell.val_r2),
                              cell.failed ? "failed" : "ok"});
        }
        return t;
    };
    if (!report.gam_search.empty()) {
        tables.push_back(search_table("gam_search", "n_splines", "lambda", report.gam_search));
    }
    if (!report.mlp_search.empty()) {
        tables.push_back(
            search_table("mlp_search", "hidden_dim", "learning_rate", report.mlp_search));
    }

    if (!report.scatter.empty()) {
        Table t{"diversity_scatter", {"record_id", "mean_judge_score", "label"}, {}};
        for (const auto& p : report.scatter) {
            t.rows.push_back(
                {p.record_id, format_double(p.mean_judge_score), format_double(p.label)});
        }
        tables.push_back(std::move(t));
    }
    return tables;
}

// ---------------------------------------------------------------------------
// Charts (always rendered from the emitted tables, never recomputed)
// ---------------------------------------------------------------------------

namespace charts {

struct Frame {
    double width = 640;
    double height = 400;
    double left = 70;
    double right = 20;
    double top = 30;
    double bottom = 60;

    double plot_w() const { return width - left - right; }
    double plot_h() const { return height - top - bottom; }
    double x(double t) const { return left + t * plot_w(); }        // t in [0,1]
    double y(double t) const { return top + (1.0 - t) * plot_h(); }  // t in [0,1]
};

inline void draw_axes(SvgDocument& svg, const Frame& f) {
    svg.line(f.left, f.top, f.left, f.top + f.plot_h(), "#444444");
    svg.line(f.left, f.top + f.plot_h(), f.left + f.plot_w(), f.top + f.plot_h(), "#444444");
}

inline void value_axis_ticks(SvgDocument& svg, const Frame& f, double lo, double hi) {
    for (int i = 0; i <= 4; ++i) {
        double v = lo + (hi - lo) * i / 4.0;
        double t = (v - lo) / (hi - lo);
        svg.line(f.left - 4, f.y(t), f.left, f.y(t), "#444444");
        svg.text(f.left - 8, f.y(t) + 4, format_coord(v), 10, "end");
    }
}

inline std::pair<double, double> padded_range(double lo, double hi) {
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    double pad = 0.08 * (hi - lo);
    return {lo - pad, hi + pad};
}

/// Vertical bars with the exact table value strings as labels.
inline std::string bar_chart(const Table& table, const std::string& title,
                             std::size_t label_col, std::size_t value_col) {
    Frame f;
    SvgDocument svg(f.width, f.height);
    double lo = 0.0;
    double hi = 0.0;
    for (const auto& row : table.rows) {
        double v = std::strtod(row[value_col].c_str(), nullptr);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    auto [rlo, rhi] = padded_range(lo, hi);
    draw_axes(svg, f);
    value_axis_ticks(svg, f, rlo, rhi);
    svg.text(f.width / 2, 18, title, 13, "middle");
    const auto n = table.rows.size();
    const double slot = f.plot_w() / static_cast<double>(std::max<std::size_t>(n, 1));
    for (std::size_t i = 0; i < n; ++i) {
        double v = std::strtod(table.rows[i][value_col].c_str(), nullptr);
        double x0 = f.left + slot * (static_cast<double>(i) + 0.2);
        double zero_t = (0.0 - rlo) / (rhi - rlo);
        double val_t = (v - rlo) / (rhi - rlo);
        double y0 = f.y(std::max(zero_t, val_t));
        double h = std::abs(val_t - zero_t) * f.plot_h();
        svg.rect(x0, y0, slot * 0.6, h, std::string(series_color(i)));
        svg.text(x0 + slot * 0.3, y0 - 5, table.rows[i][value_col], 10, "middle");
        svg.text(x0 + slot * 0.3, f.top + f.plot_h() + 16, table.rows[i][label_col], 10,
                 "middle");
    }
    return svg.str();
}

/// One line per model over the sweep axis for a single arm.
inline std::string sweep_line_chart(const Table& table, const std::string& arm,
                                    const std::string& title) {
    Frame f;
    SvgDocument svg(f.width, f.height);
    struct Point {
        double axis;
        double r2;
    };
    std::map<std::string, std::vector<Point>> series;
    double xlo = 0.0, xhi = 1.0, ylo = 0.0, yhi = 0.0;
    bool first = true;
    for (const auto& row : table.rows) {
        if (row[0] != arm) continue;
        double axis = std::strtod(row[1].c_str(), nullptr);
        double r2 = std::strtod(row[3].c_str(), nullptr);
        series[row[2]].push_back({axis, r2});
        if (first) {
            xlo = xhi = axis;
            ylo = yhi = r2;
            first = false;
        }
        xlo = std::min(xlo, axis);
        xhi = std::max(xhi, axis);
        ylo = std::min(ylo, r2);
        yhi = std::max(yhi, r2);
    }
    auto [rylo, ryhi] = padded_range(ylo, yhi);
    if (!(xhi > xlo)) xhi = xlo + 1.0;
    draw_axes(svg, f);
    value_axis_ticks(svg, f, rylo, ryhi);
    svg.text(f.width / 2, 18, title, 13, "middle");
    std::size_t idx = 0;
    for (auto& [model, points] : series) {
        std::sort(points.begin(), points.end(),
                  [](const Point& a, const Point& b) { return a.axis < b.axis; });
        std::string path;
        for (const auto& p : points) {
            double tx = (p.axis - xlo) / (xhi - xlo);
            double ty = (p.r2 - rylo) / (ryhi - rylo);
            path += format_coord(f.x(tx)) + "," + format_coord(f.y(ty)) + " ";
            svg.circle(f.x(tx), f.y(ty), 3, std::string(series_color(idx)));
        }
        svg.polyline(path, series_color(idx));
        svg.text(f.left + 8, f.top + 14 + 14 * static_cast<double>(idx), model, 10, "start",
                 series_color(idx));
        ++idx;
    }
    for (int i = 0; i <= 4; ++i) {
        double v = xlo + (xhi - xlo) * i / 4.0;
        double t = (v - xlo) / (xhi - xlo);
        svg.text(f.x(t), f.top + f.plot_h() + 16, format_coord(v), 10, "middle");
    }
    return svg.str();
}

/// Mean importance bars with +-std error bars.
inline std::string importance_chart(const Table& table, const std::string& title) {
    Frame f;
    f.bottom = 110;  // room for rotated-ish judge names
    SvgDocument svg(f.width, f.height);
    double hi = 0.0;
    for (const auto& row : table.rows) {
        hi = std::max(hi, std::strtod(row[1].c_str(), nullptr) +
                              std::strtod(row[2].c_str(), nullptr));
    }
    auto [rlo, rhi] = padded_range(0.0, std::max(hi, 1.0));
    draw_axes(svg, f);
    value_axis_ticks(svg, f, rlo, rhi);
    svg.text(f.width / 2, 18, title, 13, "middle");
    const auto n = table.rows.size();
    const double slot = f.plot_w() / static_cast<double>(std::max<std::size_t>(n, 1));
    for (std::size_t i = 0; i < n; ++i) {
        double mean = std::strtod(table.rows[i][1].c_str(), nullptr);
        double stddev = std::strtod(table.rows[i][2].c_str(), nullptr);
        double x_mid = f.left + slot * (static_cast<double>(i) + 0.5);
        double t_mean = (mean - rlo) / (rhi - rlo);
        double t_zero = (0.0 - rlo) / (rhi - rlo);
        svg.rect(x_mid - slot * 0.3, f.y(t_mean), slot * 0.6,
                 (t_mean - t_zero) * f.plot_h(), "#1f77b4");
        double t_up = (mean + stddev - rlo) / (rhi - rlo);
        double t_dn = (mean - stddev - rlo) / (rhi - rlo);
        svg.line(x_mid, f.y(t_dn), x_mid, f.y(t_up), "#d62728", 1.5);
        svg.line(x_mid - 4, f.y(t_up), x_mid + 4, f.y(t_up), "#d62728", 1.5);
        svg.line(x_mid - 4, f.y(t_dn), x_mid + 4, f.y(t_dn), "#d62728", 1.5);
        svg.text(x_mid, f.top + f.plot_h() + 14 + 10 * static_cast<double>(i % 2),
                 table.rows[i][0], 8.5, "middle");
    }
    return svg.str();
}

/// Grid heatmap of validation R^2 over the two hyperparameters.
inline std::string heatmap_chart(const Table& table, const std::string& title) {
    std::vector<double> a_values;
    std::vector<double> b_values;
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& row : table.rows) {
        double a = std::strtod(row[0].c_str(), nullptr);
        double b = std::strtod(row[1].c_str(), nullptr);
        if (std::find(a_values.begin(), a_values.end(), a) == a_values.end()) {
            a_values.push_back(a);
        }
        if (std::find(b_values.begin(), b_values.end(), b) == b_values.end()) {
            b_values.push_back(b);
        }
        if (row[3] != "ok") continue;
        double v = std::strtod(row[2].c_str(), nullptr);
        if (first) {
            lo = hi = v;
            first = false;
        }
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::sort(a_values.begin(), a_values.end());
    std::sort(b_values.begin(), b_values.end());
    Frame f;
    SvgDocument svg(f.width, f.height);
    svg.text(f.width / 2, 18, title, 13, "middle");
    const double cw = f.plot_w() / static_cast<double>(std::max<std::size_t>(a_values.size(), 1));
    const double ch = f.plot_h() / static_cast<double>(std::max<std::size_t>(b_values.size(), 1));
    auto index_of = [](const std::vector<double>& values, double v) {
        return static_cast<std::size_t>(
            std::find(values.begin(), values.end(), v) - values.begin());
    };
    for (const auto& row : table.rows) {
        auto ai = index_of(a_values, std::strtod(row[0].c_str(), nullptr));
        auto bi = index_of(b_values, std::strtod(row[1].c_str(), nullptr));
        std::string fill = "#bbbbbb";
        if (row[3] == "ok") {
            double v = std::strtod(row[2].c_str(), nullptr);
            double t = hi > lo ? (v - lo) / (hi - lo) : 1.0;
            int red = static_cast<int>(255 * (1.0 - t));
            int green = static_cast<int>(64 + 160 * t);
            char color[8];
            std::snprintf(color, sizeof color, "#%02x%02x50", red, green);
            fill = color;
        }
        svg.rect(f.left + cw * static_cast<double>(ai),
                 f.top + f.plot_h() - ch * static_cast<double>(bi + 1), cw - 1, ch - 1, fill);
    }
    for (std::size_t i = 0; i < a_values.size(); ++i) {
        svg.text(f.left + cw * (static_cast<double>(i) + 0.5), f.top + f.plot_h() + 16,
                 format_coord(a_values[i]), 9, "middle");
    }
    for (std::size_t i = 0; i < b_values.size(); ++i) {
        svg.text(f.left - 6, f.top + f.plot_h() - ch * (static_cast<double>(i) + 0.5) + 3,
                 format_coord(b_values[i]), 9, "end");
    }
    return svg.str();
}

/// Scatter of mean judge score against label with a least-squares line and
/// the Pearson correlation, all computed from the table rows.
inline std::string scatter_chart(const Table& table, const std::string& title,
                                 double* pearson_out = nullptr) {
    std::vector<double> xs;
    std::vector<double> ys;
    xs.reserve(table.rows.size());
    ys.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        xs.push_back(std::strtod(row[1].c_str(), nullptr));
        ys.push_back(std::strtod(row[2].c_str(), nullptr));
    }
    Frame f;
    SvgDocument svg(f.width, f.height);
    auto [xlo, xhi] = padded_range(*std::min_element(xs.begin(), xs.end()),
                                   *std::max_element(xs.begin(), xs.end()));
    auto [ylo, yhi] = padded_range(*std::min_element(ys.begin(), ys.end()),
                                   *std::max_element(ys.begin(), ys.end()));
    draw_axes(svg, f);
    value_axis_ticks(svg, f, ylo, yhi);
    svg.text(f.width / 2, 18, title, 13, "middle");
    for (std::size_t i = 0; i < xs.size(); ++i) {
        svg.circle(f.x((xs[i] - xlo) / (xhi - xlo)), f.y((ys[i] - ylo) / (yhi - ylo)), 2.2,
                   "#1f77b488");
    }
    // Least-squares fit for the trend line.
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    if (sxx > 0.0) {
        double slope = sxy / sxx;
        double intercept = my - slope * mx;
        double y_at_lo = slope * xlo + intercept;
        double y_at_hi = slope * xhi + intercept;
        svg.line(f.x(0.0), f.y((y_at_lo - ylo) / (yhi - ylo)), f.x(1.0),
                 f.y((y_at_hi - ylo) / (yhi - ylo)), "#d62728", 1.5);
    }
    double r = pearson_r(xs, ys);
    if (pearson_out != nullptr) *pearson_out = r;
    svg.text(f.left + 10, f.top + 16, "r = " + format_double(r), 11);
    for (int i = 0; i <= 4; ++i) {
        double v = xlo + (xhi - xlo) * i / 4.0;
        svg.text(f.x((v - xlo) / (xhi - xlo)), f.top + f.plot_h() + 16, format_coord(v), 10,
                 "middle");
    }
    return svg.str();
}

}  // namespace charts

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

struct EmittedReport {
    std::vector<std::filesystem::path> files;
    double scatter_pearson = 0.0;
};

namespace detail {
inline void write_file(const std::filesystem::path& path, const std::string& content,
                       std::vector<std::filesystem::path>& files) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    files.push_back(path);
}
}  // namespace detail

/// Writes one CSV per table, one SVG per chart, and report.json. Charts are
/// rendered from the same Table objects the CSVs are written from, so plot
/// and table numbers agree exactly.
inline EmittedReport emit_report(const ExperimentReport& report,
                                 const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    EmittedReport emitted;
    fs::create_directories(out_dir / "tables");
    fs::create_directories(out_dir / "plots");

    auto tables = report_tables(report);
    std::map<std::string, const Table*> by_name;
    for (const auto& table : tables) {
        detail::write_file(out_dir / "tables" / (table.name + ".csv"), to_csv(table),
                           emitted.files);
        by_name[table.name] = &table;
    }

    if (auto it = by_name.find("model_comparison"); it != by_name.end()) {
        detail::write_file(out_dir / "plots" / "model_comparison.svg",
                           charts::bar_chart(*it->second, "Model comparison (test R^2)", 0, 1),
                           emitted.files);
    }
    for (const auto& [name, sweep] : report.sweeps) {
        auto it = by_name.find(name);
        if (it == by_name.end()) continue;
        std::vector<std::string> arms;
        for (const auto& p : sweep.points) {
            if (std::find(arms.begin(), arms.end(), p.arm) == arms.end()) arms.push_back(p.arm);
        }
        for (const auto& arm : arms) {
            detail::write_file(out_dir / "plots" / (name + "_" + arm + ".svg"),
                               charts::sweep_line_chart(*it->second, arm, name + ": " + arm),
                               emitted.files);
        }
    }
    if (auto it = by_name.find("importance_stability"); it != by_name.end()) {
        detail::write_file(
            out_dir / "plots" / "importance_stability.svg",
            charts::importance_chart(*it->second, "GAM judge importance (mean +- std)"),
            emitted.files);
    }
    if (auto it = by_name.find("gam_search"); it != by_name.end()) {
        detail::write_file(out_dir / "plots" / "gam_search_heatmap.svg",
                           charts::heatmap_chart(*it->second, "GAM search validation R^2"),
                           emitted.files);
    }
    if (auto it = by_name.find("diversity_scatter"); it != by_name.end()) {
        detail::write_file(
            out_dir / "plots" / "diversity_scatter.svg",
            charts::scatter_chart(*it->second,
                                  "Mean judge score vs label (" + report.scatter_condition + ")",
                                  &emitted.scatter_pearson),
            emitted.files);
    }

    nlohmann::json doc{{"provenance", report.provenance}};
    nlohmann::json model_r2 = nlohmann::json::object();
    for (const auto& score : report.model_r2) model_r2[score.model] = score.r2;
    doc["model_r2"] = std::move(model_r2);
    if (!report.scatter.empty()) doc["scatter_pearson"] = emitted.scatter_pearson;
    nlohmann::json table_names = nlohmann::json::array();
    for (const auto& table : tables) table_names.push_back(table.name);
    doc["tables"] = std::move(table_names);
    detail::write_file(out_dir / "report.json", doc.dump(2) + "\n", emitted.files);
    return emitted;
}

}  // namespace judgeagg
