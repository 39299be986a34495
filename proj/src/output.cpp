#include "mpet/output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace mpet {

std::string format_sci(double value, int digits) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.*e", digits, value);
    return buffer;
}

std::string format_fixed(double value, int digits) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.*f", digits, value);
    return buffer;
}

CsvWriter::CsvWriter(std::ostream& out) : out_(&out) {}

void CsvWriter::header(const std::vector<std::string>& columns) { row(columns); }

void CsvWriter::row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) {
            *out_ << ",";
        }
        *out_ << cells[i];
    }
    *out_ << "\r\n";
}

void write_convergence_csv(const ConvergenceTable& table, std::ostream& out) {
    CsvWriter csv(out);
    csv.header({"inv_h[-]", "field", "l2_error[-]", "l2_order[-]", "h1_error[-]",
                "h1_order[-]", "h1_seminorm[-]"});
    for (std::size_t level = 0; level < table.rows.size(); ++level) {
        for (const ErrorRecord& rec : table.rows[level]) {
            csv.row({std::to_string(rec.inv_h), rec.field, format_sci(rec.l2),
                     rec.order_l2 ? format_fixed(*rec.order_l2, 2) : "",
                     format_sci(rec.h1),
                     rec.order_h1 ? format_fixed(*rec.order_h1, 2) : "",
                     format_sci(rec.h1_semi)});
        }
    }
}

namespace {

std::string error_pair(const ErrorRecord& rec) {
    return format_sci(rec.l2, 3) + " & " + format_sci(rec.h1, 3);
}

std::string order_pair(const ErrorRecord& rec) {
    if (!rec.order_l2) {
        return "";
    }
    return format_fixed(*rec.order_l2, 2) + " & " + format_fixed(*rec.order_h1, 2);
}

void write_subtable(const ConvergenceTable& table, std::size_t field_a,
                    std::size_t field_b, std::ostream& out) {
    const std::string name_a = table.rows.front()[field_a].field;
    const std::string name_b = table.rows.front()[field_b].field;
    out << std::left << std::setw(6) << "1/h" << std::setw(26)
        << ("L2 & H1 errors of " + name_a) << std::setw(16) << "Orders"
        << std::setw(26) << ("L2 & H1 errors of " + name_b) << std::setw(16)
        << "Orders" << "\n";
    for (std::size_t level = 0; level < table.rows.size(); ++level) {
        const auto& row = table.rows[level];
        out << std::left << std::setw(6) << table.levels[level] << std::setw(26)
            << error_pair(row[field_a]) << std::setw(16) << order_pair(row[field_a])
            << std::setw(26) << error_pair(row[field_b]) << std::setw(16)
            << order_pair(row[field_b]) << "\n";
    }
}

} // namespace

void write_convergence_text(const ConvergenceTable& table, std::ostream& out) {
    if (table.rows.empty()) {
        return;
    }
    write_subtable(table, 0, 1, out);
    out << "\n";
    const std::size_t n_fields = table.rows.front().size();
    for (std::size_t f = 2; f + 1 < n_fields; f += 2) {
        write_subtable(table, f, f + 1, out);
        out << "\n";
    }
}

void write_svg_line_chart(std::ostream& out, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<SvgSeries>& series, bool log_scale_y) {
    const double width = 720.0, height = 480.0;
    const double left = 70.0, right = 30.0, top = 40.0, bottom = 50.0;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    double x_min = std::numeric_limits<double>::max(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    for (const SvgSeries& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double y = s.y[i];
            if (log_scale_y) {
                if (!(y > 0.0)) {
                    continue;
                }
                y = std::log10(y);
            }
            x_min = std::min(x_min, s.x[i]);
            x_max = std::max(x_max, s.x[i]);
            y_min = std::min(y_min, y);
            y_max = std::max(y_max, y);
        }
    }
    if (x_min >= x_max) {
        x_max = x_min + 1.0;
    }
    if (y_min >= y_max) {
        y_max = y_min + 1.0;
    }
    const auto map_x = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
    const auto map_y = [&](double y) {
        if (log_scale_y) {
            y = std::log10(std::max(y, 1e-300));
        }
        return top + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;
    };
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                            "#ff7f0e", "#8c564b"};

    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
        << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
    out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w
        << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";

    const int n_ticks = 5;
    for (int i = 0; i <= n_ticks; ++i) {
        const double fx = x_min + (x_max - x_min) * i / n_ticks;
        const double px = map_x(fx);
        out << "<line x1=\"" << px << "\" y1=\"" << top + plot_h << "\" x2=\"" << px
            << "\" y2=\"" << top + plot_h + 5 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << px << "\" y=\"" << top + plot_h + 20
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"11\">"
            << format_fixed(fx, 2) << "</text>\n";
        const double fy = y_min + (y_max - y_min) * i / n_ticks;
        const double py = top + (1.0 - static_cast<double>(i) / n_ticks) * plot_h;
        out << "<line x1=\"" << left - 5 << "\" y1=\"" << py << "\" x2=\"" << left
            << "\" y2=\"" << py << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << left - 8 << "\" y=\"" << py + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << (log_scale_y ? ("1e" + format_fixed(fy, 1)) : format_sci(fy, 1))
            << "</text>\n";
    }
    out << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 8
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << x_label << "</text>\n";
    out << "<text x=\"16\" y=\"" << top + plot_h / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        << "transform=\"rotate(-90 16 " << top + plot_h / 2 << ")\">" << y_label
        << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = colors[s % 6];
        out << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            if (log_scale_y && !(series[s].y[i] > 0.0)) {
                continue;
            }
            out << format_fixed(map_x(series[s].x[i]), 2) << ","
                << format_fixed(map_y(series[s].y[i]), 2) << " ";
        }
        out << "\"/>\n";
        out << "<text x=\"" << left + plot_w - 6 << "\" y=\""
            << top + 16 + 16 * static_cast<double>(s)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" "
            << "fill=\"" << color << "\">" << series[s].label << "</text>\n";
    }
    out << "</svg>\n";
}

} // namespace mpet
