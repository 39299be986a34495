#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mpet/verify.hpp"

namespace mpet {

/// Fixed-precision scientific formatting, used everywhere a value lands in
/// a file so reruns are byte-identical.
std::string format_sci(double value, int digits = 6);
std::string format_fixed(double value, int digits = 3);

/// Comma-separated row writer ('.' decimal separator, no quoting needed
/// for the emitted content).
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out);

    void header(const std::vector<std::string>& columns);
    void row(const std::vector<std::string>& cells);

private:
    std::ostream* out_;
};

void write_convergence_csv(const ConvergenceTable& table, std::ostream& out);
/// Aligned plain-text table in the usual two-subtable layout
/// (u and xi, then the network pressures).
void write_convergence_text(const ConvergenceTable& table, std::ostream& out);

struct SvgSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Minimal SVG 1.1 line chart (axes, ticks, legend).
void write_svg_line_chart(std::ostream& out, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<SvgSeries>& series,
                          bool log_scale_y = false);

} // namespace mpet
