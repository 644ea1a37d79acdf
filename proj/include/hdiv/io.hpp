#pragma once
#include <hdiv/dgp.hpp>
#include <hdiv/diagnostics.hpp>
#include <hdiv/tuning.hpp>
#include <hdiv/two_stage.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

namespace hdiv {
namespace io {

inline std::vector<std::string> split(std::string_view line, char sep = ',')
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        std::string_view cell = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
        out.emplace_back(cell);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::optional<double> parse_double(std::string_view s)
{
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

/// Shortest text that parses back to the same double.
inline std::string format_exact(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline std::string format_fixed(double v, int decimals = 4)
{
    if (std::isnan(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
}

/**
 * Parses the ingestion schema: header `y,x1..x{p},z1..z{q}`, one
 * observation per row. The result has no truth and is standardized.
 */
inline Dataset parse_dataset_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::Data, "schema error: empty file");
    const auto header = split(line);
    if (header.empty() || header[0] != "y") {
        throw Error(ErrorKind::Data, "schema error: column 1 is '" + (header.empty() ? "" : header[0]) + "', expected 'y'");
    }
    Index p_x = 0;
    Index p_z = 0;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const std::string& name = header[c];
        const std::string want_x = "x" + std::to_string(p_x + 1);
        const std::string want_z = "z" + std::to_string(p_z + 1);
        if (p_z == 0 && name == want_x) {
            ++p_x;
        } else if (name == want_z) {
            ++p_z;
        } else {
            throw Error(ErrorKind::Data, "schema error: column " + std::to_string(c + 1) + " is '" + name +
                                             "', expected '" + (p_z == 0 ? want_x + "' or '" + want_z : want_z) + "'");
        }
    }
    if (p_x == 0 || p_z == 0) throw Error(ErrorKind::Data, "schema error: need at least one x and one z column");

    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        if (cells.size() != header.size()) {
            throw Error(ErrorKind::Data, "schema error: line " + std::to_string(line_no) + " has " +
                                             std::to_string(cells.size()) + " cells, expected " +
                                             std::to_string(header.size()));
        }
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto v = parse_double(cells[c]);
            if (!v) {
                throw Error(ErrorKind::Data, "non-numeric cell '" + cells[c] + "' at line " + std::to_string(line_no) +
                                                 ", column '" + header[c] + "'");
            }
            row[c] = *v;
        }
        rows.push_back(std::move(row));
    }
    const auto n = static_cast<Index>(rows.size());
    Dataset data;
    data.Y.resize(n);
    data.X.resize(n, p_x);
    data.Z.resize(n, p_z);
    for (Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        data.Y[i] = r[0];
        for (Index j = 0; j < p_x; ++j) data.X(i, j) = r[static_cast<std::size_t>(1 + j)];
        for (Index h = 0; h < p_z; ++h) data.Z(i, h) = r[static_cast<std::size_t>(1 + p_x + h)];
    }
    return standardize(std::move(data));
}

inline Dataset read_dataset_csv(const std::string& path)
{
    return parse_dataset_csv(read_file(path));
}

/// Inverse of parse_dataset_csv; values written with round-trip precision.
inline std::string dataset_to_csv(const Dataset& data)
{
    std::string out = "y";
    for (Index j = 0; j < data.p_x(); ++j) out += ",x" + std::to_string(j + 1);
    for (Index h = 0; h < data.p_z(); ++h) out += ",z" + std::to_string(h + 1);
    out += '\n';
    for (Index i = 0; i < data.n(); ++i) {
        out += format_exact(data.Y[i]);
        for (Index j = 0; j < data.p_x(); ++j) out += ',' + format_exact(data.X(i, j));
        for (Index h = 0; h < data.p_z(); ++h) out += ',' + format_exact(data.Z(i, h));
        out += '\n';
    }
    return out;
}

/// `index,estimate,std_error,z_stat,selected`, 1-based index; blank SE/z for unselected coefficients.
inline std::string fit_report_csv(const TwoStageFit& fit)
{
    std::string out = "index,estimate,std_error,z_stat,selected\n";
    std::vector<bool> selected(static_cast<std::size_t>(fit.beta_hat.size()), false);
    for (Index j : fit.support_beta) selected[static_cast<std::size_t>(j)] = true;
    for (Index j = 0; j < fit.beta_hat.size(); ++j) {
        const double se = fit.std_error_of(j);
        out += std::to_string(j + 1) + ',' + format_exact(fit.beta_hat[j]) + ',';
        if (!std::isnan(se)) out += format_exact(se) + ',' + format_exact(fit.beta_hat[j] / se);
        else out += ',';
        out += selected[static_cast<std::size_t>(j)] ? ",1\n" : ",0\n";
    }
    return out;
}

inline std::string cv_curve_csv(const CvResult& cv)
{
    std::string out = "lambda,cv_mse,n_folds_used\n";
    for (const auto& pt : cv.curve) {
        out += format_exact(pt.lambda) + ',' + (std::isnan(pt.cv_mse) ? std::string() : format_exact(pt.cv_mse)) + ',' +
               std::to_string(pt.n_folds_used) + '\n';
    }
    return out;
}

/// Report block as `# key = value` lines, suitable for appending to a CSV or log.
inline std::string commented(const std::string& title, const std::string& block)
{
    std::string out = "# " + title + '\n';
    std::istringstream in(block);
    std::string line;
    while (std::getline(in, line)) out += "# " + line + '\n';
    return out;
}

} // namespace io
} // namespace hdiv
