// csv.hpp
// Minimal numeric CSV tables with shortest round-trip number formatting, so
// identical inputs always give byte-identical files.

#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace qgol {

inline std::string format_number(double v)
{
    if (v == 0.0)
        return "0";  // folds -0
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc{})
        throw std::runtime_error("number formatting failed");
    return std::string(buf, res.ptr);
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(std::vector<double> row)
    {
        if (row.size() != header_.size())
            throw std::invalid_argument("csv row width does not match header");
        rows_.push_back(std::move(row));
    }

    const std::vector<std::string>& header() const noexcept { return header_; }
    const std::vector<std::vector<double>>& rows() const noexcept { return rows_; }
    std::size_t size() const noexcept { return rows_.size(); }

    void write(std::ostream& os) const
    {
        for (std::size_t c = 0; c < header_.size(); ++c)
            os << (c ? "," : "") << header_[c];
        os << '\n';
        for (const auto& row : rows_) {
            for (std::size_t c = 0; c < row.size(); ++c)
                os << (c ? "," : "") << format_number(row[c]);
            os << '\n';
        }
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<double>> rows_;
};

/// Header columns "<prefix>1" ... "<prefix>n" appended to `lead`.
inline std::vector<std::string> indexed_columns(std::vector<std::string> lead, const std::string& prefix, int n)
{
    for (int k = 1; k <= n; ++k)
        lead.push_back(prefix + std::to_string(k));
    return lead;
}

} // namespace qgol
