#pragma once

// Minimal CSV writer: comma separated, header row, '.' decimal point, LF line
// endings, shortest round-trip formatting for doubles.

#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sfl/core.hpp"

namespace sfl {

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

class CsvWriter {
public:
    using Cell = std::variant<double, long long, std::string>;

    CsvWriter(std::ostream& os, std::initializer_list<std::string_view> header) : os_(os) {
        bool first = true;
        for (auto h : header) {
            os_ << (first ? "" : ",") << h;
            first = false;
        }
        os_ << '\n';
        columns_ = header.size();
    }
    CsvWriter(std::ostream& os, const std::vector<std::string>& header) : os_(os) {
        for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
        os_ << '\n';
        columns_ = header.size();
    }

    void row(const std::vector<Cell>& cells) {
        if (cells.size() != columns_) throw Error("csv row has the wrong number of columns");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os_ << ',';
            std::visit(
                [&](const auto& c) {
                    using T = std::decay_t<decltype(c)>;
                    if constexpr (std::is_same_v<T, double>)
                        os_ << format_double(c);
                    else
                        os_ << c;
                },
                cells[i]);
        }
        os_ << '\n';
    }

private:
    std::ostream& os_;
    std::size_t columns_ = 0;
};

/// Opens a file for writing in binary mode (LF line endings on every
/// platform) and throws with the path on failure.
inline std::ofstream open_output(const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open output file: " + path);
    return f;
}

}  // namespace sfl
