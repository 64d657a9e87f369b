#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <fmt/core.h>
#include <json.hpp>

#include "parastab/error.hpp"

namespace parastab::cli {

using Json = nlohmann::ordered_json;

/// Numbers are written with 17 significant digits; non-finite values become the strings
/// "inf", "-inf" and "nan" since JSON has no literal for them.
inline Json number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::string s = fmt::format("{:.17g}", v);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

namespace detail {

inline void dump(const Json& j, std::string& out, int indent) {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ",\n";
                first = false;
                out += inner + Json(it.key()).dump() + ": ";
                dump(it.value(), out, indent + 1);
            }
            out += "\n" + pad + "}";
            return;
        }
        case Json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i > 0) out += ",\n";
                out += inner;
                dump(j[i], out, indent + 1);
            }
            out += "\n" + pad + "]";
            return;
        }
        case Json::value_t::number_float:
            out += format_double(j.get<double>());
            return;
        default:
            out += j.dump();
    }
}

}  // namespace detail

inline std::string to_json_text(const Json& j) {
    std::string out;
    detail::dump(j, out, 0);
    out += "\n";
    return out;
}

inline Json parse_json_text(const std::string& text) { return Json::parse(text); }

/// Column-named numeric table written as CSV with a header row.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    void add(std::vector<double> row) {
        require(row.size() == header.size(), ErrorCode::DimensionMismatch, "table row width");
        rows.push_back(std::move(row));
    }
};

inline std::string to_csv_text(const Table& t) {
    std::string out;
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (i > 0) out += ',';
        out += t.header[i];
    }
    out += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i > 0) out += ',';
            out += format_double(row[i]);
        }
        out += '\n';
    }
    return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.close();
    if (!out) {
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    }
}

}  // namespace parastab::cli
