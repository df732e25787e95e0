#pragma once

// CSV tables (LF line ends, 17 significant digits) and JSON report files.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mcre/errors.hpp"

namespace mcre::harness {

using Cell = std::variant<double, std::int64_t, std::uint64_t, bool, std::string>;

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_cell(const Cell& c) {
    struct Visitor {
        std::string operator()(double v) const { return format_real(v); }
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
        std::string operator()(std::uint64_t v) const { return std::to_string(v); }
        std::string operator()(bool v) const { return v ? "true" : "false"; }
        std::string operator()(const std::string& s) const {
            if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
            std::string out = "\"";
            for (char ch : s) {
                if (ch == '"') out += '"';
                out += ch;
            }
            return out + "\"";
        }
    };
    return std::visit(Visitor{}, c);
}

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) {
        if (row.size() != columns.size()) throw ArgumentError("Table::add: row width mismatch");
        rows.push_back(std::move(row));
    }

    std::string to_csv() const {
        std::string out;
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) out += ',';
            out += columns[i];
        }
        out += '\n';
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out += ',';
                out += format_cell(row[i]);
            }
            out += '\n';
        }
        return out;
    }
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RunError("cannot open " + path.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw RunError("write to " + path.string() + " failed");
}

inline void emit_csv(const Table& table, const std::filesystem::path& path) {
    write_text(path, table.to_csv());
}

inline void emit_json(const nlohmann::ordered_json& doc, const std::filesystem::path& path) {
    write_text(path, doc.dump(2) + "\n");
}

}  // namespace mcre::harness
