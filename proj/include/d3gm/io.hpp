#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

// Deterministic text output: CSVs use '.' decimal, ',' separator, a header
// row, and LF newlines; numbers are printed with %.12g so reruns are
// byte-identical. JSON objects serialize with sorted keys.

namespace d3gm {

inline std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string csv_num(std::uint64_t v) { return std::to_string(v); }
inline std::string csv_num(std::int64_t v) { return std::to_string(v); }
inline std::string csv_num(int v) { return std::to_string(v); }

class CsvFile {
  public:
    CsvFile(const std::string& path, const std::vector<std::string>& header)
        : out_(path, std::ios::binary), width_(header.size()) {
        if (!out_) throw std::runtime_error("cannot write " + path);
        write_cells(header);
    }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != width_)
            throw std::invalid_argument("csv row width mismatch");
        write_cells(cells);
    }

  private:
    void write_cells(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    std::ofstream out_;
    std::size_t width_;
};

inline void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

inline void ensure_directory(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory " + dir);
}

}  // namespace d3gm
