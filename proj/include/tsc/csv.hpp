#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "tsc/errors.hpp"

namespace tsc {

// RFC 4180 CSV writer: UTF-8, '.' decimal point, mandatory header, fields
// quoted only when needed. Numeric formatting is fixed ("%.12g") so reruns
// are byte-identical.
class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw ConfigError("out: cannot open '" + path + "' for writing");
    }

    void header(const std::vector<std::string>& cols) { row_strings(cols); }

    void field(const std::string& s) { cells_.push_back(quote(s)); }
    void field(double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        cells_.emplace_back(buf);
    }
    void field(std::int64_t v) { cells_.push_back(std::to_string(v)); }
    void field(int v) { cells_.push_back(std::to_string(v)); }

    void end_row() {
        std::string line;
        for (std::size_t i = 0; i < cells_.size(); ++i) {
            if (i) line += ',';
            line += cells_[i];
        }
        line += "\r\n";
        out_ << line;
        cells_.clear();
    }

    void row_strings(const std::vector<std::string>& cols) {
        for (const auto& c : cols) field(c);
        end_row();
    }

private:
    static std::string quote(const std::string& s) {
        if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q += '"';
            q += c;
        }
        q += '"';
        return q;
    }

    std::ofstream out_;
    std::vector<std::string> cells_;
};

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace tsc
