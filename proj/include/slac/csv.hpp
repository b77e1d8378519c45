#pragma once

#include <charconv>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "slac/error.hpp"

namespace slac::csv {

// Shortest round-trip formatting; stable across runs for identical doubles.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline double parse_double(std::string_view s, const std::string& context) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw DataError(context + ": bad number '" + std::string(s) + "'");
    return v;
}

inline long long parse_int(std::string_view s, const std::string& context) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw DataError(context + ": bad integer '" + std::string(s) + "'");
    return v;
}

// Splits one line on commas. With max_fields > 0, the last field keeps any
// remaining commas (used for free-text trailing columns).
inline std::vector<std::string_view> split(std::string_view line, std::size_t max_fields = 0) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        if (max_fields > 0 && out.size() + 1 == max_fields) {
            out.push_back(line.substr(start));
            break;
        }
        std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

// Reads all lines, tolerating CRLF; no trailing empty line entry.
inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw DataError("cannot open file for writing: " + path);
        path_ = path;
    }

    void raw_line(std::string_view line) { out_ << line << '\n'; }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            write_field(fields[i]);
        }
        out_ << '\n';
    }

    void close() {
        out_.close();
        if (!out_) throw DataError("write failed: " + path_);
    }

private:
    void write_field(std::string_view f) {
        if (f.find_first_of(",\"\n") == std::string_view::npos) {
            out_ << f;
            return;
        }
        out_ << '"';
        for (char c : f) {
            if (c == '"') out_ << '"';
            out_ << c;
        }
        out_ << '"';
    }

    std::ofstream out_;
    std::string path_;
};

}  // namespace slac::csv
