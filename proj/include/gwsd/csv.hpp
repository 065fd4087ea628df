#pragma once

// Delimited table writer. RFC-4180 quoting, LF line ends, floats at 10
// significant digits so equal inputs produce byte-equal files on every
// platform we build on.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "gwsd/errors.hpp"

namespace gwsd {

enum class TableFormat { csv, tsv };

inline const char* file_extension(TableFormat f) {
    return f == TableFormat::csv ? ".csv" : ".tsv";
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline std::string format_int(std::int64_t v) {
    return std::to_string(v);
}

class TableWriter {
public:
    explicit TableWriter(TableFormat format = TableFormat::csv)
        : sep_(format == TableFormat::csv ? ',' : '\t') {}

    void row(std::initializer_list<std::string> fields) {
        row(std::vector<std::string>(fields));
    }

    void row(const std::vector<std::string>& fields) {
        bool first = true;
        for (const auto& f : fields) {
            if (!first)
                body_ += sep_;
            body_ += escape(f);
            first = false;
        }
        body_ += '\n';
    }

    const std::string& str() const { return body_; }

    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw validation_error("cannot open output file: " + path);
        out.write(body_.data(), static_cast<std::streamsize>(body_.size()));
        if (!out)
            throw validation_error("failed writing output file: " + path);
    }

private:
    std::string escape(const std::string& f) const {
        bool needs_quote = false;
        for (const char c : f)
            if (c == sep_ || c == '"' || c == '\n' || c == '\r') {
                needs_quote = true;
                break;
            }
        if (!needs_quote)
            return f;
        std::string q = "\"";
        for (const char c : f) {
            if (c == '"')
                q += '"';
            q += c;
        }
        q += '"';
        return q;
    }

    char sep_;
    std::string body_;
};

} // namespace gwsd
