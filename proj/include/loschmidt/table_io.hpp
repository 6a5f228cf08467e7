#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace loschmidt {

// Canonical shortest-exact double formatting: %.17g always round-trips, and
// identical values always print identically, so rerunning a config rewrites
// files byte for byte.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hash_hex(const std::string& text) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
    return buf;
}

// One output series: tab-separated numeric columns under a '#'-prefixed
// header that carries the config hash.
class Table {
public:
    Table(std::string name, std::vector<std::string> columns)
        : name_(std::move(name)), columns_(std::move(columns)) {}

    const std::string& name() const { return name_; }
    std::size_t rows() const { return rows_.size(); }

    void add_row(const std::vector<double>& values) {
        if (values.size() != columns_.size())
            throw std::invalid_argument("Table " + name_ + ": column count mismatch");
        std::string line;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) line += '\t';
            line += format_double(values[i]);
        }
        rows_.push_back(std::move(line));
    }

    void add_text_row(const std::vector<std::string>& values) {
        if (values.size() != columns_.size())
            throw std::invalid_argument("Table " + name_ + ": column count mismatch");
        std::string line;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) line += '\t';
            line += values[i];
        }
        rows_.push_back(std::move(line));
    }

    void write(const std::string& dir, const std::string& config_hash) const {
        const std::string path = dir + "/" + name_;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << "# " << name_ << "\n";
        out << "# config_hash = " << config_hash << "\n";
        out << "#";
        for (const auto& c : columns_) out << " " << c;
        out << "\n";
        for (const auto& r : rows_) out << r << "\n";
        if (!out) throw std::runtime_error("write failed: " + path);
    }

private:
    std::string name_;
    std::vector<std::string> columns_;
    std::vector<std::string> rows_;
};

}  // namespace loschmidt
