#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace switchctl {

/**
 * @brief Shortest round-trip decimal rendering of a double (std::to_chars).
 *
 * Locale-free and byte-stable across runs, which the determinism contract
 * (identical config + seed => identical artifact hashes) depends on.
 */
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc())
        throw std::runtime_error("format_double: to_chars failed");
    return std::string(buf, res.ptr);
}

/**
 * @brief Minimal CSV emitter: mandatory header, '.' decimal point, LF line
 * endings, no quoting (all produced fields are numeric or plain tokens).
 */
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) {
        if (header.empty()) throw std::invalid_argument("CsvWriter: header must not be empty");
        columns_ = header.size();
        append_row(header);
    }

    std::size_t columns() const noexcept { return columns_; }

    void append_row(const std::vector<std::string>& fields) {
        if (fields.size() != columns_)
            throw std::invalid_argument("CsvWriter: row has " + std::to_string(fields.size()) +
                                        " fields, expected " + std::to_string(columns_));
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) body_.push_back(',');
            body_ += fields[i];
        }
        body_.push_back('\n');
    }

    void append_numeric_row(const std::vector<double>& values) {
        std::vector<std::string> fields;
        fields.reserve(values.size());
        for (double v : values) fields.push_back(format_double(v));
        append_row(fields);
    }

    const std::string& str() const noexcept { return body_; }

    void write(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("CsvWriter: cannot open " + path.string());
        out.write(body_.data(), static_cast<std::streamsize>(body_.size()));
        if (!out) throw std::runtime_error("CsvWriter: short write to " + path.string());
    }

private:
    std::size_t columns_ = 0;
    std::string body_;
};

} // namespace switchctl
