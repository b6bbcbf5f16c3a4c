#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "kts/matrix.hpp"

namespace kts {

// Text matrix: one observation per line, fields separated by `delimiter`,
// optionally one header line to skip. Parsed locale-independently.
struct CsvFormat {
    char delimiter = ',';
    bool has_header = false;
};

// Raw little-endian float64 in row-major order with a declared shape; the
// file size must be exactly rows * cols * 8 bytes.
struct RawF64Format {
    std::size_t rows = 0;
    std::size_t cols = 0;
};

using MatrixFormat = std::variant<CsvFormat, RawF64Format>;

namespace detail {

inline std::uint64_t byteswap_u64(std::uint64_t v) noexcept {
    v = ((v & 0x00FF00FF00FF00FFULL) << 8) | ((v >> 8) & 0x00FF00FF00FF00FFULL);
    v = ((v & 0x0000FFFF0000FFFFULL) << 16) | ((v >> 16) & 0x0000FFFF0000FFFFULL);
    return (v << 32) | (v >> 32);
}

inline std::string_view trim(std::string_view token) {
    while (!token.empty() && (token.front() == ' ' || token.front() == '\t'))
        token.remove_prefix(1);
    while (!token.empty() &&
           (token.back() == ' ' || token.back() == '\t' || token.back() == '\r'))
        token.remove_suffix(1);
    return token;
}

inline double parse_field(std::string_view token, const std::filesystem::path& path,
                          std::size_t line, std::size_t column) {
    const std::string_view field = trim(token);
    double value = 0.0;
    const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    require(ec == std::errc{} && end == field.data() + field.size() && !field.empty(),
            ErrorCode::ParseError,
            path.string() + ": line " + std::to_string(line) + ", field " +
                std::to_string(column) + ": cannot parse '" + std::string(token) + "'");
    require(std::isfinite(value), ErrorCode::InvalidData,
            path.string() + ": line " + std::to_string(line) + ", field " +
                std::to_string(column) + ": non-finite value");
    return value;
}

inline Matrix load_csv(const std::filesystem::path& path, const CsvFormat& format) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::ParseError, path.string() + ": cannot open");

    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::string line;
    std::size_t line_number = 0;
    bool skip_header = format.has_header;
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) continue;
        if (skip_header) {
            skip_header = false;
            continue;
        }
        std::size_t field_count = 0;
        std::string_view rest(line);
        while (true) {
            const std::size_t cut = rest.find(format.delimiter);
            const std::string_view token = rest.substr(0, cut);
            values.push_back(parse_field(token, path, line_number, field_count + 1));
            ++field_count;
            if (cut == std::string_view::npos) break;
            rest.remove_prefix(cut + 1);
        }
        if (rows == 0) {
            cols = field_count;
        } else {
            require(field_count == cols, ErrorCode::ParseError,
                    path.string() + ": line " + std::to_string(line_number) + ": expected " +
                        std::to_string(cols) + " fields, found " +
                        std::to_string(field_count));
        }
        ++rows;
    }
    require(rows >= 1 && cols >= 1, ErrorCode::ParseError,
            path.string() + ": no data rows");
    Matrix out(static_cast<Index>(rows), static_cast<Index>(cols));
    std::memcpy(out.data(), values.data(), values.size() * sizeof(double));
    return out;
}

inline Matrix load_raw(const std::filesystem::path& path, const RawF64Format& format) {
    require(format.rows >= 1 && format.cols >= 1, ErrorCode::FormatError,
            path.string() + ": raw format needs a positive declared shape");
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    require(in.good(), ErrorCode::FormatError, path.string() + ": cannot open");
    const auto bytes = static_cast<std::uint64_t>(in.tellg());
    const std::uint64_t expected =
        static_cast<std::uint64_t>(format.rows) * format.cols * sizeof(double);
    require(bytes == expected, ErrorCode::FormatError,
            path.string() + ": file holds " + std::to_string(bytes) +
                " bytes but the declared shape needs " + std::to_string(expected));
    in.seekg(0);
    Matrix out(static_cast<Index>(format.rows), static_cast<Index>(format.cols));
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(expected));
    require(in.good(), ErrorCode::FormatError, path.string() + ": short read");
    if constexpr (std::endian::native == std::endian::big) {
        auto* words = reinterpret_cast<std::uint64_t*>(out.data());
        for (std::size_t i = 0; i < format.rows * format.cols; ++i)
            words[i] = byteswap_u64(words[i]);
    }
    require_finite(out, path.string());
    return out;
}

} // namespace detail

inline Matrix load_matrix(const std::filesystem::path& path, const MatrixFormat& format) {
    if (const auto* csv = std::get_if<CsvFormat>(&format))
        return detail::load_csv(path, *csv);
    return detail::load_raw(path, std::get<RawF64Format>(format));
}

inline void save_matrix_csv(const std::filesystem::path& path, const Matrix& matrix,
                            char delimiter = ',') {
    std::ofstream out(path);
    require(out.good(), ErrorCode::FormatError, path.string() + ": cannot open for writing");
    char buffer[64];
    for (Index i = 0; i < matrix.rows(); ++i) {
        for (Index j = 0; j < matrix.cols(); ++j) {
            const auto [end, ec] =
                std::to_chars(buffer, buffer + sizeof(buffer), matrix(i, j));
            require(ec == std::errc{}, ErrorCode::FormatError, "save_matrix_csv: format");
            if (j > 0) out.put(delimiter);
            out.write(buffer, end - buffer);
        }
        out.put('\n');
    }
    require(out.good(), ErrorCode::FormatError, path.string() + ": write failed");
}

inline void save_matrix_raw(const std::filesystem::path& path, const Matrix& matrix) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorCode::FormatError, path.string() + ": cannot open for writing");
    if constexpr (std::endian::native == std::endian::big) {
        std::vector<std::uint64_t> words(static_cast<std::size_t>(matrix.size()));
        std::memcpy(words.data(), matrix.data(), words.size() * sizeof(std::uint64_t));
        for (auto& word : words) word = detail::byteswap_u64(word);
        out.write(reinterpret_cast<const char*>(words.data()),
                  static_cast<std::streamsize>(words.size() * sizeof(std::uint64_t)));
    } else {
        out.write(reinterpret_cast<const char*>(matrix.data()),
                  static_cast<std::streamsize>(static_cast<std::size_t>(matrix.size()) *
                                               sizeof(double)));
    }
    require(out.good(), ErrorCode::FormatError, path.string() + ": write failed");
}

} // namespace kts
