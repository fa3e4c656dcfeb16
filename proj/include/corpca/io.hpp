#pragma once

// File formats: binary graymaps (P5), pixmaps (P6), and the little-endian
// "u32 height, u32 width, payload" convention used for frames, flow fields
// and checkpoint matrices.

#include <corpca/error.hpp>
#include <corpca/linalg.hpp>
#include <corpca/motion.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace corpca::io {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

namespace detail {

template <typename T>
void put_le(std::vector<char>& out, T value) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    const auto bits = std::bit_cast<U>(value);
    for (std::size_t b = 0; b < sizeof(T); ++b) {
        out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
    }
}

template <typename T>
T get_le(const std::vector<char>& in, std::size_t offset) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) {
        bits |= static_cast<U>(static_cast<unsigned char>(in[offset + b])) << (8 * b);
    }
    return std::bit_cast<T>(bits);
}

inline std::vector<char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IngestError(path, 0, "cannot open file");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_all(const std::filesystem::path& path, const std::vector<char>& bytes) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("write failed: " + path.string());
    }
}

// Shared reader for dims header + N row-major planes of T.
template <typename T>
std::vector<Image> read_planes(const std::filesystem::path& path, int planes) {
    const std::vector<char> bytes = read_all(path);
    if (bytes.size() < 8) {
        throw IngestError(path, bytes.size(), "truncated header");
    }
    const auto h = get_le<std::uint32_t>(bytes, 0);
    const auto w = get_le<std::uint32_t>(bytes, 4);
    const std::size_t count = static_cast<std::size_t>(h) * w;
    const std::size_t expected = 8 + sizeof(T) * count * static_cast<std::size_t>(planes);
    if (bytes.size() != expected) {
        throw IngestError(path, std::min(bytes.size(), expected),
                          "payload size mismatch: expected " + std::to_string(expected) + " bytes, found " +
                              std::to_string(bytes.size()));
    }
    std::vector<Image> out;
    std::size_t offset = 8;
    for (int p = 0; p < planes; ++p) {
        Image img(h, w);
        for (std::size_t i = 0; i < count; ++i, offset += sizeof(T)) {
            const double value = static_cast<double>(get_le<T>(bytes, offset));
            if (!std::isfinite(value)) {
                throw IngestError(path, offset, "non-finite value");
            }
            img.data()[i] = value;
        }
        out.push_back(std::move(img));
    }
    return out;
}

template <typename T>
void write_planes(const std::filesystem::path& path, const std::vector<const Image*>& planes) {
    std::vector<char> bytes;
    const Image& first = *planes.front();
    bytes.reserve(8 + sizeof(T) * static_cast<std::size_t>(first.size()) * planes.size());
    put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(first.rows()));
    put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(first.cols()));
    for (const Image* p : planes) {
        for (Eigen::Index i = 0; i < p->size(); ++i) {
            put_le<T>(bytes, static_cast<T>(p->data()[i]));
        }
    }
    write_all(path, bytes);
}

} // namespace detail

/// Single-plane float32 frame: u32 H, u32 W, H*W f32 row-major.
inline void write_f32_frame(const std::filesystem::path& path, const Image& frame) {
    detail::write_planes<float>(path, {&frame});
}

inline Image read_f32_frame(const std::filesystem::path& path) { return detail::read_planes<float>(path, 1).front(); }

/// Flow export: u32 H, u32 W, then vx plane then vy plane as f32.
inline void write_flow(const std::filesystem::path& path, const FlowField& flow) {
    detail::write_planes<float>(path, {&flow.vx, &flow.vy});
}

inline FlowField read_flow(const std::filesystem::path& path) {
    auto planes = detail::read_planes<float>(path, 2);
    return {std::move(planes[0]), std::move(planes[1])};
}

/// Full-precision matrix (checkpoints): u32 rows, u32 cols, f64 row-major.
inline void write_f64_matrix(const std::filesystem::path& path, const Matrix& m) {
    const Image rowmajor = m;
    detail::write_planes<double>(path, {&rowmajor});
}

inline Matrix read_f64_matrix(const std::filesystem::path& path) { return detail::read_planes<double>(path, 1).front(); }

namespace detail {

// Next whitespace-delimited header token, skipping '#' comments.
inline std::string next_token(const std::vector<char>& bytes, std::size_t& pos, const std::filesystem::path& path) {
    for (;;) {
        while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) {
            ++pos;
        }
        if (pos < bytes.size() && bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') {
                ++pos;
            }
            continue;
        }
        break;
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
    }
    if (start == pos) {
        throw IngestError(path, pos, "truncated header");
    }
    return {bytes.begin() + static_cast<std::ptrdiff_t>(start), bytes.begin() + static_cast<std::ptrdiff_t>(pos)};
}

inline long parse_header_int(const std::string& token, std::size_t offset, const std::filesystem::path& path) {
    long value = 0;
    for (char ch : token) {
        if (ch < '0' || ch > '9' || value > 1'000'000) {
            throw IngestError(path, offset, "malformed header field '" + token + "'");
        }
        value = value * 10 + (ch - '0');
    }
    return value;
}

} // namespace detail

/// Binary graymap (P5) with maxval <= 255, scaled to [0, 1].
inline Image read_pgm(const std::filesystem::path& path) {
    const std::vector<char> bytes = detail::read_all(path);
    std::size_t pos = 0;
    if (detail::next_token(bytes, pos, path) != "P5") {
        throw IngestError(path, 0, "not a binary graymap (expected P5)");
    }
    std::size_t at = pos;
    const long width = detail::parse_header_int(detail::next_token(bytes, pos, path), at, path);
    at = pos;
    const long height = detail::parse_header_int(detail::next_token(bytes, pos, path), at, path);
    at = pos;
    const long maxval = detail::parse_header_int(detail::next_token(bytes, pos, path), at, path);
    if (width <= 0 || height <= 0) {
        throw IngestError(path, at, "zero image dimension");
    }
    if (maxval <= 0 || maxval > 255) {
        throw IngestError(path, at, "unsupported maxval " + std::to_string(maxval));
    }
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        throw IngestError(path, pos, "missing whitespace after header");
    }
    ++pos;
    const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (bytes.size() - pos < count) {
        throw IngestError(path, bytes.size(), "truncated pixel data");
    }
    Image img(height, width);
    for (std::size_t i = 0; i < count; ++i) {
        const auto value = static_cast<unsigned char>(bytes[pos + i]);
        if (value > maxval) {
            throw IngestError(path, pos + i, "pixel exceeds maxval");
        }
        img.data()[i] = static_cast<double>(value) / static_cast<double>(maxval);
    }
    return img;
}

/// Writes [0, 1] intensities as an 8-bit graymap (values clamped and rounded).
inline void write_pgm(const std::filesystem::path& path, const Image& img) {
    const std::string header = "P5\n" + std::to_string(img.cols()) + " " + std::to_string(img.rows()) + "\n255\n";
    std::vector<char> bytes(header.begin(), header.end());
    for (Eigen::Index i = 0; i < img.size(); ++i) {
        const double v = std::clamp(img.data()[i], 0.0, 1.0);
        bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
    }
    detail::write_all(path, bytes);
}

inline void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
    const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<char> bytes(header.begin(), header.end());
    for (std::uint8_t b : img.data) {
        bytes.push_back(static_cast<char>(b));
    }
    detail::write_all(path, bytes);
}

/// Reads a frame by extension: .pgm (P5) or the f32 binary convention otherwise.
inline Image read_frame(const std::filesystem::path& path) {
    if (path.extension() == ".pgm") {
        return read_pgm(path);
    }
    return read_f32_frame(path);
}

} // namespace corpca::io
