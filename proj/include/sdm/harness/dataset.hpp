#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdm/bitvector.hpp"
#include "sdm/densevector.hpp"
#include "sdm/patterns.hpp"
#include "sdm/rng.hpp"

namespace sdm {

// Row-major flattened dataset; image sources are scaled to [0, 1].
struct Dataset {
    std::size_t count = 0;
    std::size_t dim = 0;
    std::vector<double> values;

    const double* row(std::size_t i) const { return values.data() + i * dim; }
    DenseVector row_vector(std::size_t i) const {
        return DenseVector(row(i), row(i) + dim);
    }
};

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::uint32_t read_be32(std::ifstream& f, std::size_t offset, const std::string& path) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4)) {
        throw FormatError(path + ": truncated header at byte offset " + std::to_string(offset));
    }
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace detail

// IDX reader. Accepts the uint8 rank-3 image magic 0x00000803 (flattening
// each height x width frame) and the uint8 rank-1 label magic 0x00000801.
inline Dataset load_idx(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError(path + ": cannot open");
    const std::uint32_t magic = detail::read_be32(f, 0, path);
    Dataset out;
    std::size_t offset = 4;
    if (magic == 0x00000803u) {
        const std::uint32_t count = detail::read_be32(f, offset, path);
        const std::uint32_t rows = detail::read_be32(f, offset + 4, path);
        const std::uint32_t cols = detail::read_be32(f, offset + 8, path);
        offset += 12;
        if (rows == 0 || cols == 0 || count == 0)
            throw FormatError(path + ": zero dimension in header");
        if (static_cast<std::uint64_t>(count) * rows * cols > (1ull << 33))
            throw FormatError(path + ": dimension overflow");
        out.count = count;
        out.dim = static_cast<std::size_t>(rows) * cols;
    } else if (magic == 0x00000801u) {
        const std::uint32_t count = detail::read_be32(f, offset, path);
        offset += 4;
        out.count = count;
        out.dim = 1;
    } else {
        char buf[64];
        std::snprintf(buf, sizeof(buf), ": bad magic 0x%08x at byte offset 0", magic);
        throw FormatError(path + buf);
    }
    const std::size_t total = out.count * out.dim;
    std::vector<unsigned char> bytes(total);
    if (!f.read(reinterpret_cast<char*>(bytes.data()), total)) {
        const std::size_t got = static_cast<std::size_t>(f.gcount());
        throw FormatError(path + ": truncated data, expected " + std::to_string(total) +
                          " bytes at offset " + std::to_string(offset) + ", got " +
                          std::to_string(got));
    }
    out.values.resize(total);
    const double scale = (out.dim == 1) ? 1.0 : (1.0 / 255.0);
    for (std::size_t i = 0; i < total; ++i) out.values[i] = bytes[i] * scale;
    return out;
}

// Raw row-major uint8 frames; 3-channel input collapses to the channel mean.
inline Dataset load_raw_grayscale(const std::string& path, int height, int width,
                                  int channels) {
    if (height < 1 || width < 1 || (channels != 1 && channels != 3))
        throw std::invalid_argument("load_raw_grayscale: bad shape");
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw FormatError(path + ": cannot open");
    const std::size_t size = static_cast<std::size_t>(f.tellg());
    const std::size_t frame = static_cast<std::size_t>(height) * width * channels;
    if (size == 0 || size % frame != 0)
        throw FormatError(path + ": size " + std::to_string(size) +
                          " is not a multiple of frame size " + std::to_string(frame));
    f.seekg(0);
    std::vector<unsigned char> bytes(size);
    if (!f.read(reinterpret_cast<char*>(bytes.data()), size))
        throw FormatError(path + ": read failed");
    Dataset out;
    out.count = size / frame;
    out.dim = static_cast<std::size_t>(height) * width;
    out.values.resize(out.count * out.dim);
    for (std::size_t i = 0; i < out.count; ++i) {
        const unsigned char* src = bytes.data() + i * frame;
        for (std::size_t px = 0; px < out.dim; ++px) {
            double v = 0.0;
            for (int c = 0; c < channels; ++c) v += src[px * channels + c];
            out.values[i * out.dim + px] = v / (channels * 255.0);
        }
    }
    return out;
}

inline Dataset random_uniform_dataset(std::size_t m, std::size_t n, Rng& rng) {
    Dataset out;
    out.count = m;
    out.dim = n;
    out.values.resize(m * n);
    for (auto& v : out.values) v = rng.uniform(-1.0, 1.0);
    return out;
}

// Deterministic correlated image surrogate: class prototypes built from
// smooth radial bumps, with per-image bump jitter and pixel noise. Used by
// the projection pipeline when no real image files are on disk.
inline Dataset synthetic_correlated_images(std::size_t m, int height, int width,
                                           int classes, Rng& rng) {
    Dataset out;
    out.count = m;
    out.dim = static_cast<std::size_t>(height) * width;
    out.values.resize(m * out.dim);
    const int bumps = 6;
    struct Bump {
        double cx, cy, s, a;
    };
    std::vector<std::vector<Bump>> protos(classes);
    for (auto& pb : protos) {
        pb.resize(bumps);
        for (auto& b : pb) {
            b.cx = rng.uniform(0.15, 0.85) * width;
            b.cy = rng.uniform(0.15, 0.85) * height;
            b.s = rng.uniform(1.5, 4.0);
            b.a = rng.uniform(0.5, 1.0);
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        const auto& pb = protos[rng.uniform_below(classes)];
        std::vector<Bump> jb = pb;
        for (auto& b : jb) {
            b.cx += rng.gaussian() * 1.2;
            b.cy += rng.gaussian() * 1.2;
            b.a *= 1.0 + 0.25 * rng.gaussian();
        }
        double* px = out.values.data() + i * out.dim;
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                double v = 0.0;
                for (const auto& b : jb) {
                    const double dx = x - b.cx, dy = y - b.cy;
                    v += b.a * std::exp(-(dx * dx + dy * dy) / (2.0 * b.s * b.s));
                }
                v += 0.02 * rng.gaussian();
                px[y * width + x] = std::min(1.0, std::max(0.0, v));
            }
        }
    }
    return out;
}

// Sign binarization: positive values map to 1. Pairwise distances track the
// cosine map for zero-centered data.
inline BitVector binarize_by_sign(const double* row, int n) {
    BitVector v(n);
    for (int j = 0; j < n; ++j)
        if (row[j] > 0.0) v.set(j, true);
    return v;
}

inline BitPatterns binarize_dataset(const Dataset& data) {
    std::vector<BitVector> rows;
    rows.reserve(data.count);
    for (std::size_t i = 0; i < data.count; ++i)
        rows.push_back(binarize_by_sign(data.row(i), static_cast<int>(data.dim)));
    return BitPatterns::autoassociative(std::move(rows));
}

inline DensePatterns normalize_dataset(const Dataset& data) {
    std::vector<DenseVector> rows;
    rows.reserve(data.count);
    for (std::size_t i = 0; i < data.count; ++i) {
        DenseVector v = data.row_vector(i);
        normalize_in_place(v);
        rows.push_back(std::move(v));
    }
    return DensePatterns::autoassociative(std::move(rows));
}

}  // namespace sdm
