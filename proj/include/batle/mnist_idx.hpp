#pragma once
// IDX (MNIST) binary reader: big-endian headers, magic 0x00000803 for image
// files and 0x00000801 for label files, unsigned byte payloads.

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace batle {

struct ImageSet {
    std::size_t count = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> pixels;  // count * rows * cols
    std::vector<std::uint8_t> labels;  // count

    const std::uint8_t* image(std::size_t i) const { return pixels.data() + i * rows * cols; }
    std::size_t image_size() const { return rows * cols; }
};

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("idx: truncated header in " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

inline void load_idx_images(const std::string& path, ImageSet& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("idx: cannot open " + path);
    const std::uint32_t magic = detail::read_be_u32(in, path);
    if (magic != kIdxImageMagic)
        throw std::runtime_error("idx: bad image magic in " + path + ": expected 0x803, found 0x" +
                                 [&] { char b[16]; std::snprintf(b, sizeof(b), "%x", magic); return std::string(b); }());
    out.count = detail::read_be_u32(in, path);
    out.rows = detail::read_be_u32(in, path);
    out.cols = detail::read_be_u32(in, path);
    out.pixels.resize(out.count * out.rows * out.cols);
    if (!out.pixels.empty()) {
        in.read(reinterpret_cast<char*>(out.pixels.data()),
                static_cast<std::streamsize>(out.pixels.size()));
        if (static_cast<std::size_t>(in.gcount()) != out.pixels.size())
            throw std::runtime_error("idx: truncated image payload in " + path);
    }
}

inline void load_idx_labels(const std::string& path, ImageSet& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("idx: cannot open " + path);
    const std::uint32_t magic = detail::read_be_u32(in, path);
    if (magic != kIdxLabelMagic)
        throw std::runtime_error("idx: bad label magic in " + path + ": expected 0x801, found 0x" +
                                 [&] { char b[16]; std::snprintf(b, sizeof(b), "%x", magic); return std::string(b); }());
    const std::uint32_t n = detail::read_be_u32(in, path);
    out.labels.resize(n);
    if (n > 0) {
        in.read(reinterpret_cast<char*>(out.labels.data()), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n)
            throw std::runtime_error("idx: truncated label payload in " + path);
    }
}

inline ImageSet load_idx(const std::string& images_path, const std::string& labels_path) {
    ImageSet set;
    load_idx_images(images_path, set);
    load_idx_labels(labels_path, set);
    if (set.labels.size() != set.count)
        throw std::runtime_error("idx: image count " + std::to_string(set.count) +
                                 " does not match label count " + std::to_string(set.labels.size()));
    return set;
}

}  // namespace batle
