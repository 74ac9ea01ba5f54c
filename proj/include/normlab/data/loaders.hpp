#pragma once

// MNIST IDX and CIFAR-10/100 binary readers. Files may be gzip-compressed;
// zlib reads uncompressed files transparently.

#include <cstdint>
#include <string>
#include <vector>

#include <zlib.h>

#include "normlab/data/dataset.hpp"
#include "normlab/digest.hpp"

namespace normlab::data {

/// Whole (decompressed) file contents.
inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw FormatError("cannot open '" + path + "'");
    std::vector<std::uint8_t> out;
    std::uint8_t buf[1 << 16];
    int n;
    while ((n = gzread(f, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + n);
    const bool failed = n < 0;
    gzclose(f);
    if (failed) throw FormatError("read error in '" + path + "'");
    return out;
}

namespace detail {

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off) {
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) | (std::uint32_t(b[off + 2]) << 8) |
           std::uint32_t(b[off + 3]);
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Loads an IDX image/label pair. Pixels are mapped to [0,1].
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                        std::size_t class_count = 10) {
    const auto img = read_file_bytes(images_path);
    const auto lab = read_file_bytes(labels_path);
    if (img.size() < 16) throw FormatError("'" + images_path + "': truncated IDX header");
    if (lab.size() < 8) throw FormatError("'" + labels_path + "': truncated IDX header");
    if (detail::read_be32(img, 0) != kIdxImageMagic)
        throw FormatError("'" + images_path + "': bad IDX image magic (expected 0x00000803)");
    if (detail::read_be32(lab, 0) != kIdxLabelMagic)
        throw FormatError("'" + labels_path + "': bad IDX label magic (expected 0x00000801)");
    const std::size_t n = detail::read_be32(img, 4), rows = detail::read_be32(img, 8), cols = detail::read_be32(img, 12);
    const std::size_t n_labels = detail::read_be32(lab, 4);
    if (n != n_labels)
        throw FormatError("'" + images_path + "' has " + std::to_string(n) + " images but '" + labels_path + "' has " +
                          std::to_string(n_labels) + " labels");
    if (n == 0 || rows == 0 || cols == 0) throw FormatError("'" + images_path + "': empty IDX tensor");
    if (img.size() != 16 + n * rows * cols)
        throw FormatError("'" + images_path + "': expected " + std::to_string(16 + n * rows * cols) + " bytes, found " +
                          std::to_string(img.size()));
    if (lab.size() != 8 + n) throw FormatError("'" + labels_path + "': truncated or oversized label payload");

    Dataset ds;
    ds.class_count = class_count;
    ds.images = Tensor<float>({n, 1, rows, cols});
    for (std::size_t i = 0; i < n * rows * cols; ++i) ds.images[i] = float(img[16 + i]) / 255.0f;
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Label y = lab[8 + i];
        if (std::size_t(y) >= class_count)
            throw FormatError("'" + labels_path + "': label " + std::to_string(y) + " at index " + std::to_string(i) +
                              " out of range for " + std::to_string(class_count) + " classes");
        ds.labels[i] = y;
    }
    Fnv1a64 h;
    h.update(img);
    h.update(lab);
    ds.provenance.source = images_path + ";" + labels_path;
    ds.provenance.source_digest = h.hex();
    return ds;
}

enum class CifarVariant { cifar10, cifar100 };

/// Concatenates CIFAR binary batch files. Records are 1 label byte (10) or
/// coarse+fine label bytes (100; fine is used) followed by 3x32x32 channel-major pixels.
inline Dataset load_cifar_binary(const std::vector<std::string>& paths, CifarVariant variant) {
    if (paths.empty()) throw ConfigError("no CIFAR files given");
    const std::size_t label_bytes = variant == CifarVariant::cifar10 ? 1 : 2;
    const std::size_t pixels = 3 * 32 * 32, record = label_bytes + pixels;
    std::vector<float> images;
    std::vector<Label> labels;
    Fnv1a64 h;
    std::string source;
    for (const auto& path : paths) {
        const auto bytes = read_file_bytes(path);
        if (bytes.empty() || bytes.size() % record != 0)
            throw FormatError("'" + path + "': length " + std::to_string(bytes.size()) +
                              " is not a multiple of the " + std::to_string(record) + "-byte record");
        h.update(bytes);
        source += (source.empty() ? "" : ";") + path;
        for (std::size_t off = 0; off < bytes.size(); off += record) {
            const Label y = bytes[off + label_bytes - 1];
            const std::size_t classes = variant == CifarVariant::cifar10 ? 10 : 100;
            if (std::size_t(y) >= classes)
                throw FormatError("'" + path + "': label " + std::to_string(y) + " out of range");
            labels.push_back(y);
            for (std::size_t i = 0; i < pixels; ++i) images.push_back(float(bytes[off + label_bytes + i]) / 255.0f);
        }
    }
    Dataset ds;
    ds.class_count = variant == CifarVariant::cifar10 ? 10 : 100;
    const std::size_t n = labels.size();
    ds.images = Tensor<float>({n, 3, 32, 32}, std::move(images));
    ds.labels = std::move(labels);
    ds.provenance.source = source;
    ds.provenance.source_digest = h.hex();
    return ds;
}

}  // namespace normlab::data
