#pragma once

// Checkpoint file layout (all integers little-endian):
//
//   "NGC1"                       4-byte magic
//   u32 header_length
//   header                       UTF-8 JSON: format_version, architecture,
//                                class_count, input_shape, layers[], meta{}
//   f32 payload                  every persisted array, layer declaration
//                                order (weight, bias, gamma, beta,
//                                running_mean, running_var), row-major
//
// Normalized checkpoints add "normalized": <norm name> and "rho": [...] to
// the header.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "normlab/digest.hpp"
#include "normlab/nn/network.hpp"
#include "normlab/normalize.hpp"

namespace normlab::protocols {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

inline constexpr char kCheckpointMagic[4] = {'N', 'G', 'C', '1'};
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    nn::Network<float> network;
    nlohmann::json meta = nlohmann::json::object();
    std::optional<std::string> normalized;   // norm name
    std::vector<double> rho;
};

namespace detail {

inline nlohmann::json spec_to_json(const nn::LayerSpec& s) {
    nlohmann::json j{{"kind", nn::to_string(s.kind)}};
    if (s.weighted()) {
        j["filters"] = s.filters;
        j["has_bias"] = s.has_bias;
        if (s.kind == nn::LayerKind::conv) {
            j["kernel"] = s.kernel_h;
            j["stride"] = s.stride;
        }
    }
    if (s.kind == nn::LayerKind::batchnorm) {
        j["eps"] = s.bn_eps;
        j["momentum"] = s.bn_momentum;
    }
    return j;
}

inline nn::LayerSpec spec_from_json(const nlohmann::json& j) {
    nn::LayerSpec s;
    s.kind = nn::parse_layer_kind(j.at("kind").get<std::string>());
    if (s.weighted()) {
        s.filters = j.at("filters").get<std::size_t>();
        s.has_bias = j.at("has_bias").get<bool>();
        if (s.kind == nn::LayerKind::conv) {
            s.kernel_h = s.kernel_w = j.at("kernel").get<std::size_t>();
            s.stride = j.at("stride").get<std::size_t>();
        }
    }
    if (s.kind == nn::LayerKind::batchnorm) {
        s.bn_eps = j.at("eps").get<double>();
        s.bn_momentum = j.value("momentum", 0.1);
    }
    return s;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
    nlohmann::json header;
    header["format_version"] = kCheckpointVersion;
    header["architecture"] = ck.network.name();
    header["class_count"] = ck.network.class_count();
    header["input_shape"] = ck.network.input_shape();
    header["layers"] = nlohmann::json::array();
    for (const auto& s : ck.network.specs()) header["layers"].push_back(detail::spec_to_json(s));
    header["meta"] = ck.meta;
    if (ck.normalized) {
        header["normalized"] = *ck.normalized;
        header["rho"] = ck.rho;
    }
    const std::string text = header.dump();

    std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 4);
    const auto len = static_cast<std::uint32_t>(text.size());
    for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(len >> (8 * i)));
    out.insert(out.end(), text.begin(), text.end());
    for (const auto* t : ck.network.persisted()) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(t->data());
        out.insert(out.end(), p, p + t->size() * sizeof(float));
    }
    return out;
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& what = "checkpoint") {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
        throw FormatError(what + ": bad magic (expected NGC1)");
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= std::uint32_t(bytes[4 + i]) << (8 * i);
    if (bytes.size() < 8 + std::size_t(len)) throw FormatError(what + ": truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + len);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(what + ": unreadable header: " + e.what());
    }
    const int version = header.value("format_version", -1);
    if (version != kCheckpointVersion)
        throw FormatError(what + ": unsupported checkpoint format_version " + std::to_string(version) +
                          " (this build reads version " + std::to_string(kCheckpointVersion) + ")");
    Checkpoint ck;
    try {
        ck.network = nn::Network<float>(header.at("architecture").get<std::string>(),
                                        header.at("input_shape").get<Shape>(),
                                        header.at("class_count").get<std::size_t>());
        for (const auto& l : header.at("layers")) ck.network.add(detail::spec_from_json(l));
        ck.network.validate();
        ck.meta = header.value("meta", nlohmann::json::object());
        if (header.contains("normalized")) {
            ck.normalized = header["normalized"].get<std::string>();
            ck.rho = header.at("rho").get<std::vector<double>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(what + ": malformed header: " + e.what());
    }
    std::size_t off = 8 + len;
    for (auto* t : ck.network.persisted()) {
        const std::size_t n = t->size() * sizeof(float);
        if (off + n > bytes.size()) throw FormatError(what + ": truncated parameter payload");
        std::memcpy(t->data(), bytes.data() + off, n);
        off += n;
    }
    if (off != bytes.size()) throw FormatError(what + ": trailing bytes after parameter payload");
    return ck;
}

inline std::string save_checkpoint(const Checkpoint& ck, const std::string& path) {
    const auto bytes = encode_checkpoint(ck);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot write '" + path + "'");
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw FormatError("write failed for '" + path + "'");
    return digest_hex(bytes);
}

inline std::string save_checkpoint(const nn::Network<float>& net, const nlohmann::json& meta, const std::string& path) {
    Checkpoint ck;
    ck.network = net;
    ck.meta = meta;
    return save_checkpoint(ck, path);
}

inline std::vector<std::uint8_t> read_binary(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline Checkpoint load_checkpoint(const std::string& path) {
    return decode_checkpoint(read_binary(path), "'" + path + "'");
}

inline std::string file_digest(const std::string& path) {
    return digest_hex(read_binary(path));
}

inline Checkpoint normalized_checkpoint(const NormalizedNetwork<float>& nz, nlohmann::json meta) {
    Checkpoint ck;
    ck.network = nz.network;
    ck.meta = std::move(meta);
    ck.meta["product_norm"] = nz.product_norm;
    if (!nz.source_digest.empty()) ck.meta["source_digest"] = nz.source_digest;
    ck.normalized = nz.kind.name();
    ck.rho = nz.rho;
    return ck;
}

}  // namespace normlab::protocols
