#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "normlab/data/dataset.hpp"
#include "normlab/nn/network.hpp"
#include "normlab/tensor.hpp"

namespace testing_util {

using normlab::Shape;
using normlab::Tensor;

template <typename S>
Tensor<S> random_tensor(const Shape& shape, std::mt19937_64& rng, double scale = 1.0) {
    Tensor<S> t(shape);
    std::normal_distribution<double> g(0.0, scale);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = S(g(rng));
    return t;
}

template <typename S>
void randomize(normlab::nn::Network<S>& net, std::mt19937_64& rng, double scale = 0.3) {
    std::normal_distribution<double> g(0.0, scale);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    for (auto& l : net.layers()) {
        for (auto* t : {&l.weight, &l.bias, &l.beta, &l.running_mean})
            for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] = S(g(rng));
        for (auto* t : {&l.gamma, &l.running_var})
            for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] = S(u(rng));
    }
}

inline std::vector<normlab::nn::Label> random_labels(std::size_t n, std::size_t k, std::mt19937_64& rng) {
    std::vector<normlab::nn::Label> y(n);
    std::uniform_int_distribution<int> d(0, int(k) - 1);
    for (auto& v : y) v = d(rng);
    return y;
}

/// Unique scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static std::uint64_t counter = 0;
        std::random_device rd;
        path = std::filesystem::temp_directory_path() /
               ("normlab_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

inline void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(std::uint8_t(v >> s));
}

/// IDX image and label files for n images of rows x cols.
inline void write_idx(const std::string& images, const std::string& labels, std::size_t n, std::size_t rows,
                      std::size_t cols, const std::vector<std::uint8_t>& pixels, const std::vector<std::uint8_t>& ys) {
    std::vector<std::uint8_t> a;
    put_be32(a, 0x803);
    put_be32(a, std::uint32_t(n));
    put_be32(a, std::uint32_t(rows));
    put_be32(a, std::uint32_t(cols));
    a.insert(a.end(), pixels.begin(), pixels.end());
    write_bytes(images, a);
    std::vector<std::uint8_t> b;
    put_be32(b, 0x801);
    put_be32(b, std::uint32_t(n));
    b.insert(b.end(), ys.begin(), ys.end());
    write_bytes(labels, b);
}

/// Synthetic dataset of n 1x28x28 images with labels in [0, k).
inline normlab::data::Dataset synthetic_mnist(std::size_t n, std::size_t k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    normlab::data::Dataset ds;
    ds.images = random_tensor<float>({n, 1, 28, 28}, rng);
    ds.labels = random_labels(n, k, rng);
    ds.class_count = k;
    ds.provenance.source = "synthetic";
    return ds;
}

}  // namespace testing_util
