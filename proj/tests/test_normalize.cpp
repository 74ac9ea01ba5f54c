#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "normlab/nn/architectures.hpp"
#include "normlab/nn/init.hpp"
#include "normlab/normalize.hpp"

using namespace normlab;
using namespace normlab::nn;
using testing_util::random_tensor;

namespace {

Network<double> small_net(std::mt19937_64& rng) {
    Network<double> net("small", {2, 6, 6}, 3);
    net.add_conv(3, 3, 1, true).add_relu().add_conv(2, 2, 2, true).add_relu().add_dense(3, true);
    testing_util::randomize(net, rng, 0.7);
    return net;
}

double block_norm(const Layer<double>& l, const NormKind& k) {
    return layer_norm<double>(l.weight.values(), l.bias.values(), k);
}

}  // namespace

TEST(LayerNorm, AgainstDirectFormulas) {
    const std::vector<double> w{3, -4, 1}, b{-2};
    EXPECT_NEAR(layer_norm<double>(w, b, NormKind::frobenius()), std::sqrt(30.0), 1e-14);
    EXPECT_NEAR(layer_norm<double>(w, b, NormKind::l1_scaled()), 10.0 / 100.0, 1e-14);
    EXPECT_NEAR(layer_norm<double>(w, b, NormKind::linf()), 4.0, 0);
    EXPECT_NEAR(layer_norm<double>(w, b, NormKind::parse("l3")), std::cbrt(27.0 + 64 + 1 + 8), 1e-12);
}

TEST(NormKind, ParseAndNames) {
    EXPECT_EQ(NormKind::parse("fro"), NormKind::frobenius());
    EXPECT_EQ(NormKind::parse("l1").divisor, 100.0);
    EXPECT_TRUE(std::isinf(NormKind::parse("linf").p));
    for (auto s : {"fro", "l1", "linf"}) EXPECT_EQ(NormKind::parse(s).name(), s);
    EXPECT_THROW(NormKind::parse("nuclear"), ConfigError);
    EXPECT_THROW(NormKind::parse("l0.5"), ConfigError);
}

TEST(Normalize, UnitNetworkHasUnitRho) {
    std::mt19937_64 rng(1);
    auto net = small_net(rng);
    const auto once = normalize_layerwise(net);
    const auto twice = normalize_layerwise(once.network);
    for (double r : twice.rho) EXPECT_NEAR(r, 1.0, 1e-12);
    EXPECT_NEAR(twice.product_norm, 1.0, 1e-12);
    for (std::size_t i = 0; i < net.layers().size(); ++i)
        for (std::size_t j = 0; j < once.network.layers()[i].weight.size(); ++j)
            EXPECT_NEAR(twice.network.layers()[i].weight[j], once.network.layers()[i].weight[j], 1e-14);
}

TEST(Normalize, EveryBlockHasUnitNorm) {
    std::mt19937_64 rng(2);
    for (const auto& kind : {NormKind::frobenius(), NormKind::l1_scaled(), NormKind::linf()}) {
        const auto nz = normalize_layerwise(small_net(rng), kind);
        for (const auto& l : nz.network.layers())
            if (l.spec.weighted()) EXPECT_NEAR(block_norm(l, kind), 1.0, 1e-12) << kind.name();
    }
}

TEST(Normalize, FirstLayerBiasOnlyUsesPlainNorms) {
    std::mt19937_64 rng(3);
    auto net = build_architecture<double>("mnist3x34", 10);
    testing_util::randomize(net, rng, 0.1);
    const auto nz = normalize_layerwise(net);
    std::size_t k = 0;
    double prod = 1;
    for (const auto& l : net.layers()) {
        if (!l.spec.weighted()) continue;
        const double plain = block_norm(l, NormKind::frobenius());
        EXPECT_NEAR(nz.rho[k++], plain, 1e-9 * plain);
        prod *= plain;
    }
    EXPECT_NEAR(nz.product_norm, prod, 1e-9 * prod);
}

TEST(Normalize, LogitsScaleByProductNorm) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const auto net = small_net(rng);
        const auto nz = normalize_layerwise(net);
        const auto x = random_tensor<double>({20, 2, 6, 6}, rng);
        const auto a = forward(nz.network, x, Mode::eval);
        const auto b = forward(net, x, Mode::eval);
        EXPECT_LT(relative_deviation(a, b, nz.product_norm), 1e-12);
        for (std::size_t r = 0; r < 20; ++r) EXPECT_EQ(argmax(a.data() + 3 * r, 3), argmax(b.data() + 3 * r, 3));
    }
}

TEST(Normalize, RandomScalesAreHomogeneous) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.2, 5.0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto net = small_net(rng);
        const std::vector<double> scales{u(rng), u(rng), u(rng)};
        const auto rep = verify_homogeneity(net, scales, random_tensor<double>({10, 2, 6, 6}, rng));
        EXPECT_NEAR(rep.factor, scales[0] * scales[1] * scales[2], 1e-12);
        EXPECT_LT(rep.max_relative_deviation, 1e-12);
        EXPECT_TRUE(rep.argmax_identical);
        // rescaling does not change the normalized network
        const auto n1 = normalize_layerwise(net), n2 = normalize_layerwise(scale_layers(net, scales));
        EXPECT_NEAR(n2.product_norm, n1.product_norm * rep.factor, 1e-9 * n2.product_norm);
        for (std::size_t j = 0; j < n1.network.layers()[4].weight.size(); ++j)
            EXPECT_NEAR(n1.network.layers()[4].weight[j], n2.network.layers()[4].weight[j], 1e-12);
    }
    const auto net = small_net(rng);
    EXPECT_THROW(scale_layers(net, std::vector<double>{1, 1}), ConfigError);
    EXPECT_THROW(scale_layers(net, std::vector<double>{1, -1, 1}), ConfigError);
}

TEST(Normalize, RejectsBatchnormAndZeroLayers) {
    auto bn = build_architecture<double>("conv5", 10);
    EXPECT_THROW(normalize_layerwise(bn), ConfigError);
    Network<double> z("z", {3}, 2);
    z.add_dense(2, false);
    EXPECT_THROW(normalize_layerwise(z), NumericError);
}

TEST(AbsorbBatchnorm, EvalOutputsUnchanged) {
    std::mt19937_64 rng(6);
    auto net = build_architecture<double>("conv5", 10);
    init_gaussian(net, 0.1, 1);
    testing_util::randomize(net, rng, 0.1);
    const auto plain = absorb_batchnorm(net);
    EXPECT_FALSE(plain.has_batchnorm());
    EXPECT_EQ(plain.layers().size(), net.layers().size() - 4);
    const auto x = random_tensor<double>({8, 3, 32, 32}, rng);
    EXPECT_LT(relative_deviation(forward(plain, x, Mode::eval), forward(net, x, Mode::eval)), 1e-12);
    EXPECT_NO_THROW(normalize_layerwise(plain));
    EXPECT_NEAR(product_norm(net), normalize_layerwise(plain).product_norm, 1e-9 * product_norm(net));
}

TEST(AbsorbBatchnorm, RequiresPrecedingWeightedLayer) {
    Network<double> net("bad", {2, 3, 3}, 18);
    net.add_batchnorm();
    EXPECT_THROW(absorb_batchnorm(net), ConfigError);
}
