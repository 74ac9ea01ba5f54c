#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "normlab/nn/architectures.hpp"
#include "normlab/nn/init.hpp"
#include "normlab/nn/optimizer.hpp"

using namespace normlab;
using namespace normlab::nn;

TEST(Sgd, MomentumRecurrenceByHand) {
    Network<double> net("d", {2}, 1);
    net.add_dense(1, false);
    net.layers()[0].weight[0] = 1.0;
    net.layers()[0].weight[1] = -1.0;
    OptimizerState opt;
    opt.learning_rate = 0.1;
    opt.momentum = 0.5;
    Gradients<double> g;
    g.arrays.emplace_back(Shape{1, 2}, std::vector<double>{2.0, 0.0});
    sgd_step(net, g, opt);   // v = 2, w = 1 - 0.2
    EXPECT_NEAR(net.layers()[0].weight[0], 0.8, 1e-15);
    sgd_step(net, g, opt);   // v = 0.5*2 + 2 = 3, w = 0.8 - 0.3
    EXPECT_NEAR(net.layers()[0].weight[0], 0.5, 1e-15);
    EXPECT_DOUBLE_EQ(net.layers()[0].weight[1], -1.0);
}

TEST(Sgd, ZeroMomentumIsPlainGradientDescent) {
    Network<double> net("d", {3}, 2);
    net.add_dense(2, true);
    std::mt19937_64 rng(1);
    testing_util::randomize(net, rng);
    const auto before = net;
    OptimizerState opt;
    opt.momentum = 0;
    opt.learning_rate = 0.05;
    Gradients<double> g;
    for (const auto* t : net.trainable()) g.arrays.push_back(testing_util::random_tensor<double>(t->shape(), rng));
    sgd_step(net, g, opt);
    const auto after = net.trainable();
    const auto orig = before.trainable();
    for (std::size_t a = 0; a < after.size(); ++a)
        for (std::size_t i = 0; i < after[a]->size(); ++i)
            EXPECT_NEAR((*after[a])[i], (*orig[a])[i] - 0.05 * g.arrays[a][i], 1e-15);
}

TEST(Sgd, RejectsMismatchedGradients) {
    Network<double> net("d", {3}, 2);
    net.add_dense(2, true);
    OptimizerState opt;
    Gradients<double> g;
    g.arrays.emplace_back(Shape{2, 3});
    EXPECT_THROW(sgd_step(net, g, opt), ShapeError);
}

TEST(OptimizerState, Validation) {
    OptimizerState opt;
    opt.momentum = 1.0;
    EXPECT_THROW(opt.validate(), ConfigError);
    opt.momentum = 0.9;
    opt.batch_size = 0;
    EXPECT_THROW(opt.validate(), ConfigError);
}

TEST(Init, GaussianMomentsAndDeterminism) {
    auto a = build_architecture<float>("mnist3x34", 10);
    auto b = build_architecture<float>("mnist3x34", 10);
    init_gaussian(a, 0.05, 7);
    init_gaussian(b, 0.05, 7);
    EXPECT_TRUE(a.layers()[4].weight == b.layers()[4].weight);
    const auto& w = a.layers()[4].weight;
    double m = 0, v = 0;
    for (float x : w.values()) m += x;
    m /= double(w.size());
    for (float x : w.values()) v += (x - m) * (x - m);
    v /= double(w.size());
    EXPECT_NEAR(m, 0.0, 0.001);
    EXPECT_NEAR(std::sqrt(v), 0.05, 0.0005);
    for (float x : a.layers()[0].bias.values()) EXPECT_EQ(x, 0.0f);
}

TEST(Init, FanInBounds) {
    auto net = build_architecture<double>("cifar3x24", 10);
    init_fan_in(net, 3);
    for (const auto& l : net.layers()) {
        if (!l.spec.weighted()) continue;
        const double bound = 1.0 / std::sqrt(double(l.spec.fan_in));
        for (double x : l.weight.values()) EXPECT_LE(std::abs(x), bound);
    }
    EXPECT_THROW(init_gaussian(net, -1.0, 1), ConfigError);
}
