#include <doctest.h>

#include <cmath>

#include "dndx/nn.hpp"
#include "dndx/solver.hpp"
#include "oracles.hpp"
#include "suites.hpp"

using namespace dndx;

namespace {

void check_close(const Tensor& a, const Tensor& b, double tol = 1e-5) {
  REQUIRE(a.dims() == b.dims());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(tol));
}

}  // namespace

TEST_CASE("forward kernels match the reference loops") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 1 + 2 * static_cast<int>(rng.uniform_index(3));
    const int stride = 1 + static_cast<int>(rng.uniform_index(2));
    const int pad = static_cast<int>(rng.uniform_index((k - 1) / 2 + 1));
    const Tensor x = oracle::dyadic({2, 3, 9, 7}, rng);
    const Tensor w = oracle::dyadic({4, 3, k, k}, rng);
    const Tensor b = oracle::dyadic({4, 1, 1, 1}, rng);
    check_close(nn::conv2d_forward(x, w, b, {k, stride, pad}), oracle::conv2d(x, w, b, stride, pad));
    check_close(nn::maxpool_forward(x, {2, 2}).y, oracle::maxpool(x, 2, 2));
    check_close(nn::avgpool_forward(x, {3, 2}), oracle::avgpool(x, 3, 2));

    const Tensor fw = oracle::dyadic({5, 3 * 9 * 7, 1, 1}, rng);
    const Tensor fb = oracle::dyadic({5, 1, 1, 1}, rng);
    check_close(nn::fc_forward(x, fw, fb), oracle::fc(x, fw, fb));
  }
}

TEST_CASE("1x1 identity convolution sums channels") {
  Rng rng(2);
  const Tensor x = oracle::dyadic({1, 3, 4, 4}, rng);
  Tensor w({1, 3, 1, 1}, 1.0f);
  Tensor b({1, 1, 1, 1}, 0.5f);
  const Tensor y = nn::conv2d_forward(x, w, b, {1, 1, 0});
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(y.at(0, 0, i, j) == x.at(0, 0, i, j) + x.at(0, 1, i, j) + x.at(0, 2, i, j) + 0.5f);
}

TEST_CASE("zero convolution weights give zero output and correlation gradients") {
  Rng rng(4);
  const Tensor x = oracle::dyadic({1, 1, 5, 5}, rng);
  const Tensor w({1, 1, 3, 3}, 0.0f);
  const Tensor b({1, 1, 1, 1}, 0.0f);
  const Tensor y = nn::conv2d_forward(x, w, b, {3, 1, 0});
  for (float v : y.values()) CHECK(v == 0.0f);
  const Tensor dy = oracle::dyadic(y.dims(), rng);
  const auto grads = nn::conv2d_backward(x, w, dy, {3, 1, 0});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      float expected = 0.0f;
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) expected += x.at(0, 0, p + i, q + j) * dy.at(0, 0, p, q);
      CHECK(grads.dweights.at(0, 0, i, j) == expected);
    }
}

TEST_CASE("pooling examples") {
  const Tensor x({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  const auto mp = nn::maxpool_forward(x, {2, 2});
  CHECK(mp.y[0] == 4.0f);
  const Tensor dx = nn::maxpool_backward(Tensor({1, 1, 1, 1}, 1.0f), mp.argmax, x.dims());
  CHECK(dx.values()[3] == 1.0f);
  CHECK(dx.values()[0] + dx.values()[1] + dx.values()[2] == 0.0f);

  const Tensor da = nn::avgpool_backward(Tensor({1, 1, 1, 1}, 1.0f), x.dims(), {2, 2});
  for (float v : da.values()) CHECK(v == 0.25f);
}

TEST_CASE("ReLU and softmax cross-entropy") {
  const Tensor x({1, 4, 1, 1}, std::vector<float>{-1, 0, 2, -3});
  const Tensor dy({1, 4, 1, 1}, std::vector<float>{5, 5, 5, 5});
  const Tensor dx = nn::relu_backward(x, dy);
  CHECK(dx.values()[0] == 0.0f);
  CHECK(dx.values()[2] == 5.0f);
  CHECK(dx.values()[3] == 0.0f);

  for (int k : {2, 3, 10}) {
    const Tensor logits({2, k, 1, 1}, 0.7f);
    const std::vector<int> labels{0, k - 1};
    const auto out = nn::softmax_cross_entropy(logits, labels);
    CHECK(out.loss == doctest::Approx(std::log(k)).epsilon(1e-12));
  }
  Rng rng(8);
  const Tensor logits = oracle::dyadic({4, 3, 1, 1}, rng);
  const std::vector<int> labels{0, 2, 1, 1};
  CHECK(nn::softmax_cross_entropy(logits, labels).loss == doctest::Approx(oracle::softmax_xent(logits, labels)));
}

TEST_CASE("gradients agree with finite differences") {
  for (auto kind : suites::kAllGradKinds) {
    CAPTURE(suites::name(kind));
    const auto report = suites::gradient_suite(kind, 25, 5);
    CHECK(report.passed == report.trials);
    CHECK(report.worst < 1e-4);
  }
}

TEST_CASE("inverse learning-rate policy") {
  SolverConfig cfg;
  CHECK(inv_lr(0, cfg) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(inv_lr(10000, cfg) == doctest::Approx(0.0059460355750136).epsilon(1e-12));
  double prev = inv_lr(0, cfg);
  for (std::uint64_t it = 1000; it <= 1000000; it += 1000) {
    const double lr = inv_lr(it, cfg);
    CHECK(lr < prev);
    prev = lr;
  }
}

TEST_CASE("SGD with momentum") {
  SolverConfig cfg;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.0;
  LayerState s(Tensor({1, 1, 1, 1}, 2.0f), Tensor({1, 1, 1, 1}, 1.0f));
  sgd_step(s, Tensor({1, 1, 1, 1}, 0.5f), Tensor({1, 1, 1, 1}, 0.25f), 1.0, cfg);
  CHECK(s.weights[0] == 1.5f);
  CHECK(s.bias[0] == 0.75f);

  // Scalar recurrence: v1 = -lr (g + d w0); w1 = w0 + v1; v2 = m v1 - lr (g + d w1); w2 = w1 + v2
  cfg.momentum = 0.9;
  cfg.weight_decay = 0.0005;
  const double lr = 0.01;
  const double g = 0.3;
  double w = 1.0, v = 0.0;
  LayerState t(Tensor({1, 1, 1, 1}, 1.0f), Tensor({1, 1, 1, 1}, 0.0f));
  for (int step = 0; step < 2; ++step) {
    v = 0.9 * v - lr * (g + 0.0005 * w);
    w += v;
    sgd_step(t, Tensor({1, 1, 1, 1}, static_cast<float>(g)), Tensor({1, 1, 1, 1}, 0.0f), lr, cfg);
  }
  CHECK(t.weights[0] == doctest::Approx(w).epsilon(1e-6));

  // Zero gradient and decay: the weight moves by momentum * v only.
  cfg.weight_decay = 0.0;
  const float before = t.weights[0];
  const float velocity = t.weight_velocity[0];
  sgd_step(t, Tensor({1, 1, 1, 1}, 0.0f), Tensor({1, 1, 1, 1}, 0.0f), lr, cfg);
  CHECK(t.weights[0] == doctest::Approx(before + 0.9f * velocity).epsilon(1e-6));
}

TEST_CASE("weight initialisation") {
  Rng a(5), b(5);
  const Tensor g1 = init_weights(init::Gaussian{0.01}, {1000, 1000, 1, 1}, 1000, 1000, a);
  const Tensor g2 = init_weights(init::Gaussian{0.01}, {1000, 1000, 1, 1}, 1000, 1000, b);
  CHECK(g1 == g2);
  double mean = 0.0;
  for (float v : g1.values()) mean += v;
  mean /= static_cast<double>(g1.size());
  CHECK(std::fabs(mean) < 3.0 * 0.01 / std::sqrt(1e6));

  const Tensor u = init_weights(init::UniformFanIn{}, {64, 27, 1, 1}, 27, 64, a);
  const double bound = std::sqrt(3.0 / 27.0);
  for (float v : u.values()) CHECK(std::fabs(v) <= bound);
}
