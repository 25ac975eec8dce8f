#include <cmath>
#include <random>

#include "doctest.h"
#include "ercmc/optimizer.hpp"

using namespace ercmc;

namespace {

// Reference AdamW on plain vectors.
struct ReferenceAdamW {
  double lr, b1, b2, eps, wd;
  std::vector<double> m, v;
  int t = 0;

  void step(std::vector<double>& w, const std::vector<double>& g) {
    if (m.empty()) {
      m.assign(w.size(), 0.0);
      v.assign(w.size(), 0.0);
    }
    ++t;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, t));
      const double vh = v[i] / (1 - std::pow(b2, t));
      w[i] -= lr * wd * w[i];
      w[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
};

}  // namespace

TEST_SUITE("optimizer") {
  TEST_CASE("AdamW matches a reference over several steps") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> w0(6);
    for (double& x : w0) x = u(rng);
    auto param = Tensor<double>::from({2, 3}, w0, true);
    AdamWOptions opts;
    opts.lr = 0.01;
    AdamW<double> adam({{"w", param}}, opts);
    ReferenceAdamW ref{0.01, 0.9, 0.999, 1e-8, 0.01, {}, {}};
    std::vector<double> w = w0;
    for (int step = 0; step < 5; ++step) {
      std::vector<double> g(6);
      for (double& x : g) x = u(rng);
      auto grad = param.mutable_grad();
      std::copy(g.begin(), g.end(), grad.begin());
      adam.step();
      ref.step(w, g);
    }
    for (std::size_t i = 0; i < 6; ++i) CHECK(param.data()[i] == doctest::Approx(w[i]).epsilon(1e-14));
    CHECK(adam.step_count() == 5);
    for (double g : param.grad()) CHECK(g == 0.0);
  }

  TEST_CASE("first step moves each weight by about lr against the gradient sign") {
    auto param = Tensor<double>::from({1, 2}, {1.0, -1.0}, true);
    AdamWOptions opts;
    opts.lr = 0.1;
    opts.weight_decay = 0.0;
    AdamW<double> adam({{"w", param}}, opts);
    param.mutable_grad()[0] = 3.0;
    param.mutable_grad()[1] = -0.001;
    adam.step();
    CHECK(param.data()[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(param.data()[1] == doctest::Approx(-0.9).epsilon(1e-4));
  }

  TEST_CASE("decay is decoupled from the gradient") {
    auto param = Tensor<double>::from({1, 1}, {2.0}, true);
    AdamWOptions opts;
    opts.lr = 0.1;
    opts.weight_decay = 0.5;
    AdamW<double> adam({{"w", param}}, opts);
    param.zero_grad();
    adam.step();
    // zero gradient: only the multiplicative decay applies
    CHECK(param.data()[0] == doctest::Approx(2.0 * (1 - 0.05)));
  }

  TEST_CASE("clip_norm rescales the global gradient") {
    auto a = Tensor<double>::from({1, 1}, {0.0}, true);
    auto b = Tensor<double>::from({1, 1}, {0.0}, true);
    ParameterList<double> params{{"a", a}, {"b", b}};
    a.mutable_grad()[0] = 3.0;
    b.mutable_grad()[0] = 4.0;
    CHECK(global_grad_norm(params) == doctest::Approx(5.0));
    AdamWOptions opts;
    opts.clip_norm = 1.0;
    opts.weight_decay = 0.0;
    AdamW<double> adam(params, opts);
    adam.step();
    CHECK(adam.first_moments()[0][0] == doctest::Approx(0.1 * 0.6));
    CHECK(adam.first_moments()[1][0] == doctest::Approx(0.1 * 0.8));
  }

  TEST_CASE("missing gradient is a contract error") {
    auto a = Tensor<double>::from({1, 1}, {0.0}, true);
    AdamW<double> adam({{"a", a}}, {});
    CHECK_THROWS_AS(adam.step(), ContractError);
  }
}
