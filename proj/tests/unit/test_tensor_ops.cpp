#include <cmath>
#include <random>

#include "doctest.h"
#include "ercmc/gradcheck.hpp"
#include "ercmc/ops.hpp"

using namespace ercmc;
using D = Tensor<double>;

namespace {

D random_matrix(std::size_t r, std::size_t c, Rng& rng, bool grad = true) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(r * c);
  for (double& x : v) x = u(rng);
  return D::from({r, c}, v, grad);
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("factories validate sizes") {
    CHECK_THROWS_AS(D::from({2, 3}, {1.0, 2.0}), DimensionError);
    auto z = D::zeros({2, 3});
    CHECK(z.rows() == 2);
    CHECK(z.cols() == 3);
    CHECK(shape_string(z.shape()) == "[2x3]");
  }

  TEST_CASE("copies alias, clone does not") {
    auto a = D::from({1, 2}, {1.0, 2.0});
    auto b = a;
    auto c = a.clone();
    a.mutable_data()[0] = 5.0;
    CHECK(b.data()[0] == 5.0);
    CHECK(c.data()[0] == 1.0);
    CHECK(a.id() == b.id());
    CHECK(a.id() != c.id());
  }

  TEST_CASE("backward needs a scalar") {
    Tape<double> tape;
    auto a = D::zeros({2, 2}, true);
    auto out = ops::add(tape, a, a);
    CHECK_THROWS_AS(tape.backward(out), ContractError);
  }

  TEST_CASE("tape replays once and clears") {
    Tape<double> tape;
    auto a = D::from({1, 2}, {1.0, 2.0}, true);
    auto loss = ops::sum(tape, ops::mul(tape, a, a));
    CHECK(tape.size() == 2);
    tape.backward(loss);
    CHECK(tape.size() == 0);
    CHECK(a.grad()[0] == doctest::Approx(2.0));
    CHECK(a.grad()[1] == doctest::Approx(4.0));
  }

  TEST_CASE("disabled tape records nothing") {
    Tape<double> tape;
    tape.set_enabled(false);
    auto a = D::from({1, 2}, {1.0, 2.0}, true);
    auto out = ops::sum(tape, a);
    CHECK(tape.size() == 0);
    CHECK_FALSE(out.requires_grad());
  }

  TEST_CASE("gradients accumulate across backward passes") {
    auto a = D::from({1, 1}, {3.0}, true);
    for (int i = 0; i < 2; ++i) {
      Tape<double> tape;
      auto loss = ops::sum(tape, ops::mul(tape, a, a));
      tape.backward(loss);
    }
    CHECK(a.grad()[0] == doctest::Approx(12.0));
  }
}

TEST_SUITE("ops") {
  TEST_CASE("relu keeps NaN") {
    Tape<double> tape;
    auto a = D::from({1, 3}, {-1.0, std::nan(""), 2.0});
    auto r = ops::relu(tape, a);
    CHECK(r.data()[0] == 0.0);
    CHECK(std::isnan(r.data()[1]));
    CHECK(r.data()[2] == 2.0);
  }

  TEST_CASE("matmul values and shape errors") {
    Tape<double> tape;
    auto a = D::from({2, 2}, {1, 2, 3, 4});
    auto b = D::from({2, 1}, {5, 6});
    auto c = ops::matmul(tape, a, b);
    CHECK(c.at(0, 0) == 17.0);
    CHECK(c.at(1, 0) == 39.0);
    CHECK_THROWS_AS(ops::matmul(tape, b, b), DimensionError);
    CHECK_THROWS_AS(ops::add(tape, a, b), DimensionError);
  }

  TEST_CASE("softmax rows sum to one and masked entries are zero") {
    Tape<double> tape;
    auto a = D::from({2, 3}, {1000.0, 1001.0, 999.0, -3.0, 0.5, 2.0});
    auto p = ops::softmax_lastdim(tape, a);
    for (std::size_t r = 0; r < 2; ++r) {
      CHECK(p.at(r, 0) + p.at(r, 1) + p.at(r, 2) == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK(std::isfinite(p.at(0, 1)));
    const std::uint8_t mask[] = {1, 0, 1, 0, 0, 1};
    auto q = ops::softmax_lastdim(tape, a, std::span<const std::uint8_t>(mask));
    CHECK(q.at(0, 1) == 0.0);
    CHECK(q.at(1, 2) == 1.0);
    const std::uint8_t none[] = {1, 1, 1, 0, 0, 0};
    CHECK_THROWS_AS(ops::softmax_lastdim(tape, a, std::span<const std::uint8_t>(none)),
                    DegenerateRowError);
  }

  TEST_CASE("log_softmax matches log of softmax") {
    Tape<double> tape;
    Rng rng(3);
    auto a = random_matrix(3, 4, rng, false);
    auto p = ops::softmax_lastdim(tape, a);
    auto lp = ops::log_softmax_lastdim(tape, a);
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(lp.data()[i] == doctest::Approx(std::log(p.data()[i])).epsilon(1e-13));
    }
  }

  TEST_CASE("gather and scatter are adjoint") {
    Tape<double> tape;
    Rng rng(5);
    ColumnIndex idx{2, 3, {0, 2, 2, 1, 1, 0}};
    auto a = random_matrix(2, 3, rng, false);
    auto b = random_matrix(2, 3, rng, false);
    // <gather(a), b> == <a, scatter(b)>
    auto g = ops::gather_cols(tape, a, idx);
    auto s = ops::scatter_cols(tape, b, idx, 3);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
      lhs += g.data()[i] * b.data()[i];
      rhs += a.data()[i] * s.data()[i];
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-14));
    ColumnIndex bad{2, 3, {0, 5, 0, 0, 0, 0}};
    CHECK_THROWS_AS(ops::gather_cols(tape, a, bad), IndexError);
  }

  TEST_CASE("dropout contract") {
    Tape<double> tape;
    Rng rng(1);
    auto a = D::from({1, 4}, {1, 2, 3, 4});
    CHECK_THROWS_AS(ops::dropout(tape, a, 1.0, true, rng), ParameterError);
    CHECK_THROWS_AS(ops::dropout(tape, a, -0.1, true, rng), ParameterError);
    CHECK(ops::dropout(tape, a, 0.5, false, rng).id() == a.id());
    auto big = D::zeros({100, 100});
    for (double& x : big.mutable_data()) x = 1.0;
    auto out = ops::dropout(tape, big, 0.25, true, rng);
    std::size_t zeros = 0;
    for (double v : out.data()) {
      if (v == 0.0) {
        ++zeros;
      } else {
        CHECK(v == doctest::Approx(1.0 / 0.75));
      }
    }
    CHECK(zeros > 2200);
    CHECK(zeros < 2800);
  }

  TEST_CASE("nll_loss is the mean negative log-probability") {
    Tape<double> tape;
    auto lp = D::from({2, 2}, {std::log(0.25), std::log(0.75), std::log(0.5), std::log(0.5)});
    const std::size_t targets[] = {1, 0};
    auto loss = ops::nll_loss(tape, lp, std::span<const std::size_t>(targets));
    CHECK(loss.item() == doctest::Approx(-(std::log(0.75) + std::log(0.5)) / 2.0));
    const std::size_t bad[] = {2, 0};
    CHECK_THROWS_AS(ops::nll_loss(tape, lp, std::span<const std::size_t>(bad)), IndexError);
  }
}

TEST_SUITE("gradcheck") {
  TEST_CASE("checker agrees with a closed-form gradient") {
    Rng rng(9);
    auto a = random_matrix(2, 3, rng);
    ParameterList<double> params{{"a", a}};
    // loss = Σ a ⊙ (2a + 1), d/da = 4a + 1; central differences are exact on
    // a quadratic, so only rounding remains.
    auto loss = [&](Tape<double>& t) { return ops::sum(t, ops::mul(t, a, ops::affine(t, a, 2.0, 1.0))); };
    auto result = check_gradients(params, loss);
    CHECK(result.max_rel_error < 1e-9);
    Tape<double> tape;
    auto value = loss(tape);
    tape.backward(value);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.grad()[i] == doctest::Approx(4.0 * a.data()[i] + 1.0));
    }
  }

  TEST_CASE("checker detects a wrong gradient") {
    auto a = D::from({1, 2}, {0.3, -0.7}, true);
    ParameterList<double> params{{"a", a}};
    // A loss whose recorded backward is deliberately off by a factor of two.
    auto result = check_gradients(params, [&](Tape<double>& t) {
      auto out = ops::sum(t, ops::mul(t, a, a));
      if (t.enabled()) {
        auto doubled = ops::affine(t, out, 2.0, 0.0);
        return ops::affine(t, doubled, 1.0, -out.item());
      }
      return out;
    });
    CHECK(result.max_rel_error > 0.4);
  }

  TEST_CASE("stencils across a relu kink are re-checked with a smaller step") {
    // relu(a - 0.0004) with a = 0: the default step straddles the kink.
    auto a = D::from({1, 1}, {0.0}, true);
    ParameterList<double> params{{"a", a}};
    auto result = check_gradients(params, [&](Tape<double>& t) {
      return ops::sum(t, ops::relu(t, ops::affine(t, a, 1.0, -0.0004)));
    });
    CHECK(result.kink_rechecks == 1);
    CHECK(result.unresolved_kinks == 0);
    CHECK(result.max_rel_error < 1e-12);
  }

  TEST_CASE("every primitive and block passes at step 1e-3") {
    for (const auto& entry : run_gradient_suite(20240607)) {
      INFO(entry.name << " worst " << entry.result.worst_parameter);
      CHECK(entry.result.max_rel_error < 1e-4);
      CHECK(entry.result.unresolved_kinks == 0);
    }
  }
}
