#include <cmath>

#include "doctest.h"
#include "pyrexpose/autodiff/adam.hpp"
#include "pyrexpose/autodiff/ops.hpp"
#include "pyrexpose/autodiff/parameters.hpp"
#include "pyrexpose/error.hpp"
#include "support/op_cases.hpp"
#include "support/testing.hpp"

using namespace pyrexpose;
using namespace pyrexpose::ad;
using pyrexpose::testing::gradcheck;
using pyrexpose::testing::op_gradient_cases;
using pyrexpose::testing::random_tensor;

namespace {

using TD = Tensor<double>;

constexpr double kTol = 1e-3;
constexpr int kSeeds = 20;

void check(const std::vector<TD>& inputs, const std::function<TD(Graph<double>&)>& f) {
  const auto r = gradcheck(inputs, f);
  INFO(r.worst);
  CHECK(r.max_rel_error <= kTol);
  CHECK(r.checked > 0);
}

}  // namespace

TEST_SUITE("autodiff") {
  TEST_CASE("conv2d hand examples") {
    Graph<double> g(false);
    const TD ones(Shape{1, 1, 3, 3}, 1.0);
    const TD k(Shape{1, 1, 3, 3}, 1.0);
    const TD b(Shape{1, 1, 1, 1}, 0.0);
    const TD y = conv2d(g, ones, k, b, 1, 1);
    CHECK(y.shape() == Shape{1, 1, 3, 3});
    CHECK(y.values()[4] == 9.0);
    CHECK(y.values()[0] == 4.0);

    const TD x = random_tensor({2, 3, 4, 5}, 1);
    TD id(Shape{3, 3, 1, 1}, 0.0);
    for (int c = 0; c < 3; ++c) id.values()[static_cast<std::size_t>(c * 3 + c)] = 1.0;
    const TD same = conv2d(g, x, id, TD(Shape{1, 1, 1, 3}, 0.0));
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(same.values()[i] == x.values()[i]);

    const TD zero_k(Shape{2, 3, 3, 3}, 0.0);
    const TD bias(Shape{1, 1, 1, 2}, std::vector<double>{0.5, -2.0});
    const TD c = conv2d(g, x, zero_k, bias, 2, 1);
    CHECK(c.shape() == Shape{2, 2, 2, 3});
    CHECK(c.values()[0] == 0.5);
    CHECK(c.values()[c.numel() - 1] == -2.0);
  }

  TEST_CASE("conv2d shape errors") {
    Graph<double> g;
    const TD x = random_tensor({1, 3, 4, 4}, 1);
    CHECK_THROWS_AS(conv2d(g, x, random_tensor({2, 2, 3, 3}, 2), random_tensor({1, 1, 1, 2}, 3)), InvalidInput);
    CHECK_THROWS_AS(conv2d(g, x, random_tensor({2, 3, 3, 3}, 2), random_tensor({1, 1, 1, 3}, 3)), InvalidInput);
    CHECK_THROWS_AS(conv2d(g, x, random_tensor({2, 3, 5, 5}, 2), random_tensor({1, 1, 1, 2}, 3)), InvalidInput);
  }

  TEST_CASE("conv_transpose2d hand examples") {
    Graph<double> g(false);
    const TD x(Shape{1, 1, 1, 1}, 0.7);
    const TD w(Shape{1, 1, 2, 2}, 1.0);
    const TD y = conv_transpose2d(g, x, w, TD(Shape{1, 1, 1, 1}, 0.0), 2);
    CHECK(y.shape() == Shape{1, 1, 2, 2});
    for (double v : y.values()) CHECK(v == 0.7);

    const TD big = random_tensor({2, 3, 5, 4}, 4);
    const TD up = conv_transpose2d(g, big, random_tensor({3, 2, 2, 2}, 5), random_tensor({1, 1, 1, 2}, 6), 2);
    CHECK(up.shape() == Shape{2, 2, 10, 8});

    const TD z(Shape{1, 2, 2, 2}, 0.0);
    const TD zb = conv_transpose2d(g, z, random_tensor({2, 1, 2, 2}, 7), TD(Shape{1, 1, 1, 1}, 0.25), 2);
    for (double v : zb.values()) CHECK(v == 0.25);
  }

  TEST_CASE("conv_transpose2d is the adjoint of a strided conv2d") {
    // <conv(x), y> == <x, convT(y)> for the same kernel, no bias.
    Graph<double> g(false);
    const TD w = random_tensor({3, 2, 2, 2}, 8, -1, 1, false);  // conv: Co=3, Ci=2
    const TD x = random_tensor({1, 2, 6, 8}, 9, -1, 1, false);
    const TD y = random_tensor({1, 3, 3, 4}, 10, -1, 1, false);
    const TD cx = conv2d(g, x, w, TD(Shape{1, 1, 1, 3}, 0.0), 2, 0);
    const TD ty = conv_transpose2d(g, y, w, TD(Shape{1, 1, 1, 2}, 0.0), 2);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < cx.numel(); ++i) lhs += cx.values()[i] * y.values()[i];
    for (std::size_t i = 0; i < x.numel(); ++i) rhs += x.values()[i] * ty.values()[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }

  TEST_CASE("elementwise hand examples") {
    Graph<double> g(false);
    CHECK(leaky_relu(g, TD::scalar(-1.0), 0.2).item() == doctest::Approx(-0.2));
    CHECK(leaky_relu(g, TD::scalar(3.0), 0.2).item() == 3.0);
    CHECK(sigmoid(g, TD::scalar(0.0)).item() == 0.5);
    CHECK(log_sigmoid(g, TD::scalar(0.0)).item() == doctest::Approx(-std::log(2.0)));
    CHECK(std::isfinite(log_sigmoid(g, TD::scalar(-1000.0)).item()));
    CHECK(log_sigmoid(g, TD::scalar(-1000.0)).item() == doctest::Approx(-1000.0));
    CHECK(log_sigmoid(g, TD::scalar(1000.0)).item() == doctest::Approx(0.0));
    CHECK(sigmoid(g, TD::scalar(-1000.0)).item() == 0.0);
    CHECK(add(g, TD::scalar(2.0), TD::scalar(3.0)).item() == 5.0);
    CHECK(sub(g, TD::scalar(2.0), TD::scalar(3.0)).item() == -1.0);
    CHECK(mul(g, TD::scalar(2.0), TD::scalar(3.0)).item() == 6.0);
    CHECK(scale(g, TD::scalar(2.0), 1.5).item() == 3.0);
    CHECK_THROWS_AS(add(g, TD(Shape{1, 1, 2, 2}), TD(Shape{1, 1, 2, 1})), InvalidInput);
  }

  TEST_CASE("maxpool routes the gradient to the argmax") {
    Graph<double> g;
    const TD x(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4}, true);
    const TD y = maxpool2x(g, x);
    CHECK(y.item() == 4.0);
    g.backward(y);
    CHECK(x.grad()[3] == 1.0);
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.grad()[1] == 0.0);
    CHECK(x.grad()[2] == 0.0);

    Graph<double> g2;
    const TD tie(Shape{1, 1, 2, 2}, 5.0, true);
    g2.backward(maxpool2x(g2, tie));
    CHECK(tie.grad()[0] == 1.0);
    CHECK(tie.grad()[3] == 0.0);
    CHECK_THROWS_AS(maxpool2x(g2, TD(Shape{1, 1, 3, 2})), InvalidInput);
  }

  TEST_CASE("structural ops") {
    Graph<double> g(false);
    const TD a = random_tensor({2, 1, 2, 3}, 1), b = random_tensor({2, 2, 2, 3}, 2);
    const TD c = concat_channels(g, a, b);
    CHECK(c.shape() == Shape{2, 3, 2, 3});
    CHECK(c.values()[6] == b.values()[0]);
    CHECK(c.values()[18] == a.values()[6]);

    const TD p = pad_replicate(g, a, 1, 2);
    CHECK(p.shape() == Shape{2, 1, 3, 5});
    CHECK(p.values()[4] == a.values()[2]);
    CHECK(p.values()[14] == a.values()[5]);

    const TD k = crop(g, p, 2, 3);
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(k.values()[i] == a.values()[i]);
    CHECK_THROWS_AS(crop(g, a, 3, 1), InvalidInput);

    const TD gap = global_avg_pool(g, TD(Shape{1, 2, 2, 2}, std::vector<double>{1, 2, 3, 4, 0, 0, 0, 8}));
    CHECK(gap.values()[0] == 2.5);
    CHECK(gap.values()[1] == 2.0);

    const TD r = resize_bilinear(g, TD(Shape{1, 1, 3, 3}, 0.3), 7, 2);
    for (double v : r.values()) CHECK(v == doctest::Approx(0.3));
  }

  TEST_CASE("reductions and backward basics") {
    Graph<double> g;
    const TD x = random_tensor({1, 2, 3, 3}, 3);
    const TD s = sum(g, x);
    g.backward(s);
    for (double v : x.grad()) CHECK(v == 1.0);

    x.drop_grad();
    Graph<double> g2;
    g2.backward(sum(g2, mul(g2, x, x)));
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(x.grad()[i] == doctest::Approx(2.0 * x.values()[i]));

    Graph<double> g3;
    const TD y = random_tensor({1, 2, 3, 3}, 4);
    CHECK(l1_distance(g3, x, y).item() > 0.0);
    CHECK(l1_distance(g3, x, x).item() == 0.0);
    CHECK(mean(g3, TD(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 6})).item() == 3.0);
    CHECK_THROWS_AS(g3.backward(x), InvalidInput);
  }

  TEST_CASE("backward is repeatable and additive") {
    const TD x = random_tensor({1, 1, 4, 4}, 5);
    auto run = [&](bool both) {
      x.drop_grad();
      Graph<double> g;
      const TD l1 = sum(g, mul(g, x, x));
      const TD l2 = sum(g, sigmoid(g, x));
      g.backward(both ? add(g, l1, l2) : l1);
      return std::vector<double>(x.grad().begin(), x.grad().end());
    };
    const auto first = run(false);
    const auto again = run(false);
    CHECK(first == again);
    const auto combined = run(true);
    x.drop_grad();
    Graph<double> g;
    g.backward(sum(g, sigmoid(g, x)));
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(combined[i] == doctest::Approx(first[i] + x.grad()[i]));
  }

  TEST_CASE("no recording without grad or when disabled") {
    Graph<double> g;
    const TD a = random_tensor({1, 1, 2, 2}, 1, -1, 1, false);
    const TD out = sigmoid(g, a);
    CHECK(g.size() == 0);
    CHECK_FALSE(out.requires_grad());
    Graph<double> off(false);
    sigmoid(off, random_tensor({1, 1, 2, 2}, 2));
    CHECK(off.size() == 0);
  }

  TEST_CASE("finite-difference checks for every op") {
    for (int seed = 0; seed < kSeeds; ++seed) {
      CAPTURE(seed);
      for (const auto& c : op_gradient_cases(static_cast<std::uint64_t>(seed))) {
        CAPTURE(c.name);
        check(c.inputs, c.loss);
      }
    }
  }

  TEST_CASE("ops stay finite on inputs in [-10, 10]") {
    Graph<double> g(false);
    const TD x = random_tensor({1, 2, 4, 4}, 9, -10, 10);
    for (const TD& y : {sigmoid(g, x), log_sigmoid(g, x), leaky_relu(g, x, 0.2), mul(g, x, x)}) {
      for (double v : y.values()) CHECK(std::isfinite(v));
    }
  }
}

TEST_SUITE("adam") {
  TEST_CASE("first step with unit gradient moves by lr") {
    TD p(Shape{1, 1, 1, 4}, 0.5, true);
    for (double& v : p.grad()) v = 1.0;
    AdamState<double> st;
    st.lr = 1e-4;
    adam_step(p, st);
    CHECK(st.t == 1);
    for (double v : p.values()) CHECK(v == doctest::Approx(0.5 - 1e-4).epsilon(1e-9));
  }

  TEST_CASE("zero gradient leaves parameters unchanged") {
    TD p(Shape{1, 1, 1, 3}, 0.25, true);
    p.grad();
    AdamState<double> st;
    adam_step(p, st);
    CHECK(st.t == 1);
    for (double v : p.values()) CHECK(v == 0.25);
  }

  TEST_CASE("missing gradient is an error") {
    TD p(Shape{1, 1, 1, 3}, 0.25, true);
    AdamState<double> st;
    CHECK_THROWS_AS(adam_step(p, st), InvalidInput);
  }

  TEST_CASE("identical runs give identical parameters") {
    auto run = [] {
      ParameterSet<double> ps;
      TD& w = ps.add("w", {1, 1, 2, 2});
      for (std::size_t i = 0; i < w.numel(); ++i) w.values()[i] = 0.1 * static_cast<double>(i);
      AdamOptimizer<double> opt(1e-2);
      for (int k = 0; k < 5; ++k) {
        ps.zero_grad();
        Graph<double> g;
        g.backward(sum(g, mul(g, w, w)));
        opt.step(ps);
      }
      return std::vector<double>(w.values().begin(), w.values().end());
    };
    CHECK(run() == run());
  }

  TEST_CASE("optimizer minimises a quadratic") {
    ParameterSet<double> ps;
    TD& w = ps.add("w", {1, 1, 1, 2});
    w.values()[0] = 1.0;
    w.values()[1] = -2.0;
    AdamOptimizer<double> opt(0.05);
    for (int k = 0; k < 400; ++k) {
      ps.zero_grad();
      Graph<double> g;
      g.backward(sum(g, mul(g, w, w)));
      opt.step(ps);
    }
    CHECK(std::abs(w.values()[0]) < 1e-2);
    CHECK(std::abs(w.values()[1]) < 1e-2);
  }
}

TEST_SUITE("parameters") {
  TEST_CASE("parameter sets") {
    ParameterSet<float> ps;
    ps.add("a", {1, 2, 3, 3});
    ps.add("b", {1, 1, 1, 2});
    CHECK(ps.size() == 2);
    CHECK(ps.total_elements() == 20);
    CHECK(ps.contains("a"));
    CHECK(ps.get("b").requires_grad());
    CHECK_THROWS(ps.get("c"));
    CHECK_THROWS(ps.add("a", {1, 1, 1, 1}));
  }
}
