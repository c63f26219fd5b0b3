// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "erupt/gradcheck.hpp"
#include "erupt/graph.hpp"
#include "erupt/rng.hpp"

using namespace erupt;

namespace {

Array<double> randa(Shape s, std::uint64_t seed, double lo = -1.0,
                    double hi = 1.0) {
  Array<double> a(std::move(s));
  Rng r(seed);
  for (std::int64_t i = 0; i < a.size(); ++i) a[i] = r.uniform(lo, hi);
  return a;
}

Array<float> randf(Shape s, std::uint64_t seed) {
  Array<float> a(std::move(s));
  Rng r(seed);
  for (std::int64_t i = 0; i < a.size(); ++i)
    a[i] = static_cast<float>(r.uniform(-1.0, 1.0));
  return a;
}

// Scalarizes an op output with fixed weights so every element contributes a
// distinct gradient, then runs the finite-difference comparison.
template <class F>
GradCheckReport<double> check_op(
    std::vector<std::pair<std::string, Array<double>>> params, F make_out) {
  auto f = [&](Graph<double>& g, const std::vector<Tensor<double>>& ps) {
    Tensor<double> out = make_out(g, ps);
    Array<double> w = randa(out.shape(), 4242);
    return sum(mul(out, g.constant(w)));
  };
  return grad_check<double>(f, std::move(params), 1e-4);
}

void expect_ok(const GradCheckReport<double>& rep, double tol = 1e-3) {
  INFO(rep.str());
  CHECK(rep.finite);
  CHECK(rep.max_rel_err < tol);
}

}  // namespace

TEST_CASE("softmax of zeros is uniform") {
  Graph<double> g;
  auto y = softmax(g.constant(Array<double>({1, 3}, 0.0)));
  for (int j = 0; j < 3; ++j)
    CHECK(y.value().at(0, j) == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one") {
  Graph<double> g;
  auto y = softmax(g.constant(randa({7, 11}, 3, -30.0, 30.0)));
  for (int i = 0; i < 7; ++i) {
    double s = 0;
    for (int j = 0; j < 11; ++j) s += y.value().at(i, j);
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("layer_norm of a constant row is zero") {
  Graph<double> g;
  auto y = layer_norm(g.constant(Array<double>({2, 5}, 3.7)));
  for (std::int64_t i = 0; i < y.value().size(); ++i)
    CHECK(std::abs(y.value()[i]) < 1e-9);
}

TEST_CASE("matmul by identity is identity") {
  Graph<double> g;
  Array<double> eye({3, 3}, 0.0);
  for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  Array<double> a = randa({3, 4}, 5);
  auto y = matmul(g.constant(eye), g.constant(a.clone()));
  for (std::int64_t i = 0; i < a.size(); ++i) CHECK(y.value()[i] == a[i]);
}

TEST_CASE("gemm matches a naive reference for all transpose flags") {
  const int m = 3, n = 4, k = 5;
  for (int ta = 0; ta < 2; ++ta)
    for (int tb = 0; tb < 2; ++tb) {
      Array<double> A = ta ? randa({k, m}, 10) : randa({m, k}, 10);
      Array<double> B = tb ? randa({n, k}, 11) : randa({k, n}, 11);
      Array<double> C = randa({m, n}, 12);
      Array<double> ref = C.clone();
      const double alpha = 1.25, beta = 0.5;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          double acc = 0;
          for (int l = 0; l < k; ++l) {
            double a = ta ? A.at(l, i) : A.at(i, l);
            double b = tb ? B.at(j, l) : B.at(l, j);
            acc += a * b;
          }
          ref.at(i, j) = alpha * acc + beta * ref.at(i, j);
        }
      gemm<double>(ta, tb, m, n, k, alpha, A.data(), B.data(), beta, C.data());
      for (std::int64_t i = 0; i < C.size(); ++i)
        CHECK(C[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("matmul gradients for all transpose flags") {
  const int m = 3, n = 4, k = 5;
  for (int ta = 0; ta < 2; ++ta)
    for (int tb = 0; tb < 2; ++tb) {
      auto rep = check_op(
          {{"A", ta ? randa({k, m}, 20) : randa({m, k}, 20)},
           {"B", tb ? randa({n, k}, 21) : randa({k, n}, 21)}},
          [&](Graph<double>&, const std::vector<Tensor<double>>& ps) {
            return matmul(ps[0], ps[1], ta != 0, tb != 0);
          });
      expect_ok(rep);
    }
}

TEST_CASE("elementwise binary gradients") {
  auto a = randa({3, 4}, 30);
  auto b = randa({3, 4}, 31, 0.5, 2.0);  // away from zero for div
  auto mk = [&](auto op) {
    return check_op({{"a", a.clone()}, {"b", b.clone()}},
                    [op](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                      return op(ps[0], ps[1]);
                    });
  };
  expect_ok(mk([](auto x, auto y) { return add(x, y); }));
  expect_ok(mk([](auto x, auto y) { return sub(x, y); }));
  expect_ok(mk([](auto x, auto y) { return mul(x, y); }));
  expect_ok(mk([](auto x, auto y) { return div(x, y); }));
}

TEST_CASE("scalar and row-vector broadcast gradients") {
  expect_ok(check_op({{"a", randa({3, 4}, 40)}},
                     [](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                       return add_scalar(ps[0], 0.7);
                     }));
  expect_ok(check_op({{"a", randa({3, 4}, 41)}},
                     [](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                       return mul_scalar(ps[0], -1.3);
                     }));
  expect_ok(check_op({{"a", randa({3, 4}, 42)}, {"v", randa({1, 4}, 43)}},
                     [](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                       return add_rowvec(ps[0], ps[1]);
                     }));
  expect_ok(check_op({{"a", randa({3, 4}, 44)}, {"v", randa({1, 4}, 45)}},
                     [](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                       return mul_rowvec(ps[0], ps[1]);
                     }));
}

TEST_CASE("row-wise normalization gradients") {
  expect_ok(check_op({{"a", randa({4, 6}, 50, -3.0, 3.0)}},
                     [](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                       return softmax(ps[0]);
                     }));
  expect_ok(check_op({{"a", randa({4, 6}, 51, -3.0, 3.0)}},
                     [](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                       return layer_norm(ps[0]);
                     }));
  expect_ok(check_op({{"a", randa({4, 6}, 52, 0.3, 3.0)}},
                     [](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                       return normalize_rows(ps[0]);
                     }));
}

TEST_CASE("elementwise unary gradients") {
  auto any = randa({3, 5}, 60, -2.0, 2.0);
  auto pos = randa({3, 5}, 61, 0.2, 3.0);
  auto chk = [&](Array<double> in, auto op) {
    return check_op({{"a", std::move(in)}},
                    [op](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                      return op(ps[0]);
                    });
  };
  expect_ok(chk(any.clone(), [](auto x) { return gelu(x); }));
  expect_ok(chk(any.clone(), [](auto x) { return sigmoid(x); }));
  expect_ok(chk(any.clone(), [](auto x) { return sine(x); }));
  expect_ok(chk(any.clone(), [](auto x) { return cosine(x); }));
  expect_ok(chk(any.clone(), [](auto x) { return exp_op(x); }));
  expect_ok(chk(pos.clone(), [](auto x) { return log_op(x); }));
  expect_ok(chk(pos.clone(), [](auto x) { return sqrt_op(x); }));
  expect_ok(chk(randa({3, 5}, 62, -0.8, 0.8),
                [](auto x) { return arc_margin(x, 0.5); }));
}

TEST_CASE("arc_margin equals cos(theta + margin) in range") {
  Graph<double> g;
  const double m = 0.5;
  Array<double> c({1, 5}, {-0.8, -0.3, 0.0, 0.4, 0.85});
  auto y = arc_margin(g.constant(c.clone()), m);
  for (int j = 0; j < 5; ++j) {
    const double expect = std::cos(std::acos(c.at(0, j)) + m);
    CHECK(y.value().at(0, j) == doctest::Approx(expect).epsilon(1e-10));
  }
  // Saturated branch: theta + margin past pi pins the output at -1.
  auto sat = arc_margin(g.constant(Array<double>({1, 1}, -0.95)), m);
  CHECK(sat.value()[0] == doctest::Approx(-1.0));
}

TEST_CASE("shape ops and reduction gradients") {
  expect_ok(check_op({{"a", randa({3, 4}, 70)}, {"b", randa({2, 4}, 71)},
                      {"c", randa({1, 4}, 72)}},
                     [](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                       return concat(
                           std::vector<Tensor<double>>{ps[0], ps[1], ps[2]},
                           0);
                     }));
  expect_ok(check_op({{"a", randa({3, 4}, 73)}, {"b", randa({3, 2}, 74)}},
                     [](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                       return concat(ps[0], ps[1], 1);
                     }));
  expect_ok(check_op({{"a", randa({4, 6}, 75)}},
                     [](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                       return slice(ps[0], 1, 3, 2, 5);
                     }));
  expect_ok(check_op({{"a", randa({3, 4}, 76)}},
                     [](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                       return reshape(ps[0], {2, 6});
                     }));
  expect_ok(check_op({{"a", randa({3, 4}, 77)}},
                     [](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                       return transpose(ps[0]);
                     }));
  expect_ok(check_op({{"a", randa({3, 4}, 78)}},
                     [](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                       return mean(ps[0]);
                     }));
  expect_ok(check_op({{"a", randa({3, 4}, 79)}},
                     [](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                       return sum(ps[0]);
                     }));
  expect_ok(check_op({{"a", randa({3, 4}, 80)}},
                     [](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                       return row_sum(ps[0]);
                     }));
  expect_ok(check_op({{"a", randa({3, 4}, 81)}},
                     [](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                       return l2_norm(ps[0]);
                     }));
  expect_ok(check_op({{"a", randa({4, 4}, 82)}},
                     [](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                       return take_diag(ps[0]);
                     }));
  expect_ok(check_op({{"a", randa({1, 5}, 83)}},
                     [](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                       return tile_rows(ps[0], 4);
                     }));
}

TEST_CASE("conv2d forward matches direct convolution") {
  const int h = 4, w = 5, cin = 2, cout = 3, k = 3;
  Array<double> x = randa({h * w, cin}, 90);
  Array<double> wt = randa({k * k * cin, cout}, 91);
  Graph<double> g;
  auto y = conv2d(g.constant(x.clone()), g.constant(wt.clone()), h, w, k);
  for (int yy = 0; yy < h; ++yy)
    for (int xx = 0; xx < w; ++xx)
      for (int co = 0; co < cout; ++co) {
        double acc = 0;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx) {
            const int sy = yy + dy - 1, sx = xx + dx - 1;
            if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
            for (int ci = 0; ci < cin; ++ci)
              acc += x.at(sy * w + sx, ci) * wt.at((dy * k + dx) * cin + ci, co);
          }
        CHECK(y.value().at(yy * w + xx, co) ==
              doctest::Approx(acc).epsilon(1e-10));
      }
}

TEST_CASE("conv2d gradients") {
  const int h = 3, w = 4;
  for (int k : {1, 3}) {
    expect_ok(check_op(
        {{"x", randa({h * w, 2}, 92)}, {"w", randa({k * k * 2, 3}, 93)}},
        [&](Graph<double>&, const std::vector<Tensor<double>>& ps) {
          return conv2d(ps[0], ps[1], h, w, k);
        }));
  }
}

TEST_CASE("depth_to_space rearranges channel blocks into 2x2 pixels") {
  Graph<double> g;
  Array<double> x({1, 4}, {1.0, 2.0, 3.0, 4.0});
  auto y = depth_to_space(g.constant(x), 1, 1);
  REQUIRE(y.shape() == Shape{4, 1});
  // Row-major 2x2 spatial order: (0,0)=a (0,1)=b (1,0)=c (1,1)=d.
  for (int i = 0; i < 4; ++i) CHECK(y.value()[i] == doctest::Approx(i + 1.0));
  expect_ok(check_op({{"x", randa({6, 8}, 94)}},
                     [](Graph<double>&, const std::vector<Tensor<double>>& ps) {
                       return depth_to_space(ps[0], 2, 3);
                     }));
}

TEST_CASE("grad_check on x squared") {
  auto rep = grad_check<double>(
      [](Graph<double>& g, const std::vector<Tensor<double>>& ps) {
        return sum(mul(ps[0], ps[0]));
      },
      {{"x", Array<double>({1, 1}, 3.0)}}, 1e-4);
  REQUIRE(rep.entries.size() == 1);
  CHECK(rep.entries[0].analytic == doctest::Approx(6.0).epsilon(1e-10));
  CHECK(rep.entries[0].numeric == doctest::Approx(6.0).epsilon(1e-6));
  CHECK(rep.max_rel_err < 1e-7);
}

TEST_CASE("grad_check flags non-finite losses") {
  auto rep = grad_check<double>(
      [](Graph<double>& g, const std::vector<Tensor<double>>& ps) {
        return sum(log_op(ps[0]));
      },
      {{"x", Array<double>({1, 1}, -1.0)}}, 1e-4);
  CHECK(!rep.finite);
}

TEST_CASE("attention block output sum gradient") {
  const int n = 3, d = 4;
  auto f = [&](Graph<double>& g, const std::vector<Tensor<double>>& ps) {
    auto x = ps[0];
    auto q = matmul(x, ps[1]);
    auto kk = matmul(x, ps[2]);
    auto v = matmul(x, ps[3]);
    auto att = softmax(mul_scalar(matmul(q, kk, false, true),
                                  1.0 / std::sqrt(double(d))));
    return sum(matmul(att, v));
  };
  auto rep = grad_check<double>(f,
                                {{"x", randa({n, d}, 100)},
                                 {"wq", randa({d, d}, 101)},
                                 {"wk", randa({d, d}, 102)},
                                 {"wv", randa({d, d}, 103)}},
                                1e-4);
  INFO(rep.str());
  CHECK(rep.finite);
  CHECK(rep.max_rel_err < 1e-5);
}

TEST_CASE("backward visits each reachable node exactly once") {
  Graph<float> g;
  auto a = g.param(randf({2, 3}, 110), Array<float>({2, 3}, 0.0f));
  auto b = g.param(randf({2, 3}, 111), Array<float>({2, 3}, 0.0f));
  auto y = mul(a, a);          // diamond: same input twice
  auto z = add(y, a);          // a reused again
  auto loss = sum(z);
  (void)mul(b, b);             // dead branch, must not be visited
  g.backward(loss);

  std::size_t with_bw = 0;
  for (const auto& n : g.nodes()) {
    CHECK(n->visits <= 1);
    if (n->reachable && n->backward_fn) {
      ++with_bw;
      CHECK(n->visits == 1);
    }
    if (!n->reachable) CHECK(n->visits == 0);
  }
  CHECK(g.last_backward_stats().visited == with_bw);
  CHECK(with_bw == 3);  // mul, add, sum

  // d(sum(a*a + a))/da = 2a + 1, accumulated as (1 + a) + a.
  for (std::int64_t i = 0; i < a.grad().size(); ++i)
    CHECK(a.grad()[i] == (1.0f + a.value()[i]) + a.value()[i]);
}

TEST_CASE("unused parameter keeps an exactly zero gradient") {
  Graph<float> g;
  Array<float> ga({2, 2}, 0.0f), gb({2, 2}, 0.0f);
  auto a = g.param(randf({2, 2}, 120), ga);
  auto b = g.param(randf({2, 2}, 121), gb);
  (void)b;
  g.backward(sum(mul(a, a)));
  for (std::int64_t i = 0; i < gb.size(); ++i) CHECK(gb[i] == 0.0f);
  bool any_nonzero = false;
  for (std::int64_t i = 0; i < ga.size(); ++i)
    any_nonzero |= (ga[i] != 0.0f);
  CHECK(any_nonzero);
}

TEST_CASE("gradients accumulate across graphs through a shared store") {
  Array<float> v = randf({2, 2}, 130);
  Array<float> gr({2, 2}, 0.0f);
  for (int step = 0; step < 2; ++step) {
    Graph<float> g;
    auto p = g.param(v, gr);
    g.backward(sum(p));
  }
  for (std::int64_t i = 0; i < gr.size(); ++i) CHECK(gr[i] == 2.0f);
}

TEST_CASE("no-grad mode does not build a differentiable tape") {
  Graph<float> g;
  g.set_recording(false);
  auto a = g.param(randf({2, 2}, 140), Array<float>({2, 2}, 0.0f));
  auto y = sum(mul(a, a));
  CHECK(!y.n->needs_grad);
  CHECK_THROWS_AS(g.backward(y), ValueError);
}

TEST_CASE("forward is bit-reproducible") {
  auto run = [](std::uint64_t seed) {
    Graph<float> g;
    auto x = g.constant(randf({9, 8}, seed));
    auto w = g.constant(randf({8, 8}, seed + 1));
    auto y = layer_norm(gelu<float>(matmul(x, w)));
    std::vector<float> out(y.value().data(), y.value().data() + y.value().size());
    return out;
  };
  auto a = run(7), b = run(7);
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

TEST_CASE("shape errors name the op and both shapes") {
  Graph<float> g;
  auto a = g.constant(randf({2, 3}, 150));
  auto b = g.constant(randf({4, 5}, 151));
  try {
    (void)matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[4,5]") != std::string::npos);
  }
  CHECK_THROWS_AS((void)add(a, b), ShapeError);
  CHECK_THROWS_AS((void)slice(a, 0, 5, 0, 1), ShapeError);
}

TEST_CASE("op_set lists the public differentiable ops") {
  auto ops = op_set();
  for (const char* want :
       {"matmul", "add", "mul", "softmax", "layer_norm", "gelu", "concat",
        "slice", "reshape", "transpose", "mean", "sum", "conv2d", "sine",
        "cosine", "l2_norm"})
    CHECK(std::find(ops.begin(), ops.end(), want) != ops.end());
}

TEST_CASE("allocation accounting and budget") {
  const std::int64_t before = AllocStats::current().load();
  {
    Array<float> a({128, 128});
    CHECK(AllocStats::current().load() == before + 128 * 128 * 4);
  }
  CHECK(AllocStats::current().load() == before);

  AllocStats::set_budget(before + 1024);
  CHECK_THROWS_AS(Array<float>({1024, 1024}), AllocBudgetError);
  AllocStats::set_budget(0);
  Array<float> ok({64, 64});
  CHECK(ok.size() == 64 * 64);
}

TEST_CASE("rng state round-trips") {
  Rng r(42);
  for (int i = 0; i < 5; ++i) (void)r.normal();
  const std::string s = r.state();
  std::vector<double> first;
  for (int i = 0; i < 7; ++i) first.push_back(r.normal());
  Rng r2(1);
  r2.set_state(s);
  for (int i = 0; i < 7; ++i) CHECK(r2.normal() == first[i]);
}

TEST_CASE("fold_seed separates streams") {
  CHECK(fold_seed(1, {2, 3}) != fold_seed(1, {3, 2}));
  CHECK(fold_seed(1, {2, 3}) != fold_seed(2, {2, 3}));
  CHECK(fold_seed(1, {2, 3}) == fold_seed(1, {2, 3}));
}

TEST_CASE("grad_check subsampling probes a subset") {
  auto rep = grad_check<double>(
      [](Graph<double>& g, const std::vector<Tensor<double>>& ps) {
        return sum(mul(ps[0], ps[0]));
      },
      {{"x", randa({8, 8}, 160)}}, 1e-4, 5, 99);
  CHECK(rep.finite);
  CHECK(rep.max_rel_err < 1e-6);
}
