#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <cstring>
#include <limits>
#include <sstream>
#include <vector>

#include "aoirelay/neuralnet.hpp"
#include "doctest.h"

using namespace aoirelay;

namespace {

Architecture arch(std::size_t in, std::vector<std::size_t> hidden, std::size_t out) {
  Architecture a;
  a.input_dim = in;
  a.hidden_dims = std::move(hidden);
  a.output_dim = out;
  return a;
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = 2.0 * rng.uniform() - 1.0;
  return v;
}

// Straightforward matrix arithmetic, written separately from the library.
std::vector<double> reference_forward(const QNetworkParams& p, std::vector<double> x) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& L = p.layers[l];
    std::vector<double> y(L.out);
    for (std::size_t r = 0; r < L.out; ++r) {
      long double acc = L.bias[r];
      for (std::size_t c = 0; c < L.in; ++c) acc += static_cast<long double>(L.weights[r * L.in + c]) * x[c];
      y[r] = static_cast<double>(acc);
      if (l + 1 < p.layers.size()) y[r] = std::max(0.0, y[r]);
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace

TEST_CASE("init_network") {
  Rng a(1), b(1);
  const auto p = init_network(arch(21, {80}, 6), a);
  const auto q = init_network(arch(21, {80}, 6), b);
  CHECK(p == q);
  for (const auto& l : p.layers) {
    for (double v : l.bias) CHECK(v == 0.0);
  }
  const auto& w = p.layers[0].weights;
  REQUIRE(w.size() == 80 * 21);
  const double limit = std::sqrt(6.0 / (21 + 80));
  double sum = 0.0;
  for (double v : w) {
    REQUIRE(std::abs(v) <= limit);
    sum += v;
  }
  // Uniform(-L, L) has variance L^2 / 3.
  const double sd_mean = limit / std::sqrt(3.0) / std::sqrt(static_cast<double>(w.size()));
  CHECK(std::abs(sum / w.size()) < 3 * sd_mean);
  CHECK(p.parameter_count() == 21 * 80 + 80 + 80 * 6 + 6);
}

TEST_CASE("forward") {
  SUBCASE("zero parameters give zero output") {
    Rng rng(2);
    auto p = init_network(arch(5, {8}, 4), rng);
    for (auto& l : p.layers) {
      std::fill(l.weights.begin(), l.weights.end(), 0.0);
    }
    for (double v : forward(p, random_vector(5, rng))) CHECK(v == 0.0);
  }
  SUBCASE("identity single layer") {
    Rng rng(3);
    auto p = init_network(arch(3, {}, 3), rng);
    auto& w = p.layers[0].weights;
    std::fill(w.begin(), w.end(), 0.0);
    for (int i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
    const std::vector<double> x{0.5, -2.0, 7.25};
    CHECK(forward(p, x) == x);
  }
  SUBCASE("matches an independent implementation") {
    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
      auto p = init_network(arch(16, {80}, 6), rng);
      for (auto& l : p.layers) {
        for (auto& v : l.bias) v = rng.uniform() - 0.5;
      }
      const auto x = random_vector(16, rng);
      const auto got = forward(p, x);
      const auto want = reference_forward(p, x);
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(std::abs(got[i] - want[i]) <= 1e-12 * std::max(1.0, std::abs(want[i])));
      }
    }
  }
  SUBCASE("dimension mismatch") {
    Rng rng(5);
    auto p = init_network(arch(3, {4}, 2), rng);
    CHECK_THROWS_AS(forward(p, std::vector<double>(4, 0.0)), std::invalid_argument);
  }
}

TEST_CASE("weighted_td_loss") {
  auto t = weighted_td_loss(3.0, 3.0, 1.0);
  CHECK(t.loss == 0.0);
  CHECK(t.grad == 0.0);
  t = weighted_td_loss(3.0, 5.0, 1.0);
  CHECK(t.loss == 4.0);
  CHECK(t.grad == -4.0);
  t = weighted_td_loss(3.0, 50.0, 0.0);
  CHECK(t.grad == 0.0);
}

TEST_CASE("backward") {
  Rng rng(6);
  auto p = init_network(arch(5, {8}, 4), rng);
  const auto x = random_vector(5, rng);

  CHECK(backward(p, x, 1, 0.0).is_zero());

  const auto g = backward(p, x, 2, 0.75);
  const auto& out = g.layers.back();
  for (std::size_t r = 0; r < 4; ++r) CHECK(out.bias[r] == (r == 2 ? 0.75 : 0.0));
  for (std::size_t r = 0; r < 4; ++r) {
    if (r == 2) continue;
    for (std::size_t c = 0; c < 8; ++c) CHECK(out.weights[r * 8 + c] == 0.0);
  }
}

// Central differences of w * (y - Q(s,a))^2, coded here without the library's
// helper.
TEST_CASE("backward matches central differences on random 5-8-4 networks") {
  Rng rng(7);
  const double h = 1e-5;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    auto p = init_network(arch(5, {8}, 4), rng);
    for (auto& l : p.layers) {
      for (auto& v : l.bias) v = rng.uniform() - 0.5;
    }
    const auto x = random_vector(5, rng);
    const std::size_t a = rng.uniform_index(4);
    const double y = 2.0 * rng.uniform() - 1.0;
    const double w = 0.1 + 0.9 * rng.uniform();
    auto f = [&]() {
      const double e = y - reference_forward(p, x)[a];
      return w * e * e;
    };
    const auto g = backward(p, x, a, weighted_td_loss(forward(p, x)[a], y, w).grad);
    double d2 = 0.0, n2 = 0.0;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      auto check = [&](double& theta, double analytic) {
        const double s = theta;
        theta = s + h;
        const double up = f();
        theta = s - h;
        const double dn = f();
        theta = s;
        const double numeric = (up - dn) / (2 * h);
        d2 += (analytic - numeric) * (analytic - numeric);
        n2 += std::max(analytic * analytic, numeric * numeric);
      };
      for (std::size_t i = 0; i < p.layers[l].weights.size(); ++i) check(p.layers[l].weights[i], g.layers[l].weights[i]);
      for (std::size_t i = 0; i < p.layers[l].bias.size(); ++i) check(p.layers[l].bias[i], g.layers[l].bias[i]);
    }
    if (n2 > 0) worst = std::max(worst, std::sqrt(d2 / n2));
  }
  CHECK(worst < 1e-4);

  const auto report = gradient_check(100, 11);
  CHECK(report.networks == 100);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("apply_update") {
  Rng rng(8);
  auto p = init_network(arch(3, {4}, 2), rng);
  const auto before = p;
  auto d = GradientSet::zeros_like(p);
  apply_update(p, d, 0.5);
  CHECK(p == before);
  d.layers[0].weights[0] = 1.0;
  apply_update(p, d, 0.0);
  CHECK(p == before);

  SUBCASE("one step on (y - theta x)^2") {
    auto q = init_network(arch(1, {}, 1), rng);
    q.layers[0].weights[0] = 0.0;
    const std::vector<double> x{1.0};
    auto g = GradientSet::zeros_like(q);
    Workspace ws(q.arch);
    const double pred = ws.forward(q, x)[0];
    ws.backward_accumulate(q, x, 0, weighted_td_loss(pred, 1.0, 1.0).grad, -1.0, g);
    apply_update(q, g, 0.1);
    CHECK(q.layers[0].weights[0] == doctest::Approx(0.2));
  }
  SUBCASE("non-finite result is rejected and parameters kept") {
    auto bad = GradientSet::zeros_like(p);
    bad.layers[1].bias[0] = std::numeric_limits<double>::infinity();
    const auto keep = p;
    CHECK_THROWS_AS(apply_update(p, bad, 1.0), std::domain_error);
    CHECK(p == keep);
  }
}

TEST_CASE("plain descent on a fixed regression batch never increases the loss") {
  Rng rng(9);
  auto p = init_network(arch(4, {6}, 3), rng);
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (int i = 0; i < 8; ++i) {
    xs.push_back(random_vector(4, rng));
    ys.push_back(rng.uniform());
  }
  auto total = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) s += weighted_td_loss(forward(p, xs[i])[1], ys[i], 1.0).loss;
    return s;
  };
  Workspace ws(p.arch);
  double prev = total();
  for (int step = 0; step < 100; ++step) {
    auto d = GradientSet::zeros_like(p);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double q = ws.forward(p, xs[i])[1];
      ws.backward_accumulate(p, xs[i], 1, weighted_td_loss(q, ys[i], 1.0).grad, -1.0, d);
    }
    apply_update(p, d, 1e-3);
    const double now = total();
    REQUIRE(now <= prev + 1e-15);
    prev = now;
  }
}

TEST_CASE("clone_params") {
  Rng rng(10);
  auto p = init_network(arch(3, {4}, 2), rng);
  auto c = clone_params(p);
  CHECK(c == p);
  auto d = GradientSet::zeros_like(p);
  d.layers[0].weights[0] = 1.0;
  apply_update(p, d, 1.0);
  CHECK_FALSE(c == p);
  CHECK(clone_params(clone_params(c)) == c);
}

TEST_CASE("checkpoint round trip is bit-identical") {
  Rng rng(11);
  auto p = init_network(arch(16, {80, 12}, 6), rng);
  for (auto& l : p.layers) {
    for (auto& v : l.bias) v = rng.uniform() * 1e-300;  // subnormal-range values survive too
  }
  std::stringstream ss;
  save_checkpoint(p, ss);
  const std::string bytes = ss.str();
  const auto q = load_checkpoint(ss);
  CHECK(q == p);
  const auto x = random_vector(16, rng);
  const auto a = forward(p, x), b = forward(q, x);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::memcmp(&a[i], &b[i], sizeof(double)) == 0);

  std::stringstream again;
  save_checkpoint(q, again);
  CHECK(again.str() == bytes);

  SUBCASE("layout header") {
    REQUIRE(bytes.size() > 8);
    CHECK(bytes.substr(0, 8) == std::string("AOIQNET\0", 8));
    CHECK(static_cast<unsigned char>(bytes[8]) == 1);  // version, little endian
  }
  SUBCASE("corrupt input is rejected") {
    std::stringstream bad(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS(load_checkpoint(bad));
    std::string wrong = bytes;
    wrong[0] = 'X';
    std::stringstream bad2(wrong);
    CHECK_THROWS(load_checkpoint(bad2));
  }
}

TEST_CASE("adam step moves against the gradient") {
  Rng rng(12);
  auto p = init_network(arch(1, {}, 1), rng);
  p.layers[0].weights[0] = 0.0;
  AdamOptimizer adam(p);
  auto d = GradientSet::zeros_like(p);
  d.layers[0].weights[0] = 2.0;  // descent direction is +
  adam.apply(p, d, 0.01);
  // First bias-corrected step has magnitude mu.
  CHECK(p.layers[0].weights[0] == doctest::Approx(0.01).epsilon(1e-6));
}
