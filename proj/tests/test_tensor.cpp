#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "test_util.hpp"
#include "trinity/checkpoint.hpp"
#include "trinity/error.hpp"
#include "trinity/io_util.hpp"
#include "trinity/optim.hpp"
#include "trinity/tensor.hpp"

using namespace trinity;
using namespace trinity::testutil;

TEST_CASE("matmul identity and hand cases") {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor b({2, 2}, {3, 4, 5, 6});
  Tensor c = matmul(eye, b);
  CHECK(c.values() == b.values());

  Tensor r({1, 2}, {1, 2});
  Tensor col({2, 1}, {3, 4});
  CHECK(matmul(r, col).item() == 11.0);

  CHECK_THROWS_AS(matmul(Tensor({2, 3}, std::vector<double>(6, 1.0)),
                         Tensor({2, 3}, std::vector<double>(6, 1.0))),
                  DimensionError);
}

TEST_CASE("matmul gradient matches finite differences") {
  Rng rng(11);
  Tensor a = random_tensor({4, 5}, rng);
  Tensor b = random_tensor({5, 3}, rng);
  auto w = random_weights(12, rng);
  Tensor loss = weighted_sum(matmul(a, b), w);
  backward(loss);

  auto loss_fn = [&]() { return weighted_sum(matmul(a, b), w).item(); };
  auto ra = finite_difference_check(a, loss_fn, a.grad(), 1e-6, 20, rng);
  auto rb = finite_difference_check(b, loss_fn, b.grad(), 1e-6, 15, rng);
  CHECK(ra.ok);
  CHECK(rb.ok);
  CHECK(ra.max_rel_err < 1e-6);
  CHECK(rb.max_rel_err < 1e-6);
}

TEST_CASE("softmax values") {
  Tensor flat({3}, {0, 0, 0});
  Tensor thirds = softmax(flat, 0);
  for (double v : thirds.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  // stabilization: exp(1000) would overflow without max subtraction
  Tensor spiked({2}, {1000, 0});
  auto sv = softmax(spiked, 0).values();
  CHECK(sv[0] == doctest::Approx(1.0));
  CHECK(sv[1] == doctest::Approx(0.0));
  CHECK(std::isfinite(sv[0]));

  // high-precision exp-normalize oracle
  Tensor x({3}, {1, 2, 3});
  auto got = softmax(x, 0).values();
  long double denom = 0.0L;
  for (double v : x.values()) denom += expl(static_cast<long double>(v) - 3.0L);
  for (size_t i = 0; i < 3; ++i) {
    const long double expect = expl(static_cast<long double>(x(i)) - 3.0L) / denom;
    CHECK(std::abs(got[i] - static_cast<double>(expect)) < 1e-12);
  }

  CHECK_THROWS_AS(softmax(x, 1), DimensionError);
}

TEST_CASE("softmax rows are non-negative and sum to one") {
  Rng rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    Tensor t = random_tensor({3, 5, 4}, rng, 10.0, false);
    const size_t axis = static_cast<size_t>(rng.uniform_int(3));
    Tensor s = softmax(t, axis);
    size_t outer = 1, inner = 1;
    for (size_t i = 0; i < axis; ++i) outer *= t.dim(i);
    for (size_t i = axis + 1; i < t.rank(); ++i) inner *= t.dim(i);
    const size_t n = t.dim(axis);
    for (size_t o = 0; o < outer; ++o) {
      for (size_t in = 0; in < inner; ++in) {
        double total = 0.0;
        for (size_t j = 0; j < n; ++j) {
          const double v = s.values()[o * n * inner + j * inner + in];
          CHECK(v >= 0.0);
          total += v;
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
      }
    }
  }
}

TEST_CASE("softmax gradient") {
  Rng rng(23);
  Tensor x = random_tensor({4, 6}, rng, 2.0);
  auto w = random_weights(24, rng);
  Tensor loss = weighted_sum(softmax(x, 1), w);
  backward(loss);
  auto loss_fn = [&]() { return weighted_sum(softmax(x, 1), w).item(); };
  auto r = finite_difference_check(x, loss_fn, x.grad(), 1e-4, 24, rng);
  CHECK(r.ok);
}

TEST_CASE("layer_norm values") {
  Tensor gain({3}, {1, 1, 1});
  Tensor bias({3}, {0, 0, 0});
  Tensor flatline({1, 3}, {5, 5, 5});
  Tensor ln = layer_norm(flatline, gain, bias);
  for (double v : ln.values()) CHECK(v == doctest::Approx(0.0));

  Tensor g2({2}, {1, 1});
  Tensor b2({2}, {0, 0});
  Tensor x({1, 2}, {1, 3});
  auto out = layer_norm(x, g2, b2).values();
  const double expect = 1.0 / std::sqrt(1.0 + 1e-5);
  CHECK(out[0] == doctest::Approx(-expect).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(expect).epsilon(1e-12));

  CHECK_THROWS_AS(layer_norm(x, Tensor({3}, {1, 1, 1}), b2), DimensionError);
}

TEST_CASE("layer_norm gradient") {
  Rng rng(31);
  Tensor x = random_tensor({5, 8}, rng);
  Tensor gain = random_tensor({8}, rng, 0.5);
  Tensor bias = random_tensor({8}, rng, 0.1);
  auto w = random_weights(40, rng);
  Tensor loss = weighted_sum(layer_norm(x, gain, bias), w);
  backward(loss);
  auto loss_fn = [&]() { return weighted_sum(layer_norm(x, gain, bias), w).item(); };
  CHECK(finite_difference_check(x, loss_fn, x.grad(), 1e-4, 40, rng).ok);
  CHECK(finite_difference_check(gain, loss_fn, gain.grad(), 1e-4, 8, rng).ok);
  CHECK(finite_difference_check(bias, loss_fn, bias.grad(), 1e-4, 8, rng).ok);
}

TEST_CASE("attention single key returns value row") {
  Rng rng(5);
  Tensor q = random_tensor({1, 4}, rng, 3.0, false);
  Tensor k = random_tensor({1, 4}, rng, 3.0, false);
  Tensor v = random_tensor({1, 4}, rng, 1.0, false);
  auto out = scaled_dot_attention(q, k, v).values();
  for (size_t i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(v(0, i)));
}

TEST_CASE("attention with uniform scores averages values") {
  // zero query scores every key equally, so the output is the value mean
  Tensor q = Tensor::zeros({1, 3});
  Tensor k({4, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 1});
  Tensor v({4, 3}, {1, 2, 3, 5, 6, 7, 9, 10, 11, 13, 14, 15});
  auto out = scaled_dot_attention(q, k, v).values();
  for (size_t j = 0; j < 3; ++j) {
    double mean = (v(0, j) + v(1, j) + v(2, j) + v(3, j)) / 4.0;
    CHECK(out[j] == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("attention gradient") {
  Rng rng(41);
  Tensor q = random_tensor({3, 4}, rng);
  Tensor k = random_tensor({5, 4}, rng);
  Tensor v = random_tensor({5, 4}, rng);
  auto w = random_weights(12, rng);
  Tensor loss = weighted_sum(scaled_dot_attention(q, k, v), w);
  backward(loss);
  auto loss_fn = [&]() { return weighted_sum(scaled_dot_attention(q, k, v), w).item(); };
  CHECK(finite_difference_check(q, loss_fn, q.grad(), 1e-4, 12, rng).ok);
  CHECK(finite_difference_check(k, loss_fn, k.grad(), 1e-4, 20, rng).ok);
  CHECK(finite_difference_check(v, loss_fn, v.grad(), 1e-4, 20, rng).ok);

  CHECK_THROWS_AS(scaled_dot_attention(q, random_tensor({5, 3}, rng), v), DimensionError);
}

TEST_CASE("cross_entropy values") {
  Tensor confident({1, 2}, {100, 0});
  CHECK(cross_entropy(confident, {0}).item() == doctest::Approx(0.0).epsilon(1e-12));

  Tensor uniform({2, 4}, std::vector<double>(8, 0.7));
  CHECK(cross_entropy(uniform, {1, 3}).item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  CHECK_THROWS_AS(cross_entropy(uniform, {1, 4}), ValueError);
  CHECK_THROWS_AS(cross_entropy(uniform, {kIgnoreLabel, kIgnoreLabel}), ValueError);
}

TEST_CASE("cross_entropy matches long-double oracle") {
  Rng rng(77);
  Tensor logits = random_tensor({5, 3}, rng, 2.0, false);
  std::vector<int64_t> targets = {2, 0, 1, kIgnoreLabel, 2};
  const double got = cross_entropy(logits, targets).item();

  long double expect = 0.0L;
  int valid = 0;
  for (size_t r = 0; r < 5; ++r) {
    if (targets[r] == kIgnoreLabel) continue;
    long double denom = 0.0L;
    for (size_t j = 0; j < 3; ++j) denom += expl(static_cast<long double>(logits(r, j)));
    expect += -logl(expl(static_cast<long double>(logits(r, targets[r]))) / denom);
    valid++;
  }
  expect /= valid;
  CHECK(std::abs(got - static_cast<double>(expect)) < 1e-10);
}

TEST_CASE("cross_entropy ignores masked rows and honors class weights") {
  Rng rng(78);
  Tensor a = random_tensor({3, 4}, rng, 1.0, false);
  std::vector<int64_t> targets = {1, kIgnoreLabel, 3};
  const double base = cross_entropy(a, targets).item();

  // perturb only the ignored row
  auto perturbed = a.values();
  for (size_t j = 0; j < 4; ++j) perturbed[1 * 4 + j] += 7.5;
  CHECK(cross_entropy(Tensor({3, 4}, perturbed), targets).item() == doctest::Approx(base).epsilon(1e-15));

  std::vector<double> weights = {1.0, 2.0, 1.0, 0.5};
  const double got = cross_entropy(a, targets, weights).item();
  long double num = 0.0L, den = 0.0L;
  for (size_t r : {size_t(0), size_t(2)}) {
    long double denom = 0.0L;
    for (size_t j = 0; j < 4; ++j) denom += expl(static_cast<long double>(a(r, j)));
    const long double nll = -logl(expl(static_cast<long double>(a(r, targets[r]))) / denom);
    num += weights[targets[r]] * nll;
    den += weights[targets[r]];
  }
  CHECK(got == doctest::Approx(static_cast<double>(num / den)).epsilon(1e-12));
}

TEST_CASE("cross_entropy gradient") {
  Rng rng(79);
  Tensor logits = random_tensor({6, 4}, rng, 1.5);
  std::vector<int64_t> targets = {0, 3, kIgnoreLabel, 2, 1, 1};
  Tensor loss = cross_entropy(logits, targets);
  backward(loss);
  auto loss_fn = [&]() { return cross_entropy(logits, targets).item(); };
  CHECK(finite_difference_check(logits, loss_fn, logits.grad(), 1e-4, 24, rng).ok);
}

TEST_CASE("bce_with_logits values and gradient") {
  // confident-correct logits drive the loss to zero; zero logits give ln 2
  Tensor right({4}, {100, -100, 100, -100});
  CHECK(bce_with_logits(right, {1, 0, 1, 0}).item() == doctest::Approx(0.0).epsilon(1e-12));
  Tensor zeros = Tensor::zeros({5});
  CHECK(bce_with_logits(zeros, std::vector<double>(5, 1.0)).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Rng rng(81);
  Tensor x = random_tensor({3, 4}, rng, 2.0);
  std::vector<double> t(12);
  for (auto& v : t) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  Tensor loss = bce_with_logits(x, t);
  backward(loss);
  auto loss_fn = [&]() { return bce_with_logits(x, t).item(); };
  CHECK(finite_difference_check(x, loss_fn, x.grad(), 1e-4, 12, rng).ok);
}

TEST_CASE("bilinear_upsample values") {
  Tensor constant({1, 2, 2}, {7, 7, 7, 7});
  Tensor big = bilinear_upsample(constant, 4, 4);
  for (double v : big.values()) CHECK(v == doctest::Approx(7.0));

  Tensor same({1, 2, 2}, {1, 2, 3, 4});
  CHECK(bilinear_upsample(same, 2, 2).values() == same.values());

  Tensor ramp({1, 2, 2}, {0, 1, 0, 1});
  Tensor up = bilinear_upsample(ramp, 4, 4);
  for (size_t i = 0; i < 4; ++i) {
    for (size_t j = 0; j + 1 < 4; ++j) {
      CHECK(up(0, i, j) <= up(0, i, j + 1) + 1e-12);
    }
  }

  CHECK_THROWS_AS(bilinear_upsample(ramp, 0, 4), DimensionError);
  CHECK_THROWS_AS(bilinear_upsample(ramp, 1, 4), DimensionError);
}

TEST_CASE("bilinear_upsample gradient") {
  Rng rng(87);
  Tensor x = random_tensor({2, 3, 4}, rng);
  auto w = random_weights(2 * 6 * 9, rng);
  Tensor loss = weighted_sum(bilinear_upsample(x, 6, 9), w);
  backward(loss);
  auto loss_fn = [&]() { return weighted_sum(bilinear_upsample(x, 6, 9), w).item(); };
  CHECK(finite_difference_check(x, loss_fn, x.grad(), 1e-4, 24, rng).ok);
}

TEST_CASE("backward basics") {
  Rng rng(90);
  Tensor x = random_tensor({3, 3}, rng);
  Tensor loss = sum(x);
  backward(loss);
  for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));

  x.zero_grad();
  Tensor loss2 = sum(mul(x, x));
  backward(loss2);
  for (size_t i = 0; i < x.size(); ++i) CHECK(x.grad()[i] == doctest::Approx(2.0 * x.values()[i]));

  CHECK_THROWS_AS(backward(loss2), ContractError);
  CHECK_THROWS_AS(backward(x), ContractError);
}

TEST_CASE("backward is linear in the loss") {
  Rng rng(91);
  const double alpha = 1.7;
  auto base = random_tensor({4, 4}, rng, 1.0, false).values();

  auto run = [&](int which) {
    Tensor x({4, 4}, base, true);
    Tensor l1 = sum(mul(x, x));
    Tensor l2 = cross_entropy(reshape(x, {4, 4}), {0, 1, 2, 3});
    Tensor loss = which == 0 ? l1 : (which == 1 ? l2 : add(scale(l1, alpha), l2));
    backward(loss);
    return x.grad();
  };
  auto g1 = run(0), g2 = run(1), gc = run(2);
  for (size_t i = 0; i < g1.size(); ++i) {
    CHECK(std::abs(gc[i] - (alpha * g1[i] + g2[i])) < 1e-10);
  }
}

TEST_CASE("ops are deterministic") {
  Rng rng(92);
  Tensor a = random_tensor({6, 6}, rng, 3.0, false);
  Tensor b = random_tensor({6, 6}, rng, 3.0, false);
  auto first = softmax(matmul(a, b), 1).values();
  auto second = softmax(matmul(a, b), 1).values();
  CHECK(first == second);
}

TEST_CASE("structural ops round gradients correctly") {
  Rng rng(93);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({2, 4}, rng);
  auto w = random_weights(8, rng);
  Tensor joined = concat0(a, b);
  Tensor picked = slice0(joined, 1, 3);
  Tensor loss = weighted_sum(picked, w);
  backward(loss);
  auto loss_fn = [&]() { return weighted_sum(slice0(concat0(a, b), 1, 3), w).item(); };
  CHECK(finite_difference_check(a, loss_fn, a.grad(), 1e-6, 12, rng).ok);
  CHECK(finite_difference_check(b, loss_fn, b.grad(), 1e-6, 8, rng).ok);

  // group mean: two queries per channel
  Tensor q = random_tensor({4, 3}, rng);
  Tensor m = group_mean0(q, {0, 0, 1, 1}, 2);
  CHECK(m(0, 0) == doctest::Approx(0.5 * (q(0, 0) + q(1, 0))));
  CHECK_THROWS_AS(group_mean0(q, {0, 0, 0, 0}, 2), ContractError);
}

TEST_CASE("adam zero gradient leaves parameters in place") {
  Tensor p({3}, {1.0, -2.0, 0.5});
  AdamState state;
  adam_step(p, {0, 0, 0}, state, AdamConfig{});
  CHECK(p.values() == std::vector<double>{1.0, -2.0, 0.5});
  for (double m : state.m) CHECK(m == 0.0);
  for (double v : state.v) CHECK(v == 0.0);
}

TEST_CASE("adam first step moves by -lr*sign(grad)") {
  AdamConfig cfg;
  cfg.lr = 0.01;
  Tensor p({2}, {1.0, 1.0});
  AdamState state;
  adam_step(p, {0.3, -0.7}, state, cfg);
  CHECK(p(0) == doctest::Approx(1.0 - cfg.lr).epsilon(1e-6));
  CHECK(p(1) == doctest::Approx(1.0 + cfg.lr).epsilon(1e-6));

  CHECK_THROWS_AS(adam_step(p, {1.0}, state, cfg), DimensionError);
}

TEST_CASE("adam converges on a quadratic") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  Tensor p({1}, {1.0});
  AdamState state;

  // independent scalar recurrence as oracle
  double x = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 100; ++t) {
    const double g = 2.0 * p(0);
    adam_step(p, {g}, state, cfg);

    const double gx = 2.0 * x;
    m = cfg.beta1 * m + (1 - cfg.beta1) * gx;
    v = cfg.beta2 * v + (1 - cfg.beta2) * gx * gx;
    const double mh = m / (1 - std::pow(cfg.beta1, t));
    const double vh = v / (1 - std::pow(cfg.beta2, t));
    x -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
  }
  CHECK(std::abs(p(0)) < 0.1);
  CHECK(p(0) == doctest::Approx(x).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(95);
  std::vector<std::pair<std::string, Tensor>> tensors;
  tensors.emplace_back("queries.cs", random_tensor({4, 7}, rng, 123.456, false));
  tensors.emplace_back("head.bias", Tensor({3}, {0.0, -0.0, 1e-300}));
  tensors.emplace_back("x", Tensor::scalar(0.1 + 0.2));

  const std::string path = (std::filesystem::temp_directory_path() / "trin_test.ckpt").string();
  save_checkpoint(path, tensors);
  auto loaded = load_checkpoint(path);
  REQUIRE(loaded.size() == tensors.size());
  for (size_t i = 0; i < tensors.size(); ++i) {
    CHECK(loaded[i].first == tensors[i].first);
    CHECK(loaded[i].second.shape() == tensors[i].second.shape());
    const auto& a = loaded[i].second.values();
    const auto& b = tensors[i].second.values();
    REQUIRE(a.size() == b.size());
    for (size_t j = 0; j < a.size(); ++j) {
      uint64_t ba, bb;
      std::memcpy(&ba, &a[j], 8);
      std::memcpy(&bb, &b[j], 8);
      CHECK(ba == bb);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint rejects bad magic and truncation") {
  const auto dir = std::filesystem::temp_directory_path();
  const std::string path = (dir / "trin_bad.ckpt").string();
  {
    std::vector<std::pair<std::string, Tensor>> tensors;
    tensors.emplace_back("t", Tensor({2}, {1.0, 2.0}));
    save_checkpoint(path, tensors);
  }
  auto bytes = read_file_bytes(path);
  bytes[0] = 'X';
  write_file_atomic(path, bytes);
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);

  bytes[0] = 'T';
  bytes.resize(bytes.size() - 5);
  write_file_atomic(path, bytes);
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);
  std::filesystem::remove(path);
}
