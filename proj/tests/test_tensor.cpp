#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "semocc/checkpoint.hpp"
#include "semocc/optim.hpp"
#include "semocc/tensor.hpp"

using namespace semocc;
using semocc::testing::finite_difference_check;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("matmul identity") {
  Tensor i2 = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor v = Tensor::from_data({2, 1}, {3, 4});
  Tensor r = matmul(i2, v);
  CHECK(r.data() == std::vector<double>{3, 4});
}

TEST_CASE("matmul rejects mismatched shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({2, 3});
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("(2,3)"), std::invalid_argument);
}

TEST_CASE("softmax symmetry and normalization") {
  Tensor x = Tensor::from_data({2}, {0, 0});
  Tensor s = softmax_axis(x, 0);
  CHECK(s.data()[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.data()[1] == doctest::Approx(0.5).epsilon(1e-15));

  Rng rng(11);
  for (int rep = 0; rep < 30; ++rep) {
    Tensor r = random_tensor({4, 5}, rng, -6.0, 6.0);
    Tensor sm = softmax_axis(r, 1);
    for (int i = 0; i < 4; ++i) {
      double sum = 0.0;
      for (int j = 0; j < 5; ++j) {
        double p = sm.data()[static_cast<size_t>(i) * 5 + j];
        CHECK(p > 0.0);
        sum += p;
      }
      CHECK(std::fabs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("scatter_add sums and conserves mass") {
  Tensor src = Tensor::from_data({3}, {1.0, 2.0, 5.0});
  Tensor out = scatter_add(src, {0, 0, 1}, {2});
  CHECK(out.data() == std::vector<double>{3.0, 5.0});

  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    int n = 1 + static_cast<int>(rng.below(40));
    int m = 1 + static_cast<int>(rng.below(10));
    Tensor s = random_tensor({n}, rng);
    std::vector<int64_t> idx(static_cast<size_t>(n));
    for (auto& i : idx) i = static_cast<int64_t>(rng.below(static_cast<uint64_t>(m)));
    Tensor o = scatter_add(s, idx, {m});
    double in_sum = 0.0, out_sum = 0.0;
    for (double v : s.data()) in_sum += v;
    for (double v : o.data()) out_sum += v;
    CHECK(out_sum == doctest::Approx(in_sum).epsilon(1e-12));
  }
}

TEST_CASE("conv2d with delta kernel reproduces input") {
  Rng rng(3);
  Tensor x = random_tensor({2, 6, 7}, rng);
  Tensor w = Tensor::zeros({2, 2, 3, 3});
  // identity: center tap of matching channel
  for (int c = 0; c < 2; ++c) w.data()[((static_cast<size_t>(c) * 2 + c) * 3 + 1) * 3 + 1] = 1.0;
  Tensor y = conv2d(x, w, 1);
  REQUIRE(y.shape() == x.shape());
  for (int c = 0; c < 2; ++c)
    for (int i = 1; i < 5; ++i)
      for (int j = 1; j < 6; ++j) {
        size_t k = (static_cast<size_t>(c) * 6 + i) * 7 + j;
        CHECK(y.data()[k] == x.data()[k]);
      }
}

TEST_CASE("backward simple cases") {
  // d(x*x)/dx at 3 is 6
  Tensor x = Tensor::from_data({1}, {3.0}, true);
  Tensor loss = mul(x, x);
  loss.backward();
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));

  // softmax outputs sum to 1, so d(sum softmax)/dx = 0
  Tensor y = Tensor::from_data({4}, {0.3, -0.2, 1.0, 0.5}, true);
  Tensor l2 = sum_all(softmax_axis(y, 0));
  l2.backward();
  for (double g : y.grad()) CHECK(std::fabs(g) < 1e-12);
}

TEST_CASE("backward rejects non-scalar loss") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  Tensor y = scale(x, 2.0);
  CHECK_THROWS_AS(y.backward(), std::invalid_argument);
}

TEST_CASE("gradients match central finite differences per op") {
  Rng rng(20240810);
  const double tol = 1e-4;
  auto check = [&](const char* name, auto f, std::vector<Tensor> inputs) {
    double err = finite_difference_check(f, std::move(inputs));
    INFO(name);
    CHECK(err <= tol);
  };

  for (int rep = 0; rep < 20; ++rep) {
    check("add", [](const std::vector<Tensor>& in) { return sum_all(add(in[0], in[1])); },
          {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)});
    check("sub", [](const std::vector<Tensor>& in) { return sum_all(mul(sub(in[0], in[1]), in[0])); },
          {random_tensor({5}, rng), random_tensor({5}, rng)});
    check("mul", [](const std::vector<Tensor>& in) { return sum_all(mul(in[0], in[1])); },
          {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)});
    check("divide", [](const std::vector<Tensor>& in) { return sum_all(divide(in[0], in[1])); },
          {random_tensor({6}, rng), random_tensor({6}, rng, 0.5, 1.5)});
    check("matmul", [](const std::vector<Tensor>& in) { return sum_all(matmul(in[0], in[1])); },
          {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)});
    check("relu", [](const std::vector<Tensor>& in) { return sum_all(mul(relu(in[0]), in[0])); },
          {random_tensor({4, 4}, rng)});
    check("sigmoid", [](const std::vector<Tensor>& in) { return sum_all(mul(sigmoid(in[0]), in[0])); },
          {random_tensor({7}, rng)});
    check("log", [](const std::vector<Tensor>& in) { return sum_all(log_elem(in[0])); },
          {random_tensor({5}, rng, 0.2, 2.0)});
    check("softmax", [](const std::vector<Tensor>& in) { return sum_all(mul(softmax_axis(in[0], 1), in[1])); },
          {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)});
    check("log_softmax", [](const std::vector<Tensor>& in) { return sum_all(mul(log_softmax_axis(in[0], 0), in[1])); },
          {random_tensor({4, 3}, rng), random_tensor({4, 3}, rng)});
    check("sum_axis", [](const std::vector<Tensor>& in) { return sum_all(mul(sum_axis(in[0], 1), in[1])); },
          {random_tensor({3, 4, 2}, rng), random_tensor({3, 2}, rng)});
    check("reshape", [](const std::vector<Tensor>& in) { return sum_all(mul(reshape(in[0], {6}), in[1])); },
          {random_tensor({2, 3}, rng), random_tensor({6}, rng)});
    check("permute", [](const std::vector<Tensor>& in) { return sum_all(mul(permute(in[0], {2, 0, 1}), in[1])); },
          {random_tensor({2, 3, 4}, rng), random_tensor({4, 2, 3}, rng)});
    check("concat", [](const std::vector<Tensor>& in) {
            return sum_all(mul(concat({in[0], in[1]}, 0), in[2])); },
          {random_tensor({2, 3}, rng), random_tensor({4, 3}, rng), random_tensor({6, 3}, rng)});
    check("slice", [](const std::vector<Tensor>& in) { return sum_all(mul(slice(in[0], 0, 1, 2), in[1])); },
          {random_tensor({4, 3}, rng), random_tensor({2, 3}, rng)});
    check("conv1d", [](const std::vector<Tensor>& in) { return sum_all(mul(conv1d(in[0], in[1]), in[2])); },
          {random_tensor({2, 6}, rng), random_tensor({3, 2, 3}, rng), random_tensor({3, 6}, rng)});
    check("conv2d_s1", [](const std::vector<Tensor>& in) { return sum_all(mul(conv2d(in[0], in[1], 1), in[2])); },
          {random_tensor({2, 4, 5}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3, 4, 5}, rng)});
    check("conv2d_s2", [](const std::vector<Tensor>& in) { return sum_all(mul(conv2d(in[0], in[1], 2), in[2])); },
          {random_tensor({2, 4, 6}, rng), random_tensor({2, 2, 3, 3}, rng), random_tensor({2, 2, 3}, rng)});
    check("conv3d", [](const std::vector<Tensor>& in) { return sum_all(mul(conv3d(in[0], in[1], 1), in[2])); },
          {random_tensor({2, 3, 3, 4}, rng), random_tensor({2, 2, 3, 3, 3}, rng), random_tensor({2, 3, 3, 4}, rng)});
    check("upsample2d", [](const std::vector<Tensor>& in) { return sum_all(mul(upsample2x_2d(in[0]), in[1])); },
          {random_tensor({2, 3, 2}, rng), random_tensor({2, 6, 4}, rng)});
    check("upsample3d", [](const std::vector<Tensor>& in) { return sum_all(mul(upsample2x_3d(in[0]), in[1])); },
          {random_tensor({1, 2, 2, 2}, rng), random_tensor({1, 4, 4, 4}, rng)});
    check("pad_crop", [](const std::vector<Tensor>& in) {
            return sum_all(mul(crop3d(pad3d(in[0], 4, 4, 4), 3, 3, 3), in[1])); },
          {random_tensor({2, 3, 3, 3}, rng), random_tensor({2, 3, 3, 3}, rng)});
    check("gather", [](const std::vector<Tensor>& in) {
            return sum_all(mul(gather(in[0], {0, 2, 2, 5}, {4}), in[1])); },
          {random_tensor({6}, rng), random_tensor({4}, rng)});
    check("scatter_add", [](const std::vector<Tensor>& in) {
            return sum_all(mul(scatter_add(in[0], {1, 1, 0, 3}, {4}), in[1])); },
          {random_tensor({4}, rng), random_tensor({4}, rng)});
    check("embedding", [](const std::vector<Tensor>& in) {
            return sum_all(mul(embedding_lookup(in[0], {2, 0, 2}), in[1])); },
          {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)});
    check("selective_scan", [](const std::vector<Tensor>& in) {
            return sum_all(mul(selective_scan(in[0], sigmoid(in[1]), in[2], in[3]), in[4])); },
          {random_tensor({5, 2}, rng), random_tensor({5, 2}, rng), random_tensor({5, 2}, rng),
           random_tensor({5, 2}, rng), random_tensor({5, 2}, rng)});
    check("plane_product_z", [](const std::vector<Tensor>& in) {
            return sum_all(mul(plane_product(in[0], in[1], PlaneShare::kZ), in[2])); },
          {random_tensor({2, 3, 4}, rng), random_tensor({2, 2, 4}, rng), random_tensor({2, 3, 2, 4}, rng)});
    check("plane_product_y", [](const std::vector<Tensor>& in) {
            return sum_all(mul(plane_product(in[0], in[1], PlaneShare::kY), in[2])); },
          {random_tensor({2, 3, 2}, rng), random_tensor({2, 2, 4}, rng), random_tensor({2, 3, 2, 4}, rng)});
  }
}

TEST_CASE("random composite graphs match finite differences") {
  Rng rng(99);
  for (int rep = 0; rep < 20; ++rep) {
    auto f = [](const std::vector<Tensor>& in) {
      Tensor a = matmul(in[0], in[1]);
      Tensor b = relu(a);
      Tensor c = softmax_axis(add(b, in[2]), 1);
      Tensor d = mul(c, in[2]);
      return sum_all(d);
    };
    double err = finite_difference_check(
        f, {random_tensor({3, 4}, rng), random_tensor({4, 5}, rng), random_tensor({3, 5}, rng)});
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("selective scan trivial gate settings") {
  Rng rng(5);
  Tensor x = random_tensor({6, 3}, rng);
  Tensor zero = Tensor::zeros({6, 3});
  Tensor one = Tensor::full({6, 3}, 1.0);
  Tensor b = random_tensor({6, 3}, rng);
  Tensor c = random_tensor({6, 3}, rng);

  // a == 0: memoryless, y = c*b*x
  Tensor y0 = selective_scan(x, zero, b, c);
  for (int64_t i = 0; i < x.size(); ++i)
    CHECK(y0.data()[static_cast<size_t>(i)] ==
          doctest::Approx(c.data()[static_cast<size_t>(i)] * b.data()[static_cast<size_t>(i)] *
                          x.data()[static_cast<size_t>(i)]).epsilon(1e-15));

  // a == b == c == 1: prefix sums per channel
  Tensor y1 = selective_scan(x, one, one, one);
  for (int ch = 0; ch < 3; ++ch) {
    double run = 0.0;
    for (int t = 0; t < 6; ++t) {
      run += x.data()[static_cast<size_t>(t) * 3 + ch];
      CHECK(y1.data()[static_cast<size_t>(t) * 3 + ch] == doctest::Approx(run).epsilon(1e-14));
    }
  }

  // random case vs step-by-step loop, exact
  Tensor a = random_tensor({7, 2}, rng, 0.0, 1.0);
  Tensor x7 = random_tensor({7, 2}, rng);
  Tensor b7 = random_tensor({7, 2}, rng);
  Tensor c7 = random_tensor({7, 2}, rng);
  Tensor y7 = selective_scan(x7, a, b7, c7);
  auto ref = semocc::testing::scan_reference(x7.data(), a.data(), b7.data(), c7.data(), 7, 2);
  CHECK(y7.data() == ref);
}

TEST_CASE("adamw descends and respects fixed point") {
  // one step on f(w) = w^2 from w = 1 decreases w
  Tensor w = Tensor::from_data({1}, {1.0}, true);
  AdamW opt({w}, {.learning_rate = 0.1, .weight_decay = 0.0});
  Tensor loss = mul(w, w);
  loss.backward();
  opt.step();
  CHECK(w.data()[0] < 1.0);
  CHECK_FALSE(w.has_grad());

  // zero grad + zero weight decay leaves the parameter unchanged
  Tensor w2 = Tensor::from_data({1}, {0.7}, true);
  AdamW opt2({w2}, {.learning_rate = 0.1, .weight_decay = 0.0});
  Tensor l2 = mul(sub(w2, w2), w2);  // identically zero
  l2.backward();
  opt2.step();
  CHECK(w2.data()[0] == doctest::Approx(0.7).epsilon(1e-15));

  // 100 steps on a quadratic bowl converge near zero
  Tensor w3 = Tensor::from_data({1}, {1.0}, true);
  AdamW opt3({w3}, {.learning_rate = 0.05, .weight_decay = 0.0});
  for (int i = 0; i < 100; ++i) {
    Tensor l = mul(w3, w3);
    l.backward();
    opt3.step();
  }
  CHECK(std::fabs(w3.data()[0]) < 1e-2);
}

TEST_CASE("adamw rejects missing grads") {
  Tensor w = Tensor::from_data({2}, {1.0, 2.0}, true);
  AdamW opt({w});
  CHECK_THROWS_AS(opt.step(), std::runtime_error);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(42);
  ParamMap params;
  params["net.w1"] = random_tensor({3, 4}, rng);
  params["net.b1"] = random_tensor({4}, rng);
  params["head.w"] = random_tensor({2, 2, 3, 3}, rng);
  auto path = std::filesystem::temp_directory_path() / "semocc_ckpt_test.bin";
  save_checkpoint(path.string(), params);
  ParamMap loaded = load_checkpoint(path.string());
  REQUIRE(loaded.size() == params.size());
  for (const auto& [name, t] : params) {
    REQUIRE(loaded.count(name) == 1);
    CHECK(loaded.at(name).shape() == t.shape());
    CHECK(loaded.at(name).data() == t.data());
  }
  std::filesystem::remove(path);
}
