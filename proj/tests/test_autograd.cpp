#include <cmath>

#include "cmsep/autograd.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cmsep;
using testing::DTensor;
using testing::gradcheck;
using testing::random_tensor;

namespace {

// Weighted sum so every output element gets a distinct upstream gradient.
DTensor probe(const DTensor& y, std::uint64_t seed = 99) {
  auto w = random_tensor(y.shape(), seed, -1.0, 1.0, false);
  return ag::sum(ag::mul(y, w));
}

constexpr double kTol = 1e-6;

}  // namespace

TEST_CASE("gradients match finite differences") {
  using V = std::vector<DTensor>;
  SUBCASE("add sub mul scale") {
    V in{random_tensor({3, 4}, 1), random_tensor({3, 4}, 2)};
    CHECK(gradcheck([](const V& v) { return probe(ag::add(v[0], v[1])); }, in) < kTol);
    CHECK(gradcheck([](const V& v) { return probe(ag::sub(v[0], v[1])); }, in) < kTol);
    CHECK(gradcheck([](const V& v) { return probe(ag::mul(v[0], v[1])); }, in) < kTol);
    CHECK(gradcheck([](const V& v) { return probe(ag::scale(v[0], -2.5)); }, in) < kTol);
  }
  SUBCASE("abs away from the kink") {
    auto a = random_tensor({10}, 3, 0.1, 1.0);
    auto vals = a.mutable_values();
    for (std::size_t i = 0; i < vals.size(); i += 2) vals[i] = -vals[i];
    CHECK(gradcheck([](const V& v) { return probe(ag::abs(v[0])); }, {a}) < kTol);
  }
  SUBCASE("elu on both sides") {
    CHECK(gradcheck([](const V& v) { return probe(ag::elu(v[0])); }, {random_tensor({20}, 4, -2, 2)}) < kTol);
  }
  SUBCASE("sum and mean") {
    CHECK(gradcheck([](const V& v) { return ag::mean(ag::mul(v[0], v[0])); }, {random_tensor({2, 5}, 5)}) < kTol);
  }
  SUBCASE("conv2d") {
    for (auto pad : {kernels::Padding::Same, kernels::Padding::Valid})
      for (std::size_t stride : {1u, 2u}) {
        V in{random_tensor({2, 6, 7}, 6), random_tensor({3, 2, 3, 3}, 7), random_tensor({3}, 8)};
        CHECK(gradcheck([&](const V& v) { return probe(ag::conv2d(v[0], v[1], v[2], stride, pad)); }, in) < kTol);
      }
    V in{random_tensor({3, 4, 4}, 9), random_tensor({2, 3, 1, 1}, 10), random_tensor({2}, 11)};
    CHECK(gradcheck([](const V& v) { return probe(ag::conv2d(v[0], v[1], v[2], 1, kernels::Padding::Same)); }, in) < kTol);
  }
  SUBCASE("concat on each axis") {
    for (std::size_t axis : {0u, 1u, 2u}) {
      ag::Shape s1{2, 3, 4}, s2{2, 3, 4};
      s2[axis] = 5;
      V in{random_tensor(s1, 12), random_tensor(s2, 13)};
      CHECK(gradcheck([&](const V& v) { return probe(ag::concat<double>({v[0], v[1]}, axis)); }, in) < kTol);
    }
  }
  SUBCASE("matmul transpose reshape") {
    V in{random_tensor({3, 4}, 14), random_tensor({4, 5}, 15)};
    CHECK(gradcheck([](const V& v) { return probe(ag::matmul(v[0], v[1])); }, in) < kTol);
    CHECK(gradcheck([](const V& v) { return probe(ag::transpose(v[0])); }, in) < kTol);
    CHECK(gradcheck([](const V& v) { return probe(ag::reshape(v[0], {2, 6})); }, in) < kTol);
  }
  SUBCASE("softmax") {
    for (std::size_t axis : {0u, 1u})
      CHECK(gradcheck([&](const V& v) { return probe(ag::softmax(v[0], axis)); }, {random_tensor({4, 6}, 16, -3, 3)}) < kTol);
  }
  SUBCASE("spatial helpers") {
    V in{random_tensor({2, 4, 6}, 17)};
    CHECK(gradcheck([](const V& v) { return probe(ag::pad2d(v[0], 1, 2, 0, 3)); }, in) < kTol);
    CHECK(gradcheck([](const V& v) { return probe(ag::crop2d(v[0], 1, 2, 2, 3)); }, in) < kTol);
    CHECK(gradcheck([](const V& v) { return probe(ag::avg_pool2(v[0])); }, in) < kTol);
    CHECK(gradcheck([](const V& v) { return probe(ag::upsample_nearest2(v[0])); }, in) < kTol);
  }
}

TEST_CASE("forward values") {
  const auto x = DTensor::from({3}, {-1.0, 0.0, 2.0});
  const auto e = ag::elu(x);
  CHECK(e.values()[0] == doctest::Approx(std::exp(-1.0) - 1.0));
  CHECK(e.values()[1] == 0.0);
  CHECK(e.values()[2] == 2.0);

  const auto s = ag::softmax(DTensor::from({1, 3}, {1000.0, 1000.0, 1000.0}), 1);
  for (double v : s.values()) CHECK(v == doctest::Approx(1.0 / 3.0));
  const auto s2 = ag::softmax(DTensor::from({2, 2}, {0.0, std::log(3.0), 5.0, 5.0}), 1);
  CHECK(s2.values()[0] == doctest::Approx(0.25));
  CHECK(s2.values()[1] == doctest::Approx(0.75));
  CHECK(s2.values()[2] == doctest::Approx(0.5));

  const auto up = ag::upsample_nearest2(DTensor::from({1, 1, 2}, {1.0, 2.0}));
  CHECK(up.shape() == ag::Shape{1, 2, 4});
  CHECK(std::vector<double>(up.values().begin(), up.values().end()) ==
        std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2});
  const auto pooled = ag::avg_pool2(DTensor::from({1, 2, 2}, {1.0, 2.0, 3.0, 6.0}));
  CHECK(pooled.values()[0] == 3.0);

  const auto mm = ag::matmul(DTensor::from({1, 2}, {1.0, 2.0}), DTensor::from({2, 1}, {3.0, 4.0}));
  CHECK(mm.item() == 11.0);
}

TEST_CASE("backward basics") {
  SUBCASE("sum of x gives ones") {
    auto x = random_tensor({2, 3}, 1);
    ag::sum(x).backward();
    for (double g : x.grad()) CHECK(g == 1.0);
  }
  SUBCASE("x squared gives 2x") {
    auto x = random_tensor({5}, 2);
    ag::sum(ag::mul(x, x)).backward();
    for (std::size_t i = 0; i < 5; ++i) CHECK(x.grad()[i] == doctest::Approx(2.0 * x.values()[i]));
  }
  SUBCASE("shared subexpression accumulates") {
    auto x = DTensor::from({1}, {3.0}, true);
    auto y = ag::add(ag::mul(x, x), x);  // x^2 + x
    y.backward();
    CHECK(x.grad()[0] == doctest::Approx(7.0));
  }
  SUBCASE("grads accumulate until zero_grad") {
    auto x = DTensor::from({2}, {1.0, -1.0}, true);
    ag::sum(ag::scale(x, 3.0)).backward();
    ag::sum(ag::scale(x, 3.0)).backward();
    CHECK(x.grad()[0] == 6.0);
    x.zero_grad();
    CHECK(x.grad()[0] == 0.0);
  }
  SUBCASE("non-scalar backward is rejected") {
    auto x = random_tensor({3}, 3);
    CHECK_THROWS_AS(ag::scale(x, 2.0).backward(), std::invalid_argument);
  }
  SUBCASE("constants get no grad") {
    auto c = random_tensor({3}, 4, -1, 1, false);
    auto x = random_tensor({3}, 5);
    ag::sum(ag::mul(c, x)).backward();
    CHECK_FALSE(c.has_grad());
  }
  SUBCASE("detach cuts history") {
    auto x = random_tensor({3}, 6);
    auto d = ag::scale(x, 2.0).detach();
    CHECK_FALSE(d.requires_grad());
  }
}

TEST_CASE("shape errors") {
  auto a = random_tensor({2, 3}, 1), b = random_tensor({3, 2}, 2);
  CHECK_THROWS(ag::add(a, b));
  CHECK_THROWS(ag::matmul(a, a));
  CHECK_THROWS(ag::reshape(a, {5}));
  CHECK_THROWS(ag::avg_pool2(random_tensor({1, 3, 4}, 3)));
  CHECK_THROWS(ag::concat<double>({a, b}, 0));
  CHECK_THROWS(ag::crop2d(random_tensor({1, 3, 4}, 3), 2, 0, 2, 1));
}

TEST_CASE("float and double agree") {
  auto xd = random_tensor({2, 5, 5}, 1, -1, 1, false), wd = random_tensor({3, 2, 3, 3}, 2, -1, 1, false);
  std::vector<float> xv(xd.values().begin(), xd.values().end()), wv(wd.values().begin(), wd.values().end());
  auto xf = ag::Tensor<float>::from({2, 5, 5}, xv), wf = ag::Tensor<float>::from({3, 2, 3, 3}, wv);
  const auto yd = ag::elu(ag::conv2d(xd, wd, DTensor(), 1, kernels::Padding::Same));
  const auto yf = ag::elu(ag::conv2d(xf, wf, ag::Tensor<float>(), 1, kernels::Padding::Same));
  for (std::size_t i = 0; i < yd.numel(); ++i) CHECK(yf.values()[i] == doctest::Approx(yd.values()[i]).epsilon(1e-5));
}
