#include <cmath>

#include "cmsep/optim.hpp"
#include "doctest.h"

using namespace cmsep;

TEST_CASE("zero gradient leaves parameters unchanged") {
  std::vector<double> p{1.0, -2.0, 3.0}, g(3, 0.0);
  optim::AdamMoments<double> m;
  for (int s = 1; s <= 5; ++s) optim::adam_update<double>(p, g, m, s, {});
  CHECK(p == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("first step moves by lr against the gradient sign") {
  std::vector<double> p{0.0, 0.0, 0.0}, g{3.0, -0.01, 1e4};
  optim::AdamMoments<double> m;
  optim::AdamConfig c;
  c.lr = 0.01;
  optim::adam_update<double>(p, g, m, 1, c);
  CHECK(p[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(0.01).epsilon(1e-4));
  CHECK(p[2] == doctest::Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("matches a hand-rolled update over several steps") {
  std::vector<double> p{0.5}, m1{0}, m2{0};
  optim::AdamMoments<double> mom;
  const optim::AdamConfig c{0.1, 0.9, 0.999, 1e-8};
  double ref = 0.5;
  for (int s = 1; s <= 10; ++s) {
    const double g = 2.0 * ref + std::sin(s);
    m1[0] = 0.9 * m1[0] + 0.1 * g;
    m2[0] = 0.999 * m2[0] + 0.001 * g * g;
    const double mh = m1[0] / (1 - std::pow(0.9, s)), vh = m2[0] / (1 - std::pow(0.999, s));
    ref -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    std::vector<double> gv{2.0 * p[0] + std::sin(s)};
    optim::adam_update<double>(p, gv, mom, s, c);
  }
  CHECK(p[0] == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("minimises a quadratic") {
  auto p = ag::Tensor<double>::from({1}, {0.0}, true);
  optim::Adam<double> opt({p}, {0.1});
  for (int i = 0; i < 200; ++i) {
    opt.zero_grad();
    auto d = ag::sub(p, ag::Tensor<double>::scalar(3.0));
    ag::sum(ag::mul(d, d)).backward();
    opt.step();
  }
  CHECK(std::abs(p.values()[0] - 3.0) < 0.05);
  CHECK(opt.steps_taken() == 200);
}

TEST_CASE("default learning rate and size checks") {
  CHECK(optim::AdamConfig{}.lr == 5e-5);
  std::vector<float> p(3), g(2);
  optim::AdamMoments<float> m;
  CHECK_THROWS_AS(optim::adam_update<float>(p, g, m, 1, {}), std::invalid_argument);
}
