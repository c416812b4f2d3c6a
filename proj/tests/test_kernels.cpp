#include <random>
#include <vector>

#include "cmsep/kernels.hpp"
#include "doctest.h"

using namespace cmsep::kernels;

namespace {

std::vector<double> rnd(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

void close(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12).scale(1.0));
}

}  // namespace

TEST_CASE("geometry") {
  auto g = conv_geometry(1, 1, 5, 5, 3, 1, Padding::Same);
  CHECK(g.out_h == 5);
  CHECK(g.pad_top == 1);
  g = conv_geometry(1, 1, 6, 6, 4, 1, Padding::Same);  // total pad 3: (1, 2)
  CHECK(g.pad_top == 1);
  CHECK(g.out_w == 6);
  g = conv_geometry(1, 1, 7, 9, 3, 2, Padding::Same);
  CHECK(g.out_h == 4);
  CHECK(g.out_w == 5);
  g = conv_geometry(1, 1, 7, 9, 3, 1, Padding::Valid);
  CHECK(g.out_h == 5);
  CHECK(g.out_w == 7);
  g = conv_geometry(1, 1, 7, 9, 3, 2, Padding::Valid);
  CHECK(g.out_h == 3);
  CHECK(g.out_w == 4);
  CHECK_THROWS(conv_geometry(1, 1, 2, 5, 3, 1, Padding::Valid));
}

TEST_CASE("all-ones kernel on a constant field") {
  const auto g = conv_geometry(1, 1, 5, 5, 3, 1, Padding::Same);
  std::vector<double> in(25, 1.0), w(9, 1.0), out(25);
  serial::conv2d_forward<double>(g, in.data(), w.data(), nullptr, out.data());
  CHECK(out[0] == 4.0);
  CHECK(out[2] == 6.0);
  CHECK(out[12] == 9.0);
  std::vector<double> out2(25);
  parallel::conv2d_forward<double>(g, in.data(), w.data(), nullptr, out2.data());
  CHECK(out2 == out);
}

TEST_CASE("1x1 identity kernel") {
  const auto g = conv_geometry(1, 1, 4, 6, 1, 1, Padding::Same);
  const auto in = rnd(24, 1);
  std::vector<double> w{1.0}, out(24);
  parallel::conv2d_forward<double>(g, in.data(), w.data(), nullptr, out.data());
  CHECK(out == in);
}

TEST_CASE("parallel conv kernels agree with the serial reference") {
  struct Case { std::size_t cin, cout, h, w, k, stride; Padding pad; };
  const Case cases[] = {{2, 3, 6, 6, 3, 1, Padding::Same}, {3, 2, 7, 5, 3, 1, Padding::Valid},
                        {1, 4, 9, 8, 3, 2, Padding::Same}, {4, 4, 5, 5, 1, 1, Padding::Same},
                        {2, 2, 8, 7, 4, 1, Padding::Same}, {3, 1, 9, 9, 3, 2, Padding::Valid},
                        {5, 3, 4, 16, 3, 1, Padding::Same}};
  std::uint64_t seed = 10;
  for (const auto& c : cases) {
    const auto g = conv_geometry(c.cin, c.cout, c.h, c.w, c.k, c.stride, c.pad);
    const std::size_t nin = c.cin * c.h * c.w, nw = c.cout * c.cin * c.k * c.k,
                      nout = c.cout * g.out_h * g.out_w;
    const auto in = rnd(nin, ++seed), w = rnd(nw, ++seed), b = rnd(c.cout, ++seed),
               go = rnd(nout, ++seed);

    std::vector<double> o1(nout), o2(nout);
    serial::conv2d_forward(g, in.data(), w.data(), b.data(), o1.data());
    parallel::conv2d_forward(g, in.data(), w.data(), b.data(), o2.data());
    close(o1, o2);

    // Backward kernels accumulate, so start from a nonzero buffer.
    auto gi1 = rnd(nin, ++seed), gi2 = gi1;
    serial::conv2d_backward_input(g, go.data(), w.data(), gi1.data());
    parallel::conv2d_backward_input(g, go.data(), w.data(), gi2.data());
    close(gi1, gi2);

    auto gw1 = rnd(nw, ++seed), gw2 = gw1;
    auto gb1 = rnd(c.cout, ++seed), gb2 = gb1;
    serial::conv2d_backward_weights(g, in.data(), go.data(), gw1.data(), gb1.data());
    parallel::conv2d_backward_weights(g, in.data(), go.data(), gw2.data(), gb2.data());
    close(gw1, gw2);
    close(gb1, gb2);
  }
}

TEST_CASE("backward kernels are the adjoint of forward") {
  // <conv(x), y> == <x, conv^T(y)> for the input gradient.
  const auto g = conv_geometry(3, 2, 7, 6, 3, 2, Padding::Same);
  const auto x = rnd(3 * 7 * 6, 1), w = rnd(2 * 3 * 9, 2), y = rnd(2 * g.out_h * g.out_w, 3);
  std::vector<double> cx(y.size()), cty(x.size(), 0.0);
  serial::conv2d_forward<double>(g, x.data(), w.data(), nullptr, cx.data());
  serial::conv2d_backward_input<double>(g, y.data(), w.data(), cty.data());
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += cx[i] * y[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * cty[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("gemm variants agree") {
  const std::size_t m = 5, n = 7, k = 4;
  const auto a = rnd(m * k, 1), b = rnd(k * n, 2);
  for (bool ta : {false, true})
    for (bool tb : {false, true})
      for (bool acc : {false, true}) {
        // Transposed storage holds the same logical matrices.
        std::vector<double> as(m * k), bs(k * n);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) as[ta ? p * m + i : i * k + p] = a[i * k + p];
        for (std::size_t p = 0; p < k; ++p)
          for (std::size_t j = 0; j < n; ++j) bs[tb ? j * k + p : p * n + j] = b[p * n + j];
        std::vector<double> c1(m * n, 0.5), c2(m * n, 0.5);
        serial::gemm(ta, tb, m, n, k, as.data(), bs.data(), c1.data(), acc);
        parallel::gemm(ta, tb, m, n, k, as.data(), bs.data(), c2.data(), acc);
        close(c1, c2);
        // Direct check of one entry.
        double e = acc ? 0.5 : 0.0;
        for (std::size_t p = 0; p < k; ++p) e += a[2 * k + p] * b[p * n + 3];
        CHECK(c1[2 * n + 3] == doctest::Approx(e));
      }
}

TEST_CASE("parallel kernels are deterministic") {
  const auto g = conv_geometry(8, 8, 32, 32, 3, 1, Padding::Same);
  const auto x = rnd(8 * 32 * 32, 1);
  std::vector<float> xf(x.begin(), x.end());
  const auto w = rnd(8 * 8 * 9, 2);
  std::vector<float> wf(w.begin(), w.end());
  std::vector<float> o1(8 * 32 * 32), o2(8 * 32 * 32);
  parallel::conv2d_forward<float>(g, xf.data(), wf.data(), nullptr, o1.data());
  parallel::conv2d_forward<float>(g, xf.data(), wf.data(), nullptr, o2.data());
  CHECK(o1 == o2);
}
