#include <cmath>

#include "cmsep/separate.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cmsep;

namespace {

model::ModelConfig small_config(int window) {
  model::ModelConfig c;
  c.num_down = c.num_up = 2;
  c.num_dense_blocks = 5;
  c.layers_per_block = 2;
  c.freq_bins = window / 2 + 1;
  return c;
}

}  // namespace

TEST_CASE("chunk plan") {
  const SeparationOptions opt;  // 20 s, 3/4 overlap
  auto p = plan_chunks(60 * 100, 100, opt);
  CHECK(p.chunk_len == 2000);
  CHECK(p.hop == 500);
  CHECK(p.count == 9);  // starts 0, 5, ..., 40 s
  CHECK((p.count - 1) * p.hop + p.chunk_len == 6000);
  CHECK(plan_chunks(61 * 100, 100, opt).count == 10);  // last chunk padded past the end
  CHECK(plan_chunks(3 * 100, 100, opt).count == 1);
  CHECK(plan_chunks(20 * 100, 100, opt).count == 1);
  CHECK_THROWS(plan_chunks(100, 100, {0.0, 0.5}));
  CHECK_THROWS(plan_chunks(100, 100, {1.0, 1.0}));
}

TEST_CASE("cross-fade weights are positive and symmetric") {
  for (std::size_t n = 0; n < 100; ++n) {
    CHECK(crossfade_weight(n, 100) > 0.0);
    CHECK(crossfade_weight(n, 100) == doctest::Approx(crossfade_weight(99 - n, 100)));
  }
}

TEST_CASE("identity separator reconstructs the input") {
  const StftParams p{64, 16, 1000};
  for (double seconds : {0.3, 2.0, 7.3}) {
    const auto w = testing::noise(static_cast<std::size_t>(seconds * 1000), 1000, 4);
    const auto [v, a] = separate_song(w, IdentitySeparator(p), {2.0, 0.75});
    REQUIRE(v.size() == w.size());
    CHECK(a.size() == w.size());
    CHECK(testing::rel_l2(w.samples, v.samples) < 1e-5);
    CHECK(testing::rel_l2(w.samples, a.samples) < 1e-5);
  }
}

TEST_CASE("model separator") {
  const StftParams p{64, 16, 2000};
  ModelSeparator sep(small_config(64), p, Target::CirmCs, 3);

  SUBCASE("silence in, silence out") {
    const Waveform silent{std::vector<float>(5000, 0.0f), 2000};
    const auto [v, a] = separate_song(silent, sep, {1.0, 0.75});
    for (float x : v.samples) CHECK(x == 0.0f);
    for (float x : a.samples) CHECK(x == 0.0f);
  }
  SUBCASE("outputs are finite, bounded and length-preserving") {
    const auto w = testing::toy_mix(0, 1.7, 2000).mixture;
    for (auto target : {Target::CirmCs, Target::Tcs, Target::Tms}) {
      ModelSeparator s(small_config(64), p, target, 5);
      const auto [v, a] = separate_song(w, s, {0.5, 0.75});
      CHECK(v.size() == w.size());
      CHECK(a.size() == w.size());
      for (float x : v.samples) CHECK(std::isfinite(x));
      for (float x : a.samples) CHECK(std::abs(x) < 1e3);
    }
  }
  SUBCASE("checkpoint round trip") {
    testing::TempDir dir;
    sep.save(dir / "m.ckpt");
    const auto loaded = ModelSeparator::load(dir / "m.ckpt");
    CHECK(loaded->stft_params() == p);
    CHECK(loaded->target() == Target::CirmCs);
    CHECK(loaded->net().config() == sep.net().config());
    const auto w = testing::toy_mix(1, 0.6, 2000).mixture;
    const auto [v1, a1] = separate_song(w, sep, {0.6, 0.75});
    const auto [v2, a2] = separate_song(w, *loaded, {0.6, 0.75});
    CHECK(v1.samples == v2.samples);
    CHECK(a1.samples == a2.samples);

    Checkpoint not_a_model;
    save_checkpoint(not_a_model, dir / "x.ckpt");
    CHECK_THROWS(ModelSeparator::load(dir / "x.ckpt"));
  }
  SUBCASE("errors") {
    CHECK_THROWS(separate_song(testing::noise(100, 8000, 1), sep));
    CHECK_THROWS(ModelSeparator(small_config(128), p, Target::CirmCs, 1));
    CHECK_THROWS(sep.separate(dsp::stft(testing::noise(500, 2000, 1), StftParams{32, 8, 2000})));
  }
}

TEST_CASE("target names") {
  for (auto t : {Target::Tms, Target::Tcs, Target::CirmCs}) CHECK(parse_target(to_string(t)) == t);
  CHECK(parse_target("cIRM-CS") == Target::CirmCs);
  CHECK_THROWS(parse_target("ibm"));
}
