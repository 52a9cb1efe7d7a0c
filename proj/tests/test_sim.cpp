#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "psnoma/sim.hpp"

using namespace psnoma;

namespace {

// Two-user scenario whose PMFs quantize exactly at the chosen frame
// sizes, with spacings solving the power equality.
struct Fixture {
  NomaScenario scn;
  SimConfig cfg;

  explicit Fixture(double sigma, int frame_symbols = 96)
      : scn({1.0, 1.0}, {2.0, 1.0}, sigma, 4) {
    cfg.frame_symbols = frame_symbols;
    SimUser u1, u2;
    u1.pmf = {0.5, 0.25, 0.125, 0.125};  // mean index 1.875
    u1.r_fec = 0.5;
    u1.delta = 2.0 / (0.5 * 1.875 + 0.5 * 2.5);
    u2.pmf = {0.25, 0.25, 0.25, 0.25};
    u2.r_fec = 0.5;
    u2.delta = 1.0 / 2.5;  // uniform power equality
    cfg.users = {u1, u2};
    cfg.seed = 99;
    cfg.min_frame_errors = 5;
    cfg.max_frames = 40;
  }
};

}  // namespace

TEST_CASE("transmit") {
  SECTION("noiseless single user passes through") {
    NomaScenario scn({2.0}, {1.0}, 0.0, 4);
    SdtFrame f;
    f.samples = {0.5, 1.0, 1.5};  // x = alpha * s with alpha = 1/2
    f.n_p = 3;
    std::mt19937_64 rng(1);
    auto y = transmit(scn, {f}, rng);
    CHECK(y == std::vector<double>{1.0, 2.0, 3.0});  // h * x = s
  }
  SECTION("noiseless superposition is elementwise") {
    NomaScenario scn({1.0, 1.0}, {2.0, 1.0}, 0.0, 4);
    SdtFrame a, b;
    a.samples = {1.0, 2.0};
    b.samples = {0.5, 0.25};
    std::mt19937_64 rng(1);
    auto y = transmit(scn, {a, b}, rng);
    CHECK(y[0] == Catch::Approx(1.5));
    CHECK(y[1] == Catch::Approx(2.25));
  }
  SECTION("empirical mean matches the power targets") {
    Fixture fx(0.05, 96);
    std::vector<detail::UserCodec> codecs;
    for (int j = 1; j <= 2; ++j)
      codecs.push_back(detail::make_codec(fx.scn, j, fx.cfg.users[j - 1], fx.cfg));
    // compositions quantize exactly, so E[y_t] = P_r1 + P_r2 exactly
    for (int j = 0; j < 2; ++j) {
      double frame_power = 0.0;
      Pmf p = fx.cfg.users[j].pmf;
      for (int i = 0; i < 4; ++i)
        CHECK(codecs[j].comp.counts[i] == int(std::lround(p[i] * codecs[j].layout.n_p)));
    }
    std::mt19937_64 rng(7);
    double acc = 0.0;
    long count = 0;
    double acc2 = 0.0;
    for (int f = 0; f < 400; ++f) {
      std::vector<SdtFrame> tx;
      std::vector<std::uint8_t> bits;
      for (int j = 0; j < 2; ++j) {
        std::vector<std::uint8_t> info(codecs[j].info_bits());
        for (auto& b : info) b = rng() & 1u;
        tx.push_back(encode_user_frame(info, codecs[j]));
      }
      auto y = transmit(fx.scn, tx, rng);
      for (double v : y) {
        acc += v;
        acc2 += v * v;
        ++count;
      }
    }
    double mean = acc / count;
    double var = acc2 / count - mean * mean;
    double se = std::sqrt(var / count);
    CHECK(mean == Catch::Approx(3.0).margin(3 * se + 1e-12));
  }
}

TEST_CASE("sic cancel") {
  NomaScenario scn({1.0, 1.0}, {2.0, 1.0}, 0.0, 4);
  SECTION("first user cancels nothing") {
    std::vector<double> y{1.0, 2.0, 3.0};
    auto yhat = sic_cancel(y, {}, scn);
    CHECK(yhat == y);
  }
  SECTION("exact subtraction") {
    SdtFrame f;
    f.samples = {0.5, 1.5};
    auto yhat = sic_cancel({2.0, 2.0}, {f}, scn);
    CHECK(yhat[0] == Catch::Approx(1.5));
    CHECK(yhat[1] == Catch::Approx(0.5));
  }
  SECTION("an erroneous cancelled frame leaves residual energy") {
    Fixture fx(0.0);
    auto codec = detail::make_codec(fx.scn, 1, fx.cfg.users[0], fx.cfg);
    std::mt19937_64 rng(3);
    std::vector<std::uint8_t> info(codec.info_bits());
    for (auto& b : info) b = rng() & 1u;
    SdtFrame good = encode_user_frame(info, codec);
    auto bad_info = info;
    bad_info[0] ^= 1;
    SdtFrame bad = encode_user_frame(bad_info, codec);
    auto zero = sic_cancel(good.samples, {good}, fx.scn);
    auto residual = sic_cancel(good.samples, {bad}, fx.scn);
    double e0 = 0.0, e1 = 0.0;
    for (double v : zero) e0 += v * v;
    for (double v : residual) e1 += v * v;
    CHECK(e0 == 0.0);
    CHECK(e1 > 0.0);
  }
}

TEST_CASE("receive user round trip without channel") {
  Fixture fx(0.0);
  auto codec = detail::make_codec(fx.scn, 2, fx.cfg.users[1], fx.cfg);
  InterferenceProfile none;
  MapLlrComputer llrc(codec.levels, 0.0, none, 1.0);
  std::mt19937_64 rng(11);
  for (int t = 0; t < 5; ++t) {
    std::vector<std::uint8_t> info(codec.info_bits());
    for (auto& b : info) b = rng() & 1u;
    SdtFrame x = encode_user_frame(info, codec);
    // user 2: yhat = h x = s (alpha = 1/h)
    std::vector<double> yhat(x.samples.size());
    for (std::size_t i = 0; i < yhat.size(); ++i)
      yhat[i] = fx.scn.gain(2) * x.samples[i];
    auto res = receive_user(yhat, codec, llrc, info, 50);
    CHECK(res.frame_ok);
    CHECK(res.decode_valid);
    CHECK(res.info == info);
    for (std::size_t i = 0; i < yhat.size(); ++i)
      CHECK(res.reencoded.samples[i] == Catch::Approx(x.samples[i]).margin(1e-12));
  }
}

TEST_CASE("fer monte carlo") {
  SECTION("zero noise decodes everything and cancels exactly") {
    Fixture fx(0.0);
    fx.cfg.max_frames = 10;
    auto reports = fer_monte_carlo(fx.scn, fx.cfg);
    REQUIRE(reports.size() == 2);
    for (const auto& r : reports) {
      CHECK(r.errors == 0);
      CHECK(r.fer == 0.0);
      CHECK(r.frames == 10);
    }
  }
  SECTION("seeded runs reproduce identical counts") {
    Fixture fx(0.35);
    fx.cfg.max_frames = 25;
    fx.cfg.min_frame_errors = 100000;  // run exactly max_frames
    auto a = fer_monte_carlo(fx.scn, fx.cfg);
    auto b = fer_monte_carlo(fx.scn, fx.cfg);
    for (int j = 0; j < 2; ++j) {
      CHECK(a[j].errors == b[j].errors);
      CHECK(a[j].frames == b[j].frames);
    }
    fx.cfg.seed = 100;
    auto c = fer_monte_carlo(fx.scn, fx.cfg);
    bool any_diff = c[0].errors != a[0].errors || c[1].errors != a[1].errors;
    INFO("different seeds should explore different noise");
    CHECK(a[0].frames == c[0].frames);
    (void)any_diff;  // may coincide at tiny sample sizes
  }
  SECTION("interval contains the estimate") {
    Fixture fx(0.5);
    fx.cfg.max_frames = 30;
    fx.cfg.min_frame_errors = 3;
    auto reports = fer_monte_carlo(fx.scn, fx.cfg);
    for (const auto& r : reports) {
      CHECK(r.ci_lo <= r.fer + 1e-12);
      CHECK(r.fer <= r.ci_hi + 1e-12);
      CHECK(r.errors <= r.frames);
    }
  }
  SECTION("genie SIC never does worse on the later user") {
    Fixture fx(0.42);
    fx.cfg.max_frames = 60;
    fx.cfg.min_frame_errors = 100000;
    auto real = fer_monte_carlo(fx.scn, fx.cfg);
    fx.cfg.genie_sic = true;
    auto genie = fer_monte_carlo(fx.scn, fx.cfg);
    CHECK(genie[1].errors <= real[1].errors);
  }
}
