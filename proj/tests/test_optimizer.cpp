#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "psnoma/optimizer.hpp"

using namespace psnoma;

namespace {

QuadratureSpec quad48 = QuadratureSpec::gauss_hermite(48);

UserChannel single_user(int m, double osnr_db, double p_r = 1.0) {
  UserChannel ch;
  ch.m = m;
  ch.p_r = p_r;
  ch.sigma = p_r / db_to_linear(osnr_db);
  return ch;
}

/// Surrogate objective around the reference PMF p_hat.
double phi_surrogate(double delta, const Pmf& p, const Pmf& p_hat, double r_fec,
                     const UserChannel& ch, const QuadratureSpec& quad) {
  auto w = w_vector(delta, p_hat, ch.sigma, ch.intf, quad, ch.coeff);
  double g2p = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) g2p += p[i] * w[i];
  double r_u = mutual_information(delta, uniform_pmf(int(p.size())), ch.sigma,
                                  ch.intf, quad, ch.coeff);
  return r_fec * (entropy_bits(p) - g2p) + (1.0 - r_fec) * r_u;
}

Pmf random_pmf(int m, std::mt19937_64& rng) {
  std::exponential_distribution<double> ex(1.0);
  Pmf p(m);
  double s = 0;
  for (double& x : p) {
    x = ex(rng);
    s += x;
  }
  for (double& x : p) x /= s;
  return p;
}

}  // namespace

TEST_CASE("spacing bounds") {
  SECTION("R_FEC = 1 reduces to [P/M, P]") {
    auto b = SpacingBounds::from_power(2.0, 1.0, 8);
    CHECK(b.delta_min == Catch::Approx(0.25).epsilon(1e-14));
    CHECK(b.delta_max == Catch::Approx(2.0).epsilon(1e-14));
  }
  SECTION("stated formulas") {
    auto b = SpacingBounds::from_power(1.0, 0.6, 8);
    CHECK(b.delta_min == Catch::Approx(1.0 / (0.6 * 8 + 0.4 * 4.5)).epsilon(1e-14));
    CHECK(b.delta_max == Catch::Approx(1.0 / (0.6 + 0.4 * 4.5)).epsilon(1e-14));
  }
}

TEST_CASE("golden section") {
  SECTION("quadratic test function") {
    for (double m : {0.31, 0.5, 0.87}) {
      auto f = [&](double x) { return -(x - m) * (x - m); };
      auto res = golden_section_max(f, 0.0, 1.0, 1e-6);
      CHECK(res.x == Catch::Approx(m).margin(1e-5));
    }
  }
  SECTION("monotone objective ends at the boundary") {
    auto res = golden_section_max([](double x) { return x; }, 0.0, 2.0, 1e-8);
    CHECK(res.value == Catch::Approx(2.0).margin(1e-6));
  }
  SECTION("degenerate bracket returns the lower edge") {
    auto res = golden_section_max([](double x) { return -x; }, 1.0, 1.0, 1e-6);
    CHECK(res.x == 1.0);
  }
  SECTION("spacing search at fixed uniform PMF matches a dense scan") {
    UserChannel ch = single_user(8, 6.0);
    auto b = SpacingBounds::from_power(ch.p_r, 1.0, 8);
    auto res = golden_section_delta(uniform_pmf(8), 1.0, b, ch, quad48, 1e-5);
    double best = -1.0, best_x = 0.0;
    for (int k = 0; k <= 1000; ++k) {
      double d = b.delta_min + (b.delta_max - b.delta_min) * k / 1000.0;
      double v = sdt_rate(d, uniform_pmf(8), {1.0, 0.0}, ch.sigma, ch.intf,
                          quad48, ch.coeff);
      if (v > best) {
        best = v;
        best_x = d;
      }
    }
    CHECK(res.x == Catch::Approx(best_x).margin((b.delta_max - b.delta_min) / 1000.0));
    CHECK(res.value >= best - 1e-9);
  }
}

TEST_CASE("kkt step basics") {
  UserChannel ch = single_user(8, 30.0);  // high OSNR: rate constraint slack

  SECTION("uniform power point gives the uniform PMF") {
    double delta = 2.0 * ch.p_r / 9.0;  // mu* = (M+1)/2 at any R_FEC
    Pmf p = kkt_pmf(delta, 0.5, uniform_pmf(8), ch, 0.05, quad48);
    for (double x : p) CHECK(x == Catch::Approx(1.0 / 8).margin(1e-9));
  }
  SECTION("slack branch output is log-linear in the index") {
    double delta = 0.8 * 2.0 * ch.p_r / 9.0;
    Pmf p = kkt_pmf(delta, 0.5, uniform_pmf(8), ch, 0.05, quad48);
    double step0 = std::log2(p[1]) - std::log2(p[0]);
    for (int i = 1; i + 1 < 8; ++i)
      CHECK(std::log2(p[i + 1]) - std::log2(p[i]) == Catch::Approx(step0).margin(1e-7));
    CHECK(mean_index(p) ==
          Catch::Approx(target_mean_index(delta, 0.5, ch.p_r, 8)).margin(1e-9));
  }
}

TEST_CASE("kkt pmf matches the constrained grid oracle at fixed spacing") {
  // M=4, N=1, OSNR 4 dB, R_FEC = 1/2, mid-range spacing. The oracle
  // enumerates the feasible polytope exactly: (p2, p3) on a 0.005 grid,
  // (p1, p4) solved from the two equality constraints.
  const double r_fec = 0.5, r_bf = 0.05;
  UserChannel ch = single_user(4, 4.0);
  SpacingBounds b = SpacingBounds::from_power(ch.p_r, r_fec, 4);
  double delta = 0.5 * (b.delta_min + b.delta_max);
  double mu = target_mean_index(delta, r_fec, ch.p_r, 4);

  struct Cand {
    double t;
    Pmf p;
  };
  std::vector<Cand> cands;
  const int g = 200;
  for (int i2 = 0; i2 <= g; ++i2) {
    for (int i3 = 0; i3 + i2 <= g; ++i3) {
      double p2 = i2 / double(g), p3 = i3 / double(g);
      double s = 1.0 - p2 - p3;
      double wsum = mu - 2.0 * p2 - 3.0 * p3;
      double p4 = (wsum - s) / 3.0;
      double p1 = s - p4;
      if (p1 < -1e-12 || p4 < -1e-12) continue;
      Pmf p{std::max(0.0, p1), p2, p3, std::max(0.0, p4)};
      double tot = p[0] + p[1] + p[2] + p[3];
      for (double& x : p) x /= tot;
      cands.push_back({transmission_rate(p, r_fec), std::move(p)});
    }
  }
  std::sort(cands.begin(), cands.end(),
            [](const Cand& a, const Cand& b) { return a.t > b.t; });
  Cand oracle{-1.0, {}};
  for (const auto& c : cands) {
    double rs = sdt_rate(delta, c.p, {r_fec, 0.0}, ch.sigma, ch.intf, quad48);
    if (c.t <= rs - r_bf + 1e-9) {
      oracle = c;
      break;
    }
  }
  REQUIRE(oracle.t > 0.0);

  SolverConfig cfg;
  cfg.quad_nodes = 48;
  auto alg = algorithm1(delta, r_fec, ch, r_bf, quad48, cfg);
  CHECK(std::abs(alg.t_rate - oracle.t) < 1e-3);
  for (int i = 0; i < 4; ++i)
    CHECK(alg.pmf[i] == Catch::Approx(oracle.p[i]).margin(0.02));
}

TEST_CASE("algorithm1 behaviour") {
  SECTION("M=2 converges immediately") {
    UserChannel ch = single_user(2, 6.0);
    SpacingBounds b = SpacingBounds::from_power(ch.p_r, 0.5, 2);
    SolverConfig cfg;
    auto res = algorithm1(0.6 * b.delta_min + 0.4 * b.delta_max, 0.5, ch, 0.05,
                          quad48, cfg);
    CHECK(res.iterations <= 2);
  }
  SECTION("restart at the fixed point stays put") {
    UserChannel ch = single_user(8, 8.0);
    SpacingBounds b = SpacingBounds::from_power(ch.p_r, 0.6, 8);
    double delta = 0.5 * (b.delta_min + b.delta_max);
    SolverConfig cfg;
    auto first = algorithm1(delta, 0.6, ch, 0.05, quad48, cfg);
    auto again = algorithm1(delta, 0.6, ch, 0.05, quad48, cfg, &first.pmf);
    CHECK(again.iterations == 1);
    CHECK(sq_distance(first.pmf, again.pmf) < cfg.gamma_s);
  }
  SECTION("power equality holds at the output") {
    UserChannel ch = single_user(8, 6.0);
    SpacingBounds b = SpacingBounds::from_power(ch.p_r, 0.5, 8);
    SolverConfig cfg;
    for (double f : {0.35, 0.5, 0.65}) {
      double delta = b.delta_min + f * (b.delta_max - b.delta_min);
      auto res = algorithm1(delta, 0.5, ch, 0.05, quad48, cfg);
      double pw = average_power(delta, res.pmf, 0.5);
      CHECK(pw == Catch::Approx(ch.p_r).epsilon(1e-9));
    }
  }
  SECTION("complementary slackness") {
    UserChannel ch = single_user(8, 4.0);
    SpacingBounds b = SpacingBounds::from_power(ch.p_r, 0.6, 8);
    SolverConfig cfg;
    double delta = 0.5 * (b.delta_min + b.delta_max);
    auto res = algorithm1(delta, 0.6, ch, 0.05, quad48, cfg);
    double phi = phi_surrogate(delta, res.pmf, res.pmf, 0.6, ch, quad48);
    if (res.rate_active) {
      CHECK(std::abs(res.t_rate - (phi - 0.05)) < 1e-6);
    } else {
      CHECK(res.t_rate < phi - 0.05);
    }
  }
}

TEST_CASE("surrogate domination") {
  UserChannel ch = single_user(8, 6.0);
  std::mt19937_64 rng(77);
  double delta = 0.2 * ch.p_r;
  for (int k = 0; k < 6; ++k) {
    Pmf p = random_pmf(8, rng), p_hat = random_pmf(8, rng);
    double phi = phi_surrogate(delta, p, p_hat, 0.6, ch, quad48);
    double rsdt = sdt_rate(delta, p, {0.6, 0.0}, ch.sigma, ch.intf, quad48);
    CHECK(phi <= rsdt + 1e-6);
    double phi_self = phi_surrogate(delta, p, p, 0.6, ch, quad48);
    CHECK(phi_self == Catch::Approx(rsdt).margin(1e-6));
  }
}

TEST_CASE("optimize user") {
  SECTION("noiseless limit approaches R log2 M") {
    UserChannel ch = single_user(8, 60.0);
    SolverConfig cfg;
    cfg.quad_nodes = 48;
    auto res = optimize_user(ch, 0.9, cfg, quad48);
    REQUIRE(res.feasible);
    CHECK(res.t_rate == Catch::Approx(0.9 * 3.0).margin(0.02));
  }
  SECTION("output satisfies the power equality") {
    UserChannel ch = single_user(8, 6.0);
    SolverConfig cfg;
    cfg.quad_nodes = 48;
    auto res = optimize_user(ch, 0.6, cfg, quad48);
    REQUIRE(res.feasible);
    CHECK(average_power(res.delta, res.pmf, 0.6) ==
          Catch::Approx(ch.p_r).epsilon(1e-9));
    CHECK(res.t_rate <= res.r_sdt - 0.05 + 1e-4);
  }
  SECTION("scale covariance") {
    SolverConfig cfg;
    cfg.quad_nodes = 48;
    UserChannel a = single_user(8, 5.0, 1.0);
    UserChannel b = single_user(8, 5.0, 4.0);  // exact binary scale
    auto ra = optimize_user(a, 0.6, cfg, quad48);
    auto rb = optimize_user(b, 0.6, cfg, quad48);
    REQUIRE(ra.feasible);
    REQUIRE(rb.feasible);
    CHECK(rb.delta == Catch::Approx(4.0 * ra.delta).epsilon(1e-12));
    CHECK(rb.t_rate == Catch::Approx(ra.t_rate).epsilon(1e-12));
    for (int i = 0; i < 8; ++i)
      CHECK(rb.pmf[i] == Catch::Approx(ra.pmf[i]).margin(1e-12));

    // Inexact scale factors stay within the solver tolerances.
    UserChannel c = single_user(8, 5.0, 10.0);
    auto rc = optimize_user(c, 0.6, cfg, quad48);
    CHECK(rc.delta == Catch::Approx(10.0 * ra.delta).epsilon(2e-4));
    CHECK(rc.t_rate == Catch::Approx(ra.t_rate).margin(1e-6));
  }
}

TEST_CASE("uniform baseline") {
  SolverConfig cfg;
  cfg.quad_nodes = 48;
  SECTION("spacing and rate structure") {
    UserChannel ch = single_user(8, 8.0);
    auto res = uniform_baseline_user(ch, cfg, quad48);
    CHECK(res.delta == Catch::Approx(2.0 * ch.p_r / 9.0).epsilon(1e-14));
    if (res.feasible)
      CHECK(res.t_rate == Catch::Approx(res.r_fec * 3.0).epsilon(1e-12));
  }
  SECTION("staircase nondecreasing in OSNR") {
    double prev = -1.0;
    for (double osnr : {2.0, 6.0, 10.0, 14.0, 18.0}) {
      auto res = uniform_baseline_user(single_user(8, osnr), cfg, quad48);
      double t = res.feasible ? res.t_rate : 0.0;
      CHECK(t >= prev - 1e-12);
      prev = t;
    }
  }
}

TEST_CASE("pcm baseline") {
  SolverConfig cfg;
  cfg.quad_nodes = 48;
  SECTION("M=2 collapses to the uniform PMF") {
    UserChannel ch = single_user(2, 8.0);
    auto res = pcm_baseline_user(ch, 0.5, cfg, quad48);
    REQUIRE(res.feasible);
    CHECK(res.pmf[0] == Catch::Approx(0.5).margin(1e-12));
    CHECK(res.pmf[1] == Catch::Approx(0.5).margin(1e-12));
  }
  SECTION("pairwise equality holds exactly") {
    UserChannel ch = single_user(8, 5.0);
    auto res = pcm_baseline_user(ch, 0.5, cfg, quad48);
    REQUIRE(res.feasible);
    for (int k = 0; k < 4; ++k) CHECK(res.pmf[2 * k] == res.pmf[2 * k + 1]);
    CHECK(average_power(res.delta, res.pmf, 0.5) ==
          Catch::Approx(ch.p_r).epsilon(1e-9));
  }
}

TEST_CASE("capacity") {
  SolverConfig cfg;
  cfg.quad_nodes = 48;
  SECTION("binary noiseless limit") {
    UserChannel ch = single_user(2, 40.0);
    auto res = capacity_user(ch, cfg, quad48);
    REQUIRE(res.feasible);
    CHECK(res.t_rate == Catch::Approx(1.0).margin(1e-3));
  }
  SECTION("dominates uniform signalling") {
    for (double osnr : {0.0, 6.0, 12.0}) {
      UserChannel ch = single_user(8, osnr);
      auto cap = capacity_user(ch, cfg, quad48);
      double cu = mutual_information(2.0 * ch.p_r / 9.0, uniform_pmf(8), ch.sigma,
                                     ch.intf, quad48, ch.coeff);
      REQUIRE(cap.feasible);
      CHECK(cap.t_rate >= cu - 1e-6);
      CHECK(average_power(cap.delta, cap.pmf, 1.0) ==
            Catch::Approx(ch.p_r).epsilon(1e-9));
    }
  }
}

TEST_CASE("optimize scenario") {
  SolverConfig cfg;
  cfg.quad_nodes = 48;
  cfg.fec_rates = {0.5, 0.75, 0.9};
  SECTION("single user reduces to the per-user optimizer") {
    NomaScenario scn({1.0}, {1.0}, 1.0 / db_to_linear(6.0), 8);
    auto results = optimize_scenario(scn, cfg);
    REQUIRE(results.size() == 1);
    CHECK(results[0].user == 1);
    CHECK(results[0].feasible);
  }
  SECTION("two users chain interference in inverse SIC order") {
    NomaScenario scn({1.0, 1.0}, 4.0741e-5, 1.1419e-5, 0.0, 8);
    auto results = optimize_scenario(scn.with_osnr_db(8.0), cfg);
    REQUIRE(results.size() == 2);
    CHECK(results[1].feasible);  // user 2, interference-free
    // user 1 sees user 2: its achievable rate cannot exceed the clean one
    UserChannel clean = UserChannel::from_scenario(scn.with_osnr_db(8.0), 1, {});
    auto clean_res = optimize_user(clean, results[0].r_fec, cfg, quad48);
    if (results[0].feasible && clean_res.feasible)
      CHECK(results[0].t_rate <= clean_res.t_rate + 1e-6);
  }
}
