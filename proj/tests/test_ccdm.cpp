#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <random>
#include <set>

#include "psnoma/ccdm.hpp"

using namespace psnoma;

namespace {

std::vector<std::uint8_t> random_bits(int k, std::mt19937_64& rng) {
  std::vector<std::uint8_t> b(k);
  for (auto& x : b) x = rng() & 1u;
  return b;
}

Composition comp_of(std::vector<int> counts) { return Composition{std::move(counts)}; }

}  // namespace

TEST_CASE("multinomial") {
  CHECK(multinomial(comp_of({2, 2})).bit_length() == 3);  // 6 -> 110
  CHECK(ccdm_input_bits(comp_of({2, 2})) == 2);
  CHECK(ccdm_input_bits(comp_of({4, 0})) == 0);  // single sequence
  CHECK(ccdm_input_bits(comp_of({1, 1, 1})) == 2);  // 3! = 6
}

TEST_CASE("composition quantization") {
  SECTION("uniform splits evenly") {
    auto c = quantize_composition(uniform_pmf(4), 100);
    for (int x : c.counts) CHECK(x == 25);
  }
  SECTION("point mass puts everything in one bin") {
    auto c = quantize_composition({0.0, 1.0, 0.0}, 57);
    CHECK(c.counts == std::vector<int>{0, 57, 0});
  }
  SECTION("two-mass paper PMF at n_p=100 matches the min-KL enumeration") {
    Pmf p{0.7357, 0.2643};
    auto c = quantize_composition(p, 100);
    // oracle: enumerate every split of 100 into two bins
    double best = 1e300;
    int best_a = -1;
    for (int a = 0; a <= 100; ++a) {
      double d = 0.0;
      if (a > 0) d += (a / 100.0) * std::log2((a / 100.0) / p[0]);
      if (a < 100) d += ((100 - a) / 100.0) * std::log2(((100 - a) / 100.0) / p[1]);
      if (d < best) {
        best = d;
        best_a = a;
      }
    }
    CHECK(best_a == 74);
    CHECK(c.counts == std::vector<int>{74, 26});
  }
}

TEST_CASE("ccdm codec") {
  SECTION("k=0 composition maps to the canonical sequence") {
    auto out = ccdm_encode({}, comp_of({3, 0}));
    CHECK(out == std::vector<int>{0, 0, 0});
  }
  SECTION("[2,2] composition: 4 inputs map to 4 distinct valid codewords") {
    Composition c = comp_of({2, 2});
    std::set<std::vector<int>> seen;
    for (int u = 0; u < 4; ++u) {
      std::vector<std::uint8_t> bits{std::uint8_t((u >> 1) & 1),
                                     std::uint8_t(u & 1)};
      auto sym = ccdm_encode(bits, c);
      std::map<int, int> counts;
      for (int s : sym) counts[s]++;
      CHECK(counts[0] == 2);
      CHECK(counts[1] == 2);
      seen.insert(sym);
      CHECK(ccdm_decode(sym, c) == bits);
    }
    CHECK(seen.size() == 4);
  }
  SECTION("round trip over random inputs, several shapes") {
    std::mt19937_64 rng(42);
    std::vector<Composition> shapes = {
        comp_of({50, 30, 15, 5}),
        comp_of({74, 0, 0, 26}),
        comp_of({10, 10, 10, 10, 10, 10, 10, 10}),
        comp_of({120, 40, 25, 10, 3, 1, 1, 0}),
    };
    for (const auto& c : shapes) {
      const int k = ccdm_input_bits(c);
      for (int trial = 0; trial < 300; ++trial) {
        auto bits = random_bits(k, rng);
        auto sym = ccdm_encode(bits, c);
        std::vector<int> counts(c.order(), 0);
        for (int s : sym) counts[s]++;
        CHECK(counts == c.counts);
        auto back = ccdm_decode(sym, c);
        CHECK(back == bits);
      }
    }
  }
  SECTION("tampered symbol breaking the composition is rejected") {
    Composition c = comp_of({5, 5});
    std::mt19937_64 rng(7);
    auto sym = ccdm_encode(random_bits(ccdm_input_bits(c), rng), c);
    sym[0] = 1 - sym[0];
    CHECK_THROWS_AS(ccdm_decode(sym, c), codec_error);
  }
  SECTION("length mismatch is rejected") {
    CHECK_THROWS_AS(ccdm_encode({1, 0, 1}, comp_of({2, 2})), codec_error);
  }
  SECTION("rate loss shrinks with block length and meets the 8-PAM bound") {
    Pmf p{0.5297 / 0.9999, 0, 0, 0, 0.1709 / 0.9999, 0, 0.0168 / 0.9999,
          0.2825 / 0.9999};
    double prev = 1e9;
    for (int n_p : {600, 6000, 64800}) {
      Composition c = quantize_composition(p, n_p);
      Pmf realized(8);
      for (int i = 0; i < 8; ++i) realized[i] = double(c.counts[i]) / n_p;
      double loss = entropy_bits(realized) - double(ccdm_input_bits(c)) / n_p;
      CHECK(loss >= 0.0);
      CHECK(loss <= prev + 1e-12);
      prev = loss;
      if (n_p == 64800) CHECK(loss < 7.5e-4);
    }
  }
}

TEST_CASE("gray mapping") {
  SECTION("canonical start") {
    CHECK(gray_map(1, 8) == std::vector<std::uint8_t>{0, 0, 0});
  }
  SECTION("adjacent labels differ in exactly one bit") {
    for (int m : {2, 4, 8, 16, 64}) {
      for (int i = 1; i < m; ++i) {
        auto a = gray_map(i, m), b = gray_map(i + 1, m);
        int ham = 0;
        for (std::size_t l = 0; l < a.size(); ++l) ham += a[l] != b[l];
        CHECK(ham == 1);
      }
    }
  }
  SECTION("demap inverts map") {
    for (int m : {2, 4, 8, 16, 64})
      for (int i = 1; i <= m; ++i) CHECK(gray_demap(gray_map(i, m)) == i);
  }
  SECTION("out of range") {
    CHECK_THROWS_AS(gray_map(0, 8), domain_error);
    CHECK_THROWS_AS(gray_map(9, 8), domain_error);
  }
}

TEST_CASE("frame layout and assembly") {
  SECTION("layout arithmetic") {
    auto lay = FrameLayout::make(4, 0.5, 4);
    CHECK(lay.n == 8);
    CHECK(lay.parity_symbols() == 4);
    CHECK(lay.systematic_bits() == 8);
    CHECK(lay.parity_bits() == 8);
  }
  SECTION("non-integer frame rejected") {
    CHECK_THROWS_AS(FrameLayout::make(10, 0.6, 8), domain_error);
  }
  SECTION("R_FEC = 1 has no parity segment") {
    auto lay = FrameLayout::make(6, 1.0, 8);
    auto f = assemble_frame({1, 2, 3, 4, 5, 6}, {}, 1.0, lay);
    CHECK(f.samples == std::vector<double>{1, 2, 3, 4, 5, 6});
  }
  SECTION("alpha scales, shaped segment leads") {
    auto lay = FrameLayout::make(2, 0.5, 4);
    auto f = assemble_frame({1.0, 2.0}, {3.0, 4.0}, 0.5, lay);
    CHECK(f.samples == std::vector<double>{0.5, 1.0, 1.5, 2.0});
    CHECK(f.n_p == 2);
  }
  SECTION("segment mismatch rejected") {
    auto lay = FrameLayout::make(2, 0.5, 4);
    CHECK_THROWS_AS(assemble_frame({1.0}, {3.0, 4.0}, 1.0, lay), codec_error);
  }
}
