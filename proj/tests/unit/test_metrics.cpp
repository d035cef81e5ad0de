#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "topoconv/errors.hpp"
#include "topoconv/metrics.hpp"

using namespace topoconv;

namespace {

BinaryMask from_rows(const std::vector<std::string>& rows) {
  BinaryMask m(rows.size(), rows[0].size());
  for (std::size_t y = 0; y < rows.size(); ++y)
    for (std::size_t x = 0; x < rows[y].size(); ++x) m.set(y, x, rows[y][x] == '#');
  return m;
}

BinaryMask disk_pair() {
  BinaryMask m(12, 20);
  for (long y = 0; y < 12; ++y)
    for (long x = 0; x < 20; ++x) {
      const bool a = (y - 5) * (y - 5) + (x - 5) * (x - 5) <= 9;
      const bool b = (y - 5) * (y - 5) + (x - 14) * (x - 14) <= 9;
      m.set(std::size_t(y), std::size_t(x), a || b);
    }
  return m;
}

BinaryMask annulus(std::size_t size = 15, double r_in = 3.0, double r_out = 6.0) {
  BinaryMask m(size, size);
  const double c = (double(size) - 1) / 2;
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double r = std::hypot(double(y) - c, double(x) - c);
      m.set(y, x, r >= r_in && r <= r_out);
    }
  return m;
}

BinaryMask filled_disk(std::size_t size = 15, double r_out = 6.0) { return annulus(size, -1.0, r_out); }

// No 2x2 all-foreground block.
bool thin(const BinaryMask& m) {
  for (std::size_t y = 0; y + 1 < m.height(); ++y)
    for (std::size_t x = 0; x + 1 < m.width(); ++x)
      if (m.at(y, x) && m.at(y + 1, x) && m.at(y, x + 1) && m.at(y + 1, x + 1)) return false;
  return true;
}

}  // namespace

TEST(BinaryMask, RejectsNonBinary) {
  EXPECT_THROW(BinaryMask(1, 2, std::vector<std::uint8_t>{0, 2}), ValidationError);
  EXPECT_THROW(BinaryMask(2, 2, std::vector<std::uint8_t>{0, 1}), ShapeError);
}

TEST(Betti, Fixtures) {
  EXPECT_EQ(betti_numbers(annulus()), (BettiNumbers{1, 1}));
  EXPECT_EQ(euler_characteristic(annulus()), 0);
  EXPECT_EQ(betti_numbers(disk_pair()), (BettiNumbers{2, 0}));
  EXPECT_EQ(euler_characteristic(disk_pair()), 2);
  EXPECT_EQ(betti_numbers(BinaryMask(4, 4)), (BettiNumbers{0, 0}));
}

TEST(Betti, CheckerboardConvention) {
  // Diagonal neighbours are separate foreground components (4-connected) and
  // the background is one 8-connected region, so there is no hole.
  const auto m = from_rows({"#.#", ".#.", "#.#"});
  EXPECT_EQ(betti_numbers(m), (BettiNumbers{5, 0}));
  // A diagonal ring encloses nothing under (4, 8): the centre leaks out diagonally.
  const auto d = from_rows({".#.", "#.#", ".#."});
  EXPECT_EQ(betti_numbers(d), (BettiNumbers{4, 0}));
  // A 4-connected ring does enclose its centre.
  const auto r = from_rows({"###", "#.#", "###"});
  EXPECT_EQ(betti_numbers(r), (BettiNumbers{1, 1}));
}

TEST(Betti, MatchesFloodFillOracle) {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = oracle::random_mask(rng, 6, 6, 0.55);
    const auto [b0, b1] = oracle::betti(m);
    EXPECT_EQ(betti_numbers(m), (BettiNumbers{b0, b1})) << trial;
  }
}

TEST(Euler, FixturesAndPoincare) {
  BinaryMask one(3, 3);
  one.set(1, 1, true);
  EXPECT_EQ(euler_characteristic(one), 1);
  const auto block = from_rows({"##", "##"});
  EXPECT_EQ(euler_characteristic(block), 1);
  std::mt19937_64 rng(62);
  for (int trial = 0; trial < 500; ++trial) {
    const auto m = oracle::random_mask(rng, 8, 8);
    const auto b = betti_numbers(m);
    EXPECT_EQ(euler_characteristic(m), b.b0 - b.b1);
  }
}

TEST(Labeling, ContiguousConnectedLabels) {
  std::mt19937_64 rng(63);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = oracle::random_mask(rng, 7, 7);
    const auto lab = label_components(m);
    std::vector<int> seen(std::size_t(lab.count) + 1, 0);
    for (std::size_t i = 0; i < m.size(); ++i) {
      EXPECT_EQ(lab.labels[i] != 0, m.bits()[i] != 0);
      seen[std::size_t(lab.labels[i])] = 1;
    }
    for (int k = 1; k <= lab.count; ++k) EXPECT_EQ(seen[std::size_t(k)], 1);
    EXPECT_EQ(lab.count, oracle::betti(m).first);
  }
}

TEST(SimplePoint, MatchesGlobalTopologyOnAllNeighbourhoods) {
  for (int code = 0; code < 256; ++code) {
    BinaryMask m(5, 5);
    m.set(2, 2, true);
    int bit = 0;
    for (std::size_t y = 1; y <= 3; ++y)
      for (std::size_t x = 1; x <= 3; ++x) {
        if (y == 2 && x == 2) continue;
        m.set(y, x, (code >> bit++) & 1);
      }
    BinaryMask removed = m;
    removed.set(2, 2, false);
    const bool preserved = oracle::betti(m) == oracle::betti(removed);
    EXPECT_EQ(is_simple_point(m, 2, 2), preserved) << "neighbourhood code " << code;
  }
}

TEST(Skeleton, Fixtures) {
  const auto line = from_rows({"..........", ".########.", ".........."});
  EXPECT_EQ(skeletonize(line), line);
  EXPECT_EQ(skeletonize(BinaryMask(5, 5)), BinaryMask(5, 5));

  const auto bar = from_rows({"............", ".##########.", ".##########.", ".##########.", "............"});
  const auto s = skeletonize(bar);
  EXPECT_TRUE(thin(s));
  EXPECT_GT(s.count(), 0u);
  EXPECT_EQ(betti_numbers(s).b0, 1);
}

TEST(Skeleton, PreservesComponentsAndNeverAdds) {
  std::mt19937_64 rng(64);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = oracle::random_mask(rng, 10, 10, 0.6);
    const auto s = skeletonize(m);
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_LE(s.bits()[i], m.bits()[i]);
    EXPECT_EQ(betti_numbers(s), betti_numbers(m));
  }
  const auto a = annulus();
  const auto sa = skeletonize(a);
  EXPECT_TRUE(thin(sa));
  EXPECT_EQ(betti_numbers(sa), (BettiNumbers{1, 1}));
}

TEST(ClDice, Cases) {
  const auto bar = from_rows({"............", ".##########.", ".##########.", ".##########.", "............"});
  EXPECT_EQ(cl_dice(bar, bar), 1.0);
  EXPECT_EQ(cl_dice(BinaryMask(5, 12), BinaryMask(5, 12)), 1.0);
  EXPECT_EQ(cl_dice(BinaryMask(5, 12), bar), 0.0);

  BinaryMask left(5, 12), right(5, 12);
  left.set(2, 2, true);
  right.set(2, 9, true);
  EXPECT_EQ(cl_dice(left, right), 0.0);

  double previous = 1.0;
  for (std::size_t gap = 1; gap <= 3; ++gap) {
    BinaryMask broken = bar;
    for (std::size_t x = 5; x < 5 + gap; ++x)
      for (std::size_t y = 1; y <= 3; ++y) broken.set(y, x, false);
    const double v = cl_dice(broken, bar);
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, previous);
    previous = v;
  }
}

TEST(Dice, IdenticalEmptyAndSymmetric) {
  std::mt19937_64 rng(65);
  const auto a = oracle::random_mask(rng, 6, 6), b = oracle::random_mask(rng, 6, 6);
  EXPECT_EQ(dice(a, a), 1.0);
  EXPECT_EQ(dice(BinaryMask(3, 3), BinaryMask(3, 3)), 1.0);
  EXPECT_EQ(dice(a, b), dice(b, a));
}

TEST(Auc, SeparatedTiesAndOracle) {
  const auto gt = from_rows({"##..", "...."});
  EXPECT_EQ(auc(std::vector<double>{0.9, 0.8, 0.1, 0.2, 0.3, 0.0, 0.1, 0.4}, gt), 1.0);
  EXPECT_EQ(auc(std::vector<double>(8, 0.5), gt), 0.5);
  EXPECT_THROW(auc(std::vector<double>(8, 0.5), BinaryMask(2, 4)), ValidationError);

  std::mt19937_64 rng(66);
  std::uniform_int_distribution<int> level(0, 20);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = oracle::random_mask(rng, 8, 8);
    if (m.count() == 0 || m.count() == m.size()) continue;
    std::vector<double> s(64);
    for (auto& v : s) v = level(rng) / 20.0;  // coarse levels exercise ties
    EXPECT_NEAR(auc(s, m), oracle::auc(s, m), 1e-12);
  }
}

TEST(Ari, Cases) {
  std::mt19937_64 rng(67);
  const auto m = oracle::random_mask(rng, 4, 4);
  EXPECT_EQ(ari_error(m, m), 0.0);

  const auto half = from_rows({"####", "####", "....", "...."});
  const BinaryMask none(4, 4);
  EXPECT_NEAR(ari_error(none, half), 1.0 - oracle::ari(oracle::partition(none), oracle::partition(half)), 1e-12);
  EXPECT_EQ(ari_error(none, none), 0.0);

  std::vector<int> a{1, 1, 2, 2, 3, 0}, b{5, 5, 7, 7, 9, 4};
  EXPECT_NEAR(adjusted_rand_index(a, b), 1.0, 1e-15);
  std::vector<int> c{0, 1, 0, 2, 2, 1}, c_perm{9, 4, 9, 1, 1, 4};
  EXPECT_EQ(adjusted_rand_index(a, c), adjusted_rand_index(a, c_perm));
}

TEST(Ari, MatchesPairCountingOracle) {
  std::mt19937_64 rng(68);
  std::uniform_int_distribution<std::size_t> side(2, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t h = side(rng), w = side(rng);
    const auto p = oracle::random_mask(rng, h, w), g = oracle::random_mask(rng, h, w);
    EXPECT_NEAR(ari_error(p, g), 1.0 - oracle::ari(oracle::partition(p), oracle::partition(g)), 1e-12);
  }
}

TEST(Vi, IdentitySymmetryAndOracle) {
  std::mt19937_64 rng(69);
  const auto m = oracle::random_mask(rng, 4, 4);
  EXPECT_EQ(variation_of_information(m, m), 0.0);
  std::uniform_int_distribution<int> lab(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> a(16), b(16);
    for (auto& v : a) v = lab(rng);
    for (auto& v : b) v = lab(rng);
    EXPECT_NEAR(variation_of_information(a, b), oracle::vi(a, b), 1e-12);
    EXPECT_NEAR(variation_of_information(a, b), variation_of_information(b, a), 1e-12);
    const auto p = oracle::random_mask(rng, 4, 4), g = oracle::random_mask(rng, 4, 4);
    EXPECT_NEAR(variation_of_information(p, g), oracle::vi(oracle::partition(p), oracle::partition(g)), 1e-12);
  }
}

TEST(EvaluatePair, PerfectPrediction) {
  const auto gt = annulus();
  std::vector<double> prob(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) prob[i] = gt.bits()[i];
  const auto r = evaluate_pair(prob, gt);
  EXPECT_EQ(r.dice, 1.0);
  EXPECT_EQ(r.cl_dice, 1.0);
  EXPECT_EQ(r.auc, 1.0);
  EXPECT_EQ(r.betti0_error, 0.0);
  EXPECT_EQ(r.betti1_error, 0.0);
  EXPECT_EQ(r.euler_error, 0.0);
  EXPECT_EQ(r.ari_error, 0.0);
  EXPECT_EQ(r.vi, 0.0);
}

TEST(EvaluatePair, SpeckAndFilledHole) {
  const auto gt = annulus();
  std::vector<double> prob(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) prob[i] = gt.bits()[i];
  prob[0] = 0.9;  // isolated corner speck
  EXPECT_EQ(evaluate_pair(prob, gt).betti0_error, 1.0);

  const auto disk = filled_disk();
  std::vector<double> filled(disk.size());
  for (std::size_t i = 0; i < disk.size(); ++i) filled[i] = disk.bits()[i];
  const auto r = evaluate_pair(filled, gt);
  EXPECT_EQ(r.betti1_error, 1.0);
  EXPECT_EQ(r.euler_error, 1.0);
  EXPECT_EQ(r.betti0_error, 0.0);
}

TEST(EvaluatePair, ThresholdIsInclusive) {
  const auto gt = from_rows({"#.", ".."});
  const auto r = evaluate_pair(std::vector<double>{0.5, 0.49, 0.2, 0.1}, gt, 0.5);
  EXPECT_EQ(r.dice, 1.0);
}

TEST(MetricsReport, JsonRoundTripAndMean) {
  MetricsReport a, b;
  a.dice = 0.5;
  a.vi = 1.0;
  a.gt_b0 = 2;
  b.dice = 1.0;
  b.vi = 0.0;
  b.gt_b0 = 4;
  const auto j = a.to_json();
  for (const char* key : {"dice", "auc", "cl_dice", "betti0_error", "betti1_error", "euler_error", "ari_error", "vi"})
    EXPECT_TRUE(j.contains(key)) << key;
  const auto back = MetricsReport::from_json(j);
  EXPECT_EQ(back.dice, 0.5);
  EXPECT_EQ(back.gt_b0, 2);
  const std::vector<MetricsReport> both{a, b};
  const auto m = mean_report(both);
  EXPECT_EQ(m.dice, 0.75);
  EXPECT_EQ(m.vi, 0.5);
  EXPECT_EQ(m.gt_b0, 3);
}
