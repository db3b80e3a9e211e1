#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fbt/spectrum.hpp"
#include "oracles.hpp"

using namespace fbt;

namespace {

SequenceDist quarter_dist() { return SequenceDist::from_entries(1, 3, {{0, 0.5}, {1, 0.25}, {2, 0.25}}); }

std::vector<std::size_t> nonempty(const SpectrumPartition& sp) {
  std::vector<std::size_t> k;
  for (std::size_t i = 0; i <= sp.K; ++i)
    if (!sp.bins[i].empty()) k.push_back(i);
  return k;
}

}  // namespace

TEST(Spectrum, UniformHasOneBin) {
  const SequenceSet a(3, 2, {0, 1, 2, 5, 7});
  const SpectrumPartition sp = build_spectrum_partition(SequenceDist::uniform(a), 0.2, 0.5);
  const double ae = std::log2(5.0) / 3.0;
  EXPECT_EQ(nonempty(sp), std::vector<std::size_t>{static_cast<std::size_t>(std::floor(ae / 0.2))});
}

TEST(Spectrum, QuarterExample) {
  const SpectrumPartition sp = build_spectrum_partition(quarter_dist(), 0.5, 1.0);
  EXPECT_EQ(sp.K, 6u);
  EXPECT_EQ(sp.K, static_cast<std::size_t>(std::ceil((1.0 + std::log2(3.0)) / 0.5)));
  EXPECT_EQ(nonempty(sp), (std::vector<std::size_t>{2, 4}));
  EXPECT_EQ(sp.bins[2].members(), std::vector<SeqInt>{0});
  EXPECT_EQ(sp.bins[4].members(), (std::vector<SeqInt>{1, 2}));
  EXPECT_TRUE(verify_bin_size_bounds(sp, quarter_dist()).pass);
  const BoundReport u = verify_bin_conditional_uniformity(sp, quarter_dist());
  EXPECT_TRUE(u.pass);
}

TEST(Spectrum, PointMassIsBinZero) {
  const SpectrumPartition sp = build_spectrum_partition(SequenceDist::point(4, 2, 9), 0.3, 0.5);
  EXPECT_EQ(nonempty(sp), std::vector<std::size_t>{0});
}

TEST(Spectrum, DomainChecks) {
  EXPECT_THROW(build_spectrum_partition(quarter_dist(), 1.0, 0.5), DomainError);
  EXPECT_THROW(build_spectrum_partition(quarter_dist(), 0.0, 0.5), DomainError);
  EXPECT_THROW(build_spectrum_partition(quarter_dist(), 0.5, 0.0), DomainError);
  EXPECT_EQ(build_spectrum_partition(quarter_dist(), 0.5, 1.5).warnings.size(), 1u);
}

TEST(Spectrum, BinIndexOnExactEdges) {
  // Information density 1.0 with width 0.5 sits on the left edge of bin 2.
  EXPECT_EQ(spectrum_bin(1.0, 0.5, 10), 2u);
  EXPECT_EQ(spectrum_bin(1.0 - 1e-14, 0.5, 10), 2u);
  EXPECT_EQ(spectrum_bin(1.0 - 1e-9, 0.5, 10), 1u);
  EXPECT_EQ(spectrum_bin(100.0, 0.5, 10), 10u);
}

TEST(Spectrum, RandomBinsSatisfyBounds) {
  std::mt19937_64 rng(17);
  std::exponential_distribution<double> ex(1.0);
  for (int t = 0; t < 100; ++t) {
    const auto m = oracle::random_members(rng, 256, 1 + rng() % 60);
    std::vector<std::pair<SeqInt, double>> e;
    double s = 0.0;
    std::vector<double> w;
    for (std::size_t i = 0; i < m.size(); ++i) s += w.emplace_back(ex(rng));
    for (std::size_t i = 0; i < m.size(); ++i) e.emplace_back(m[i], w[i] / s);
    const SequenceDist d = SequenceDist::from_entries(8, 2, e, 1e-9);
    const double dn = 0.05 + 0.9 * std::uniform_real_distribution<double>()(rng);
    const SpectrumPartition sp = build_spectrum_partition(d, dn, 0.5);
    // Oracle: every member sits in the bin its density names.
    for (std::size_t k = 0; k < sp.K; ++k)
      for (SeqInt x : sp.bins[k]) {
        const double i = -std::log2(d.prob(x)) / 8.0;
        EXPECT_LE(static_cast<double>(k) * dn, i + 1e-12);
        EXPECT_LT(i, static_cast<double>(k + 1) * dn + 1e-12);
      }
    EXPECT_TRUE(verify_bin_size_bounds(sp, d).pass);
    EXPECT_TRUE(verify_bin_conditional_uniformity(sp, d).pass);
  }
}

TEST(Uniformity, Examples) {
  const SequenceSet a(2, 2, {0, 3});
  const UniformityReport u = uniformity(SequenceDist::uniform(a), a);
  EXPECT_EQ(u.gamma, 1.0);
  EXPECT_NEAR(u.entropy, 1.0, 1e-15);
  const UniformityReport v = uniformity(SequenceDist::from_entries(2, 2, {{0, 0.4}, {3, 0.6}}), a);
  EXPECT_NEAR(v.gamma, 1.5, 1e-15);
  EXPECT_NEAR(v.entropy, oracle::binary_entropy(0.4), 1e-15);
  EXPECT_NEAR(v.entropy, 0.97095, 1e-5);
  EXPECT_TRUE(v.entropy_bounds_hold);
  const UniformityReport p = uniformity(SequenceDist::point(2, 2, 1), SequenceSet(2, 2, {1}));
  EXPECT_EQ(p.gamma, 1.0);
  EXPECT_EQ(p.entropy, 0.0);
}

TEST(Index, RestrictAndProduct) {
  const PartitioningIndex m1 = PartitioningIndex::from_labels(2, 2, {{0, 0}, {1, 0}, {2, 1}, {3, 1}});
  const PartitioningIndex m2 = PartitioningIndex::from_labels(2, 2, {{0, 0}, {1, 1}, {2, 0}, {3, 1}});
  const PartitioningIndex p = product_index(m1, m2);
  EXPECT_EQ(p.cell_count(), 4u);
  for (const auto& [l, c] : p.cells()) EXPECT_EQ(c.size(), 1u);
  const PartitioningIndex self = product_index(m1, m1);
  EXPECT_EQ(self.cell_count(), m1.cell_count());
  for (SeqInt x = 0; x < 4; ++x)
    for (SeqInt y = 0; y < 4; ++y) EXPECT_EQ(self.label_of(x) == self.label_of(y), m1.label_of(x) == m1.label_of(y));
  const PartitioningIndex r = restrict_index(m1, m1.ground());
  EXPECT_EQ(r.entries(), m1.entries());
  const PartitioningIndex half = restrict_index(m1, SequenceSet(2, 2, {0, 2}));
  EXPECT_EQ(half.cell_count(), 2u);
  EXPECT_THROW(restrict_index(m1, SequenceSet(2, 2, {})), DomainError);
  EXPECT_THROW(PartitioningIndex::from_labels(1, 2, {{0, 0}, {0, 1}}), ValidationError);
}

TEST(Aexp, Values) {
  EXPECT_EQ(aexp(1, 3), 0.0);
  EXPECT_NEAR(aexp(8, 3), 1.0, 1e-15);
}
