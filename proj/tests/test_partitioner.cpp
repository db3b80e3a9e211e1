#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fbt/partitioner.hpp"
#include "oracles.hpp"

using namespace fbt;

namespace {

SequenceSet full(std::size_t n, std::size_t q) {
  std::vector<SeqInt> m(oracle::ipow(q, n));
  for (SeqInt x = 0; x < m.size(); ++x) m[x] = x;
  return SequenceSet(n, q, m);
}

PartitioningIndex first_digit(const SequenceSet& a) {
  std::vector<std::pair<SeqInt, Label>> l;
  for (SeqInt x : a) l.emplace_back(x, oracle::digits(x, a.n(), a.q()).front());
  return PartitioningIndex::from_labels(a.n(), a.q(), l);
}

PartitioningIndex singletons(const SequenceSet& a) {
  std::vector<std::pair<SeqInt, Label>> l;
  for (SeqInt x : a) l.emplace_back(x, x);
  return PartitioningIndex::from_labels(a.n(), a.q(), l);
}

/// Disjoint cover of the ground set by the cells, checked element by element.
void expect_partition(const PartitioningIndex& pi, const SequenceSet& a) {
  EXPECT_EQ(pi.ground(), a);
  std::size_t total = 0;
  for (const auto& [l, c] : pi.cells()) {
    total += c.size();
    for (SeqInt x : c) EXPECT_EQ(pi.label_of(x), l);
  }
  EXPECT_EQ(total, a.size());
}

}  // namespace

TEST(BuildW, SingleMessageUniform) {
  const SequenceSet a(3, 2, {0, 2, 5, 6});
  const WPartition w = build_W(SequenceDist::uniform(a), PartitioningIndex::trivial(a), 0.5, 1.0);
  ASSERT_EQ(w.cells.size(), 2u);
  EXPECT_TRUE(w.cells[0].remainder);
  EXPECT_TRUE(w.cells[0].members.empty());
  EXPECT_EQ(w.cells[1].l, 0u);
  EXPECT_EQ(w.cells[1].members, a);
  EXPECT_EQ(w.cells[1].gamma_x, 1.0);
  EXPECT_EQ(w.cells[1].gamma_m, 1.0);
  EXPECT_TRUE(w.partitions_set);
  EXPECT_TRUE(w.partitions_messages);
}

TEST(BuildW, FirstBitMessagesHaveUnitGamma) {
  const SequenceSet a = full(2, 2);
  const WPartition w = build_W(SequenceDist::uniform(a), first_digit(a), 0.5, 1.0);
  EXPECT_TRUE(w.partitions_set);
  for (std::size_t i = 1; i < w.cells.size(); ++i) {
    EXPECT_EQ(w.cells[i].gamma_m, 1.0);
    EXPECT_EQ(w.cells[i].gamma_x, 1.0);
  }
  expect_partition(w.index, a);
}

TEST(BuildW, LightSequenceLandsInRemainder) {
  // One atom at 2^{-2 n delta} with n = 2, delta = 1; the spectrum tail excludes it.
  const SequenceDist d = SequenceDist::from_entries(2, 2, {{0, 1.0 - 1.0 / 16.0}, {3, 1.0 / 16.0}});
  const WPartition w = build_W(d, PartitioningIndex::trivial(d.support()), 1.0, 0.0);
  EXPECT_TRUE(w.partitions_set);
  bool placed = false;
  for (const auto& c : w.cells)
    if (c.members.contains(3)) placed = true;
  EXPECT_TRUE(placed);
  EXPECT_GE(w.w0_mass, 0.0);
  EXPECT_LE(w.w0_mass, 1.0);
}

TEST(BuildW, RejectsNonPartition) {
  const SequenceSet a(2, 2, {0, 1});
  EXPECT_THROW(build_W(SequenceDist::uniform(a), PartitioningIndex::trivial(SequenceSet(2, 2, {0})), 0.5, 1.0),
               ValidationError);
}

TEST(BuildW, GammaCapsOnRandomInputs) {
  std::mt19937_64 rng(41);
  std::exponential_distribution<double> ex(1.0);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 2 + rng() % 3;
    const auto m = oracle::random_members(rng, oracle::ipow(2, n), 2 + rng() % 6);
    std::vector<double> w(m.size());
    for (double& v : w) v = ex(rng);
    const SequenceDist d = SequenceDist::normalized(SequenceSet(n, 2, m), w);
    std::vector<std::pair<SeqInt, Label>> l;
    for (SeqInt x : m) l.emplace_back(x, rng() % 3);
    const WPartition wp = build_W(d, PartitioningIndex::from_labels(n, 2, l), 0.5, 1.0);
    EXPECT_TRUE(wp.partitions_set);
    expect_partition(wp.index, d.support());
    for (std::size_t i = 1; i < wp.cells.size(); ++i) {
      EXPECT_LE(wp.cells[i].gamma_x, wp.gamma_x_cap * (1 + 1e-9));
      EXPECT_LE(wp.cells[i].gamma_m, wp.gamma_m_cap * (1 + 1e-9));
    }
    EXPECT_LE(wp.cells.size(), wp.cell_cap);
  }
}

TEST(Refine, BscRepetitionPair) {
  const SequenceSet a(2, 2, {0, 3});
  const RefineResult r = refine_quasi_to_image(Channel::bsc(0.1), SequenceDist::uniform(a), a, 0.5);
  EXPECT_EQ(r.image.members(), (std::vector<SeqInt>{0, 3}));
  EXPECT_EQ(r.a_prime, a);
  const double direct = oracle::prob(Channel::bsc(0.1), 0, 0, 2) + oracle::prob(Channel::bsc(0.1), 0, 3, 2);
  EXPECT_NEAR(r.min_prob, direct, 1e-15);
  EXPECT_NEAR(r.min_prob, 0.82, 1e-15);
  EXPECT_TRUE(r.certificate);
  EXPECT_TRUE(r.ratio_ok);
}

TEST(Refine, AlphaOneKeepsEverything) {
  const SequenceSet a(2, 2, {0, 1, 2});
  const RefineResult r = refine_quasi_to_image(Channel::bsc(0.2), SequenceDist::uniform(a), a, 1.0);
  EXPECT_EQ(r.a_prime, a);
  EXPECT_EQ(r.image.size(), 4u);
}

TEST(Refine, IdentityKeepsTheTopAtoms) {
  const SequenceDist d = SequenceDist::from_entries(2, 2, {{0, 0.4}, {1, 0.3}, {2, 0.2}, {3, 0.1}});
  const RefineResult r = refine_quasi_to_image(Channel::identity(2), d, d.support(), 0.6);
  EXPECT_EQ(r.image.members(), (std::vector<SeqInt>{0, 1}));
  EXPECT_EQ(r.a_prime.members(), (std::vector<SeqInt>{0, 1}));
}

TEST(Refine, CertificateOnRandomInputs) {
  std::mt19937_64 rng(43);
  for (int t = 0; t < 50; ++t) {
    const Channel ch = oracle::random_channel(rng, 2, 2);
    const std::size_t n = 1 + rng() % 3;
    const auto m = oracle::random_members(rng, oracle::ipow(2, n), 1 + rng() % 5);
    const SequenceSet a(n, 2, m);
    const double alpha = 0.1 + 0.9 * std::uniform_real_distribution<double>()(rng);
    const RefineResult r = refine_quasi_to_image(ch, SequenceDist::uniform(a), a, alpha);
    for (SeqInt x : r.a_prime) {
      double s = 0.0;
      for (SeqInt y : r.image) s += oracle::prob(ch, x, y, n);
      EXPECT_TRUE(geq(s, alpha / static_cast<double>(n)));
    }
    EXPECT_TRUE(r.certificate);
  }
}

TEST(ExtractEqualCell, IdentityHasNoSlack) {
  const SequenceSet a(2, 2, {0, 1, 3});
  const ExtractResult r = extract_equal_cell(Channel::identity(2), SequenceDist::uniform(a), a, 0.5, 0.5, 0.5);
  EXPECT_FALSE(r.cell.empty());
  EXPECT_NEAR(r.trace.entropy_rate, r.trace.image_exponent, 1e-12);
}

TEST(ExtractEqualCell, SingleSequence) {
  const SequenceSet a(2, 2, {2});
  const ExtractResult r = extract_equal_cell(Channel::bsc(0.1), SequenceDist::uniform(a), a, 0.5, 0.5, 0.5);
  EXPECT_EQ(r.cell, a);
}

TEST(ExtractEqualCell, BscFullSpaceRatio) {
  const SequenceSet a = full(2, 2);
  const ExtractResult r = extract_equal_cell(Channel::bsc(0.1), SequenceDist::uniform(a), a, 0.5, 0.5, 0.5);
  EXPECT_FALSE(r.cell.empty());
  EXPECT_TRUE(r.cell.subset_of(a));
  EXPECT_TRUE(r.trace.image_exact);
  EXPECT_TRUE(r.trace.ratio_ok) << r.trace.ratio << " vs " << r.trace.ratio_bound;
}

TEST(ExtractMain, TwoIdentityChannelsKeepEverything) {
  const SequenceSet a = full(2, 2);
  const MainResult r = extract_main({Channel::identity(2), Channel::identity(2)}, SequenceDist::uniform(a), a, 0.5);
  EXPECT_EQ(r.cell, a);
  for (double g : r.trace.gap) EXPECT_NEAR(g, 0.0, 1e-12);
}

TEST(ExtractMain, TwoBscChannelsMeetRatioBound) {
  const SequenceSet a = full(2, 2);
  const MainResult r = extract_main({Channel::bsc(0.1), Channel::bsc(0.2)}, SequenceDist::uniform(a), a, 0.5);
  EXPECT_EQ(r.trace.steps.size(), 2u);
  EXPECT_TRUE(r.trace.ratio_ok);
  EXPECT_FALSE(r.cell.empty());
}

TEST(BuildV, Examples) {
  const SequenceSet a = full(2, 2);
  const VPartition id = build_V({Channel::identity(2)}, SequenceDist::uniform(a), a, 0.5);
  expect_partition(id.index, a);
  EXPECT_EQ(id.cells.size(), 1u);
  const SequenceSet one(2, 2, {1});
  EXPECT_EQ(build_V({Channel::bsc(0.1)}, SequenceDist::uniform(one), one, 0.5).cells.size(), 1u);
  const VPartition b = build_V({Channel::bsc(0.1)}, SequenceDist::uniform(a), a, 0.5);
  expect_partition(b.index, a);
  EXPECT_TRUE(b.within_cap);
  EXPECT_LE(b.cells.size(), b.cap);
}

TEST(BuildVstar, IdentityMessagesHaveNoGap) {
  const SequenceSet a(2, 2, {0, 1, 3});
  const EqualImagePartition v =
      build_Vstar({Channel::identity(2)}, SequenceDist::uniform(a), a, {singletons(a)});
  EXPECT_TRUE(v.partitions);
  expect_partition(v.index, a);
  EXPECT_NEAR(v.lambda[0], 0.0, 1e-12);
  EXPECT_NEAR(v.lambda[3], 0.0, 1e-12);
  for (const auto& c : v.cells)
    for (const auto& s : c.subsets) {
      EXPECT_EQ(s.messages, s.tilde);
      EXPECT_TRUE(s.set_monotone);
    }
}

TEST(BuildVstar, BscFirstBitStructure) {
  const SequenceSet a = full(2, 2);
  const Channel bsc = Channel::bsc(0.1);
  const EqualImagePartition v = build_Vstar({bsc}, SequenceDist::uniform(a), a, {first_digit(a)});
  EXPECT_TRUE(v.partitions);
  EXPECT_TRUE(v.within_cap);
  expect_partition(v.index, a);
  for (const auto& c : v.cells) {
    ASSERT_EQ(c.subsets.size(), 2u);
    // The empty subset carries every message of the cell under one label.
    EXPECT_TRUE(c.subsets[0].S.empty());
    for (const auto& s : c.subsets) {
      EXPECT_TRUE(s.images_exact);
      EXPECT_TRUE(s.set_monotone);
    }
  }
}

TEST(BuildVstar, RejectsFourComponents) {
  const SequenceSet a(1, 2, {0, 1});
  const auto t = PartitioningIndex::trivial(a);
  EXPECT_THROW(build_Vstar({Channel::identity(2)}, SequenceDist::uniform(a), a, {t, t, t, t}), CapacityError);
}

TEST(EntropyPerturbation, Examples) {
  EXPECT_TRUE(entropy_perturbation_bound(1.0, 1.0, 0.5, 2.0, 4).pass);
  const BoundReport sure = entropy_perturbation_bound(0.7, 0.7, 1.0, 3.0, 2);
  EXPECT_TRUE(sure.pass);
  EXPECT_NEAR(sure.rows.front().rhs, 0.5, 1e-15);
}

TEST(EntropyPerturbation, RandomBinaryJoints) {
  std::mt19937_64 rng(47);
  std::exponential_distribution<double> ex(1.0);
  for (int t = 0; t < 100; ++t) {
    // Joint of (E, S) with E over 4 symbols and S binary.
    double j[4][2], s = 0.0;
    for (auto& r : j)
      for (double& v : r) s += v = ex(rng);
    std::vector<double> pe(4, 0.0), pe1(4, 0.0);
    double p1 = 0.0;
    for (int e = 0; e < 4; ++e) {
      pe[e] = (j[e][0] + j[e][1]) / s;
      pe1[e] = j[e][1] / s;
      p1 += pe1[e];
    }
    for (double& v : pe1) v /= p1;
    EXPECT_TRUE(entropy_perturbation_bound(oracle::entropy(pe), oracle::entropy(pe1), p1, 2.0, 1).pass);
  }
}
