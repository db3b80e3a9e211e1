#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fbt/fano.hpp"
#include "oracles.hpp"

using namespace fbt;

namespace {

/// Deterministic code: message i sends codewords[i]; one receiver decodes with map.
Code det_code(std::size_t n, std::size_t q, const std::vector<SeqInt>& codewords, const std::vector<std::size_t>& map) {
  std::vector<std::vector<std::pair<SeqInt, double>>> enc;
  for (SeqInt x : codewords) enc.push_back({{x, 1.0}});
  return Code::make(n, q, MessageSpace::make({codewords.size()}), enc,
                    {decoder_from_map({0}, codewords.size(), map)});
}

/// Maximum-likelihood map over the output space, ties to the smaller message.
std::vector<std::size_t> ml_map(const Channel& ch, const std::vector<SeqInt>& cw, std::size_t n) {
  std::vector<std::size_t> map(oracle::ipow(ch.output_size(), n));
  for (SeqInt y = 0; y < map.size(); ++y) {
    double best = -1.0;
    for (std::size_t m = 0; m < cw.size(); ++m)
      if (oracle::prob(ch, cw[m], y, n) > best) {
        best = oracle::prob(ch, cw[m], y, n);
        map[y] = m;
      }
  }
  return map;
}

Code identity_code(std::size_t n) {
  std::vector<SeqInt> cw;
  std::vector<std::size_t> map;
  for (SeqInt x = 0; x < oracle::ipow(2, n); ++x) {
    cw.push_back(x);
    map.push_back(x);
  }
  return det_code(n, 2, cw, map);
}

/// Error probabilities by direct enumeration of (m, y).
std::pair<double, double> oracle_errors(const Code& c, const Channel& ch) {
  double worst = 0.0, avg = 0.0;
  for (std::size_t m = 0; m < c.encoder.size(); ++m) {
    for (const auto& [x, px] : c.encoder[m]) {
      if (px <= 0.0 || c.messages.joint[m] <= 0.0) continue;
      double ok = 0.0;
      for (SeqInt y = 0; y < oracle::ipow(ch.output_size(), c.n); ++y)
        ok += oracle::prob(ch, x, y, c.n) * c.decoders[0].at(y, m);
      worst = std::max(worst, 1.0 - ok);
      avg += c.messages.joint[m] * px * (1.0 - ok);
    }
  }
  return {worst, avg};
}

}  // namespace

TEST(Errors, IdentityCodeIsErrorFree) {
  const Code c = identity_code(2);
  EXPECT_EQ(max_error(c, {Channel::identity(2)}, 0), 0.0);
  EXPECT_EQ(avg_error(c, {Channel::identity(2)}, 0), 0.0);
}

TEST(Errors, ConstantChannelHalf) {
  const Channel flat = Channel::make(2, 2, {{0.3, 0.7}, {0.3, 0.7}});
  const Code c = det_code(1, 2, {0, 1}, {0, 1});
  EXPECT_NEAR(avg_error(c, {flat}, 0), 0.5, 1e-15);
}

TEST(Errors, BscSingleLetter) {
  const Code c = det_code(1, 2, {0, 1}, {0, 1});
  EXPECT_NEAR(max_error(c, {Channel::bsc(0.1)}, 0), 0.1, 1e-15);
  EXPECT_NEAR(avg_error(c, {Channel::bsc(0.1)}, 0), 0.1, 1e-15);
}

TEST(Errors, RandomCodesMatchEnumeration) {
  std::mt19937_64 rng(53);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 1 + rng() % 3;
    const Channel ch = oracle::random_channel(rng, 2, 2);
    const auto cw = oracle::random_members(rng, oracle::ipow(2, n), 1 + rng() % 4);
    std::vector<std::size_t> map(oracle::ipow(2, n));
    for (auto& v : map) v = rng() % cw.size();
    const Code c = det_code(n, 2, cw, map);
    const auto [mx, av] = oracle_errors(c, ch);
    const double e = max_error(c, {ch}, 0), a = avg_error(c, {ch}, 0);
    EXPECT_NEAR(e, mx, 1e-12);
    EXPECT_NEAR(a, av, 1e-12);
    EXPECT_LE(a, e + 1e-15);
  }
}

TEST(CodeValidation, RejectsMalformedCodes) {
  EXPECT_THROW(MessageSpace::make({2}, {0.5, 0.6}), ValidationError);
  EXPECT_THROW(Code::make(2, 2, MessageSpace::make({2}), {{{0, 1.0}}}, {decoder_from_map({0}, 2, {0, 0, 1, 1})}),
               ValidationError);
  EXPECT_THROW(Code::make(1, 2, MessageSpace::make({2}), {{{0, 1.0}}, {{2, 1.0}}}, {decoder_from_map({0}, 2, {0, 1})}),
               ValidationError);
  EXPECT_THROW(Code::make(1, 2, MessageSpace::make({2}), {{{0, 1.0}}, {{1, 1.0}}}, {decoder_from_map({1}, 2, {0, 1})}),
               ValidationError);
}

TEST(MessageSpace, ProjectionIsMixedRadix) {
  const MessageSpace ms = MessageSpace::make({2, 3});
  EXPECT_EQ(ms.unflatten(5), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(ms.project(5, {1}), 2u);
  EXPECT_EQ(ms.project(5, {0}), 1u);
  EXPECT_EQ(ms.project(5, {0, 1}), 5u);
  EXPECT_EQ(ms.size_of({0, 1}), 6u);
}

TEST(ClassicFano, Examples) {
  EXPECT_DOUBLE_EQ(classic_fano(0.0, 5.0, 4), 0.25);
  EXPECT_DOUBLE_EQ(classic_fano(1.0, 3.0, 3), 1.0 + 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(classic_fano(0.5, 2.0, 2), 1.0);
  EXPECT_THROW(classic_fano(1.5, 1.0, 1), DomainError);
}

TEST(DecodingSets, IdentityCodeCertificates) {
  const Code c = identity_code(2);
  std::vector<SequenceSet> cells{SequenceSet(2, 2, {0, 1, 2, 3})};
  const DecodingSets d = build_decoding_sets(c, {Channel::identity(2)}, 0, 1.0, cells);
  ASSERT_EQ(d.entries.size(), 4u);
  for (const auto& e : d.entries) {
    EXPECT_EQ(e.c_set.members(), std::vector<SeqInt>{e.message});
    EXPECT_EQ(e.min_prob, 1.0);
    EXPECT_TRUE(e.certified);
  }
  EXPECT_TRUE(d.multiplicity_ok);
}

TEST(DecodingSets, BscRepetitionMultiplicity) {
  const Channel bsc = Channel::bsc(0.1);
  const std::vector<SeqInt> cw{0, 3};
  const Code c = det_code(2, 2, cw, ml_map(bsc, cw, 2));
  const double alpha = 1.0 - max_error(c, {bsc}, 0);
  const DecodingSets d = build_decoding_sets(c, {bsc}, 0, alpha, std::vector<SequenceSet>{SequenceSet(2, 2, cw)});
  // Oracle: count, per output, the messages whose C set contains it.
  std::vector<std::size_t> count(4, 0);
  for (const auto& e : d.entries)
    for (SeqInt y : e.c_set) ++count[y];
  const std::size_t cap = static_cast<std::size_t>(std::floor(2.0 / alpha + 1e-12));
  for (std::size_t v : count) EXPECT_LE(v, cap);
  EXPECT_EQ(d.multiplicity_bound, cap);
  EXPECT_EQ(d.multiplicity_max, *std::max_element(count.begin(), count.end()));
  EXPECT_TRUE(d.certificates_ok);
  for (const auto& e : d.entries) {
    double p = 0.0;
    for (SeqInt y : e.c_set) p += oracle::prob(bsc, cw[e.message], y, 2);
    EXPECT_TRUE(geq(p, alpha / 4.0));
  }
}

TEST(DecodingSets, WeakMessageHasEmptySet) {
  // Receiver never puts more than 0.1 on message 1.
  Decoder d;
  d.S = {0};
  d.cols = 2;
  d.rows = {0.9, 0.1, 0.9, 0.1};
  const Code c =
      Code::make(1, 2, MessageSpace::make({2}), {{{0, 1.0}}, {{1, 1.0}}}, {d});
  // Threshold alpha/2 = 0.25 sits above P(1|y) = 0.1 on every output.
  const DecodingSets ds =
      build_decoding_sets(c, {Channel::identity(2)}, 0, 0.5, std::vector<SequenceSet>{SequenceSet(1, 2, {0, 1})});
  for (const auto& e : ds.entries)
    if (e.message == 1) {
      EXPECT_TRUE(e.btilde_empty);
      EXPECT_TRUE(e.c_set.empty());
    }
  EXPECT_GE(ds.empty_count, 1u);
}

TEST(DecodingSets, ZeroAlphaIsPrecondition) {
  const Code c = det_code(1, 2, {0, 1}, {1, 0});
  EXPECT_THROW(build_decoding_sets(c, {Channel::identity(2)}, 0, 0.0, std::vector<SequenceSet>{}), PreconditionError);
}

TEST(SpherePacking, Examples) {
  const BoundReport id = sphere_packing_check(identity_code(2), Channel::identity(2), 0.5, 0.0);
  EXPECT_TRUE(id.pass);
  EXPECT_NEAR(id.rows.front().slack, 0.0, 1e-12);
  const Channel bsc = Channel::bsc(0.1);
  const Code rep = det_code(2, 2, {0, 3}, ml_map(bsc, {0, 3}, 2));
  EXPECT_TRUE(sphere_packing_check(rep, bsc, 0.2, max_error(rep, {bsc}, 0)).pass);
  const Code one = det_code(2, 2, {1}, {0, 0, 0, 0});
  const BoundReport single = sphere_packing_check(one, bsc, 0.3, 0.0);
  EXPECT_TRUE(single.pass);
  EXPECT_EQ(single.rows.front().lhs, 0.0);
}

TEST(StrongFanoMax, IdentityCodeHasNoGap) {
  const FanoReport r = strong_fano_max(identity_code(2), {Channel::identity(2)});
  ASSERT_FALSE(r.rows.empty());
  for (const auto& row : r.rows)
    if (row.covered && row.q != 0) {
      EXPECT_NEAR(row.gap, 0.0, 1e-12);
      EXPECT_TRUE(row.dp_ok);
    }
  EXPECT_NEAR(r.zeta[0], 0.0, 1e-12);
  EXPECT_TRUE(r.markov);
}

TEST(StrongFanoMax, BscRepetitionCertificates) {
  const Channel bsc = Channel::bsc(0.1);
  const Code rep = det_code(2, 2, {0, 3}, ml_map(bsc, {0, 3}, 2));
  const FanoReport r = strong_fano_max(rep, {bsc});
  EXPECT_TRUE(r.certificates_ok);
  for (const auto& d : r.decoding) EXPECT_TRUE(d.multiplicity_ok);
  for (const auto& row : r.rows) {
    EXPECT_TRUE(row.dp_ok);
    EXPECT_GE(row.info, -1e-12);
    EXPECT_TRUE(std::isfinite(row.gap));
  }
  // Cells partition the positive-mass pairs.
  std::vector<int> seen(2, 0);
  for (const auto& cell : r.cell_pairs)
    for (std::size_t i : cell) ++seen.at(i);
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(StrongFanoMax, FullErrorIsPrecondition) {
  const Code c = det_code(1, 2, {0, 1}, {1, 0});
  EXPECT_THROW(strong_fano_max(c, {Channel::identity(2)}), PreconditionError);
}

TEST(StrongFanoAvg, IdentityCodePassesEverything) {
  const FanoReport r = strong_fano_avg(identity_code(2), {Channel::identity(2)});
  EXPECT_NEAR(r.passing_mass[0], 1.0, 1e-12);
  EXPECT_GE(r.star_mass[0], 0.25 - 1e-12);
  for (const auto& row : r.rows)
    if (row.covered && row.q != 0) {
      EXPECT_NEAR(row.gap, 0.0, 1e-12);
    }
}

TEST(StrongFanoAvg, ConstantChannelIsSmallN) {
  const Channel flat = Channel::make(2, 2, {{0.3, 0.7}, {0.3, 0.7}});
  const FanoReport r = strong_fano_avg(det_code(1, 2, {0, 1}, {0, 1}), {flat});
  EXPECT_NEAR(r.error[0], 0.5, 1e-15);
  for (const auto& row : r.rows) EXPECT_NEAR(row.info, 0.0, 1e-12);
  EXPECT_TRUE(r.small_n_regime);
}

TEST(StrongFanoAvg, BscRepetitionStructure) {
  const Channel bsc = Channel::bsc(0.1);
  const Code rep = det_code(2, 2, {0, 3}, ml_map(bsc, {0, 3}, 2));
  const FanoReport r = strong_fano_avg(rep, {bsc});
  EXPECT_TRUE(r.certificates_ok);
  EXPECT_GE(r.passing_mass[0], 0.0);
  for (bool ok : r.u_mass_ok) EXPECT_TRUE(ok);
  for (const auto& row : r.rows) EXPECT_TRUE(row.dp_ok);
}

TEST(StrongFano, BroadcastTwoReceivers) {
  // Two independent bits, receiver k decodes bit k from an identity channel.
  std::vector<std::vector<std::pair<SeqInt, double>>> enc;
  for (SeqInt m = 0; m < 4; ++m) enc.push_back({{m, 1.0}});
  const Code c = Code::make(2, 2, MessageSpace::make({2, 2}), enc,
                            {decoder_from_map({0}, 2, {0, 0, 1, 1}), decoder_from_map({1}, 2, {0, 1, 0, 1})});
  const FanoReport r = strong_fano_max(c, {Channel::identity(2), Channel::identity(2)});
  EXPECT_EQ(r.zeta.size(), 2u);
  EXPECT_FALSE(r.cond_rows.empty());
  for (const auto& row : r.cond_rows) EXPECT_TRUE(std::isfinite(row.gap));
}
