#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "fbt/dmc.hpp"
#include "fbt/images.hpp"
#include "fbt/parallel.hpp"
#include "fbt/partitioner.hpp"
#include "fbt/spectrum.hpp"

namespace fbt {

/** @brief Tally for one unconditional property over all randomized trials. */
struct LemmaTally {
  std::string name;
  std::size_t checks = 0;
  std::size_t failures = 0;
  /// Trials where an exact image size was needed but the instance exceeded the solver cap.
  std::size_t skipped = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  std::string first_failure;
};

struct LemmaSuiteReport {
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  std::vector<std::size_t> blocklengths;
  std::vector<LemmaTally> tallies;
  bool pass = true;
};

namespace detail {

enum LemmaId : std::size_t {
  kBinSize,
  kBinUniformity,
  kGammaEntropy,
  kQuasiBelowImage,
  kMonotoneEta,
  kMonotoneSet,
  kBlowup,
  kEntropyPerturbation,
  kDataProcessing,
  kLemmaCount
};

inline const char* lemma_name(std::size_t id) {
  static const char* names[] = {"bin_size_bounds",       "bin_conditional_uniformity", "gamma_uniform_entropy",
                                "quasi_image_below_image", "image_monotone_in_eta",     "image_monotone_in_set",
                                "blowup_composition",    "entropy_perturbation",       "data_processing"};
  return names[id];
}

struct TrialOutcome {
  struct Item {
    std::size_t checks = 0;
    std::size_t failures = 0;
    std::size_t skipped = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    std::string first_failure;
  };
  Item items[kLemmaCount];

  void add(std::size_t id, double slack, bool ok, const std::string& what) {
    Item& it = items[id];
    ++it.checks;
    it.min_slack = std::min(it.min_slack, slack);
    if (!ok) {
      if (it.failures == 0) it.first_failure = what;
      ++it.failures;
    }
  }
  void add_report(std::size_t id, const BoundReport& r, const std::string& ctx) {
    for (const auto& row : r.rows) add(id, row.slack, row.holds, ctx + ": " + row.label);
  }
  void skip(std::size_t id) { ++items[id].skipped; }
};

inline Channel random_channel(std::mt19937_64& rng, std::size_t qx, std::size_t qy) {
  std::exponential_distribution<double> e(1.0);
  std::vector<std::vector<double>> rows(qx, std::vector<double>(qy));
  for (auto& r : rows) {
    double s = 0.0;
    for (double& v : r) s += v = e(rng);
    for (double& v : r) v /= s;
    // Renormalise against the row-sum tolerance.
    double t = 0.0;
    for (std::size_t y = 0; y + 1 < qy; ++y) t += r[y];
    r[qy - 1] = std::max(0.0, 1.0 - t);
  }
  return Channel::make(qx, qy, rows);
}

inline SequenceSet random_subset(std::mt19937_64& rng, std::size_t n, std::size_t q, std::size_t count) {
  const std::uint64_t space = checked_pow(q, n);
  count = static_cast<std::size_t>(std::min<std::uint64_t>(count, space));
  std::uniform_int_distribution<std::uint64_t> pick(0, space - 1);
  std::vector<SeqInt> m;
  while (m.size() < count) {
    const SeqInt x = pick(rng);
    if (std::find(m.begin(), m.end(), x) == m.end()) m.push_back(x);
  }
  return SequenceSet(n, q, std::move(m));
}

inline SequenceDist random_dist(std::mt19937_64& rng, const SequenceSet& support) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(support.size());
  for (double& v : w) v = e(rng);
  return SequenceDist::normalized(support, std::move(w));
}

inline double uniform01(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// One randomized trial at blocklength n; every draw comes from rng.
inline TrialOutcome lemma_trial(std::size_t n, std::mt19937_64& rng, const ImageSolverOptions& opt) {
  TrialOutcome out;
  const std::string ctx = "n=" + std::to_string(n);
  const std::size_t qx = n <= 4 && rng() % 2 == 0 ? 3 : 2;
  const std::size_t qy = n <= 4 && rng() % 2 == 0 ? 3 : 2;
  const Channel ch = random_channel(rng, qx, qy);
  const std::uint64_t xspace = checked_pow(qx, n);
  const std::size_t supp = 1 + static_cast<std::size_t>(rng() % std::min<std::uint64_t>(xspace, 48));
  const SequenceSet support = random_subset(rng, n, qx, supp);
  const SequenceDist dist = random_dist(rng, support);

  // Spectrum bins.
  {
    const double dn = uniform01(rng, 0.05, 0.95);
    const double delta = uniform01(rng, 0.1, 2.0);
    const SpectrumPartition sp = build_spectrum_partition(dist, dn, delta);
    out.add_report(kBinSize, verify_bin_size_bounds(sp, dist), ctx);
    out.add_report(kBinUniformity, verify_bin_conditional_uniformity(sp, dist), ctx);
  }

  // gamma-uniform entropy bounds on a random subset of the support.
  {
    const SequenceSet a = random_subset(rng, n, qx, 1 + rng() % support.size());
    std::vector<SeqInt> inside;
    for (SeqInt x : a)
      if (support.contains(x)) inside.push_back(x);
    if (inside.empty()) inside.push_back(support.members().front());
    const UniformityReport u = uniformity(dist, SequenceSet(n, qx, inside));
    const double lo = u.log_card - std::log2(u.gamma);
    out.add(kGammaEntropy, std::min(u.entropy - lo, u.log_card - u.entropy), u.entropy_bounds_hold, ctx);
  }

  // Images: quasi <= exact, monotone in eta and in A, blow-up.
  {
    const std::size_t cap = n >= 6 ? 2 : 3;
    const std::size_t k2 = 1 + rng() % cap;
    const SequenceSet a2 = random_subset(rng, n, qx, k2);
    const SequenceSet a1(n, qx, {a2.members().front()});
    double e1 = uniform01(rng, 0.2, 0.95);
    double e2 = uniform01(rng, 0.2, 0.95);
    if (e1 > e2) std::swap(e1, e2);

    const QuasiImageResult qb1 = min_quasi_image(ch, a2, e1);
    const QuasiImageResult qb2 = min_quasi_image(ch, a2, e2);
    const ImageBracket g1 = image_size(ch, a2, e1, opt);
    const ImageBracket g2 = image_size(ch, a2, e2, opt);
    const ImageBracket gs = image_size(ch, a1, e1, opt);

    out.add(kQuasiBelowImage, static_cast<double>(g1.lower) - static_cast<double>(qb1.size),
            qb1.size <= g1.lower, ctx + ": quasi <= image");
    out.add(kQuasiBelowImage, static_cast<double>(g1.upper) - static_cast<double>(g1.lower), g1.lower <= g1.upper,
            ctx + ": bracket ordered");
    double worst = 1.0;
    for (SeqInt x : a2) worst = std::min(worst, set_prob(channel_row(ch, x, n), g1.upper_witness));
    out.add(kQuasiBelowImage, worst - e1, geq(worst, e1), ctx + ": witness is an eta-image");

    out.add(kMonotoneEta, static_cast<double>(qb2.size) - static_cast<double>(qb1.size), qb1.size <= qb2.size,
            ctx + ": quasi monotone in eta");
    if (g1.exact && g2.exact)
      out.add(kMonotoneEta, static_cast<double>(g2.upper) - static_cast<double>(g1.upper), g1.upper <= g2.upper,
              ctx + ": image monotone in eta");
    else
      out.skip(kMonotoneEta);
    if (g1.exact && gs.exact)
      out.add(kMonotoneSet, static_cast<double>(g1.upper) - static_cast<double>(gs.upper), gs.upper <= g1.upper,
              ctx + ": image monotone in A");
    else
      out.skip(kMonotoneSet);

    const std::size_t la = rng() % (n / 2 + 1);
    const std::size_t lb = rng() % (n - la + 1);
    const SequenceSet& b = g1.upper_witness;
    const SequenceSet composed = hamming_blowup(hamming_blowup(b, lb), la);
    const SequenceSet direct = hamming_blowup(b, la + lb);
    out.add(kBlowup, 0.0, composed == direct, ctx + ": blow-up composes");
    out.add(kBlowup, 0.0, b.subset_of(direct), ctx + ": blow-up contains the set");
    double blown = 1.0;
    for (SeqInt x : a2) blown = std::min(blown, set_prob(channel_row(ch, x, n), direct));
    out.add(kBlowup, blown - worst, geq(blown, worst), ctx + ": blow-up keeps the image property");
  }

  // Entropy perturbation on a random event of positive mass.
  {
    const SequenceSet s = random_subset(rng, n, qx, 1 + rng() % support.size());
    std::vector<SeqInt> inside;
    for (SeqInt x : s)
      if (support.contains(x)) inside.push_back(x);
    if (inside.empty()) inside.push_back(support.members().back());
    const SequenceSet ev(n, qx, inside);
    const double p = dist.mass(ev);
    const BoundReport r = entropy_perturbation_bound(entropy(dist), entropy(dist.conditioned_on(ev)), p,
                                                     log2_count(support.size()), n);
    out.add_report(kEntropyPerturbation, r, ctx);
  }

  // Data processing: U -> X^n -> Y^n with U a random labelling of the support.
  {
    const std::uint64_t ny = checked_pow(qy, n);
    const std::size_t labels = 1 + rng() % std::min<std::size_t>(4, support.size());
    std::vector<std::vector<double>> xy, uy(labels, std::vector<double>(ny, 0.0));
    std::vector<double> hx;
    for (std::size_t i = 0; i < support.size(); ++i) {
      const SeqInt x = support.members()[i];
      const double px = dist.probs()[i];
      const auto row = channel_row(ch, x, n);
      std::vector<double> j(ny);
      const std::size_t u = rng() % labels;
      for (std::size_t y = 0; y < ny; ++y) {
        j[y] = px * row[y];
        uy[u][y] += j[y];
      }
      xy.push_back(std::move(j));
    }
    auto normalise = [](std::vector<std::vector<double>>& m) {
      Accumulator a;
      for (auto& r : m)
        for (double v : r) a.add(v);
      for (auto& r : m)
        for (double& v : r) v /= a.value();
    };
    normalise(xy);
    normalise(uy);
    const double ixy = mutual_information(joint_from_rows(xy));
    const double iuy = mutual_information(joint_from_rows(uy));
    const double hxn = entropy(dist);
    const double cap = static_cast<double>(n) * std::log2(static_cast<double>(qy));
    out.add(kDataProcessing, ixy - iuy, iuy <= ixy + 1e-9, ctx + ": I(U;Y) <= I(X;Y)");
    out.add(kDataProcessing, std::min(hxn, cap) - ixy, ixy <= std::min(hxn, cap) + 1e-9,
            ctx + ": I(X;Y) <= min(H(X), n log|Y|)");
  }
  return out;
}

}  // namespace detail

/// Runs every unconditional property `trials` times at each blocklength.
inline LemmaSuiteReport run_lemma_suite(std::uint64_t seed, std::size_t trials, const std::vector<std::size_t>& ns,
                                        const ImageSolverOptions& opt = {}) {
  LemmaSuiteReport rep;
  rep.seed = seed;
  rep.trials = trials;
  rep.blocklengths = ns;
  for (std::size_t n : ns)
    if (n < 1 || n > 12) throw DomainError("lemma suite blocklengths must lie in [1,12]");
  std::vector<detail::TrialOutcome> outcomes(ns.size() * trials);
  parallel_for(outcomes.size(), [&](std::size_t i) {
    const std::size_t n = ns[i / trials];
    std::seed_seq sq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                     static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(i % trials)};
    std::mt19937_64 rng(sq);
    outcomes[i] = detail::lemma_trial(n, rng, opt);
  });
  for (std::size_t id = 0; id < detail::kLemmaCount; ++id) {
    LemmaTally t;
    t.name = detail::lemma_name(id);
    for (const auto& o : outcomes) {
      const auto& it = o.items[id];
      t.checks += it.checks;
      t.skipped += it.skipped;
      t.min_slack = std::min(t.min_slack, it.min_slack);
      if (it.failures > 0 && t.failures == 0) t.first_failure = it.first_failure;
      t.failures += it.failures;
    }
    rep.pass = rep.pass && t.failures == 0;
    rep.tallies.push_back(std::move(t));
  }
  return rep;
}

}  // namespace fbt
