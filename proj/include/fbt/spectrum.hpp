#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fbt/dmc.hpp"
#include "fbt/report.hpp"

namespace fbt {

/** @brief Bins of a support set by information density, widths delta_n, tail bin K. */
struct SpectrumPartition {
  std::size_t n = 0;
  double delta_n = 0.0;
  double delta = 0.0;
  std::size_t K = 0;
  /// bins[k] for k in [0, K]; empty bins are kept so indices align.
  std::vector<SequenceSet> bins;
  std::vector<double> bin_mass;
  std::vector<std::string> warnings;
};

/// ceil((delta + log2_size / n) / delta_n) on the 1e-12 grid.
inline std::size_t spectrum_bin_count(double delta_n, double delta, double log2_size, std::size_t n) {
  const double t = snap((delta + log2_size / static_cast<double>(n)) / delta_n);
  if (!(t < 1e8)) throw CapacityError("spectrum partition would have more than 1e8 bins");
  return static_cast<std::size_t>(std::ceil(t));
}

/// Bin index of an information density: k with k*dn <= i < (k+1)*dn, or K for the tail.
inline std::size_t spectrum_bin(double info, double delta_n, std::size_t K) {
  double f = std::floor(info / delta_n);
  if (f < 0) f = 0;
  std::size_t k = f > static_cast<double>(K) ? K : static_cast<std::size_t>(f);
  while (k < K && geq(info, static_cast<double>(k + 1) * delta_n)) ++k;
  while (k > 0 && lt(info, static_cast<double>(k) * delta_n)) --k;
  return k;
}

/**
 * @brief (delta_n, delta) spectrum partition of the support of dist.
 *
 * ambient_log2_size replaces log2|support| in the bin count when the partition
 * is taken over a larger ambient set (e.g. the whole output space).
 */
inline SpectrumPartition build_spectrum_partition(const SequenceDist& dist, double delta_n, double delta,
                                                  std::optional<double> ambient_log2_size = std::nullopt) {
  if (!(delta_n > 0.0 && delta_n < 1.0)) throw DomainError("delta_n must lie in (0,1)");
  if (!(delta > 0.0)) throw DomainError("delta must be positive");
  if (dist.support().empty()) throw DomainError("empty support");
  SpectrumPartition sp;
  sp.n = dist.n();
  sp.delta_n = delta_n;
  sp.delta = delta;
  if (delta >= 1.0) sp.warnings.push_back("delta >= 1");
  const double lg = ambient_log2_size ? *ambient_log2_size : log2_count(dist.support().size());
  sp.K = spectrum_bin_count(delta_n, delta, lg, sp.n);
  std::vector<std::vector<SeqInt>> members(sp.K + 1);
  std::vector<Accumulator> mass(sp.K + 1);
  const auto& xs = dist.support().members();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const std::size_t k = spectrum_bin(info_density(dist, xs[i]), delta_n, sp.K);
    members[k].push_back(xs[i]);
    mass[k].add(dist.probs()[i]);
  }
  sp.bins.reserve(sp.K + 1);
  for (std::size_t k = 0; k <= sp.K; ++k) {
    sp.bins.emplace_back(sp.n, dist.q(), std::move(members[k]));
    sp.bin_mass.push_back(mass[k].value());
  }
  return sp;
}

/// aexp(A) = (1/n) log2 |A|.
inline double aexp(std::size_t card, std::size_t n) {
  return card == 0 ? -std::numeric_limits<double>::infinity() : log2_count(card) / static_cast<double>(n);
}

inline BoundReport verify_bin_size_bounds(const SpectrumPartition& sp, const SequenceDist& dist) {
  BoundReport rep;
  rep.name = "bin_size_bounds";
  const double n = static_cast<double>(sp.n);
  const double heavy = std::exp2(-n * sp.delta_n);
  for (std::size_t k = 0; k <= sp.K; ++k) {
    const auto& b = sp.bins[k];
    if (b.empty()) continue;
    const double a = aexp(b.size(), sp.n);
    const std::string tag = "bin " + std::to_string(k);
    rep.check_le(tag + ": aexp < (k+1)dn", a, static_cast<double>(k + 1) * sp.delta_n, true);
    if (dist.mass(b) > heavy)
      rep.check_le(tag + ": |aexp - k dn| < dn", std::fabs(a - static_cast<double>(k) * sp.delta_n), sp.delta_n,
                   true);
  }
  return rep;
}

inline BoundReport verify_bin_conditional_uniformity(const SpectrumPartition& sp, const SequenceDist& dist) {
  BoundReport rep;
  rep.name = "bin_conditional_uniformity";
  const double spread = std::exp2(static_cast<double>(sp.n) * sp.delta_n);
  for (std::size_t k = 0; k < sp.K; ++k) {
    const auto& b = sp.bins[k];
    const double pk = dist.mass(b);
    if (!(pk > 0.0)) continue;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (SeqInt x : b) {
      const double c = dist.prob(x) / pk;
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    const double card = static_cast<double>(b.size());
    const std::string tag = "bin " + std::to_string(k);
    const double lower = 1.0 / (spread * card);
    const double upper = spread / card;
    rep.check_le(tag + ": 2^{-n dn}/|A_k| < P(x|A_k)", lower, lo, true, 1e-9 * lo);
    rep.check_le(tag + ": P(x|A_k) < 2^{n dn}/|A_k|", hi, upper, true, 1e-9 * upper);
  }
  return rep;
}

struct UniformityReport {
  double gamma = 1.0;
  double max_atom = 0.0;
  double min_atom = 0.0;
  /// H(X^n | X^n in A) in bits.
  double entropy = 0.0;
  double log_card = 0.0;
  bool entropy_bounds_hold = true;
};

/// Zero-probability members of A are ignored.
inline UniformityReport uniformity(const SequenceDist& dist, const SequenceSet& a) {
  const SequenceDist c = dist.conditioned_on(a);
  UniformityReport r;
  const auto& p = c.probs();
  r.max_atom = *std::max_element(p.begin(), p.end());
  r.min_atom = *std::min_element(p.begin(), p.end());
  r.gamma = r.max_atom / r.min_atom;
  r.entropy = entropy(c);
  r.log_card = log2_count(p.size());
  r.entropy_bounds_hold =
      r.log_card - std::log2(r.gamma) <= r.entropy + 1e-9 && r.entropy <= r.log_card + 1e-9;
  return r;
}

using Label = std::uint64_t;

/** @brief Labelled partition of a ground set of sequences; each sequence carries one label. */
class PartitioningIndex {
 public:
  PartitioningIndex() = default;

  static PartitioningIndex from_labels(std::size_t n, std::size_t q, std::vector<std::pair<SeqInt, Label>> labels) {
    std::sort(labels.begin(), labels.end());
    PartitioningIndex pi;
    std::vector<SeqInt> g;
    std::map<Label, std::vector<SeqInt>> cells;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (i > 0 && labels[i - 1].first == labels[i].first)
        throw ValidationError("sequence carries more than one label");
      g.push_back(labels[i].first);
      pi.labels_.push_back(labels[i].second);
      cells[labels[i].second].push_back(labels[i].first);
    }
    pi.ground_ = SequenceSet(n, q, std::move(g));
    for (auto& [l, m] : cells) pi.cells_.emplace(l, SequenceSet(n, q, std::move(m)));
    return pi;
  }

  /// The trivial index with a single cell labelled 0.
  static PartitioningIndex trivial(const SequenceSet& a) {
    std::vector<std::pair<SeqInt, Label>> l;
    for (SeqInt x : a) l.emplace_back(x, 0);
    return from_labels(a.n(), a.q(), std::move(l));
  }

  const SequenceSet& ground() const { return ground_; }
  const std::map<Label, SequenceSet>& cells() const { return cells_; }
  std::size_t cell_count() const { return cells_.size(); }

  Label label_of(SeqInt x) const {
    const auto& m = ground_.members();
    auto it = std::lower_bound(m.begin(), m.end(), x);
    if (it == m.end() || *it != x) throw DomainError("sequence outside the ground set");
    return labels_[static_cast<std::size_t>(it - m.begin())];
  }

  Label max_label() const { return cells_.empty() ? 0 : cells_.rbegin()->first; }

  /// Whether the ground set is exactly the support of dist.
  bool partitions(const SequenceDist& dist) const { return ground_ == dist.support(); }

  std::vector<std::pair<SeqInt, Label>> entries() const {
    std::vector<std::pair<SeqInt, Label>> e;
    for (std::size_t i = 0; i < labels_.size(); ++i) e.emplace_back(ground_.members()[i], labels_[i]);
    return e;
  }

 private:
  SequenceSet ground_;
  std::vector<Label> labels_;
  std::map<Label, SequenceSet> cells_;
};

/// Cells A' intersect A_{M=m}; empty cells disappear.
inline PartitioningIndex restrict_index(const PartitioningIndex& pi, const SequenceSet& sub) {
  if (sub.empty()) throw DomainError("restriction to an empty set");
  if (!sub.same_space(pi.ground()) || !sub.subset_of(pi.ground()))
    throw DimensionError("restriction set is not inside the ground set");
  std::vector<std::pair<SeqInt, Label>> l;
  for (SeqInt x : sub) l.emplace_back(x, pi.label_of(x));
  return PartitioningIndex::from_labels(sub.n(), sub.q(), std::move(l));
}

/// Label of the pair (l1, l2) is l1 * (max label of pi2 + 1) + l2.
inline PartitioningIndex product_index(const PartitioningIndex& a, const PartitioningIndex& b) {
  if (!(a.ground() == b.ground())) throw DimensionError("product of indices on different ground sets");
  const Label base = b.max_label() + 1;
  if (a.max_label() > std::numeric_limits<Label>::max() / base - 1) throw CapacityError("product label overflow");
  std::vector<std::pair<SeqInt, Label>> l;
  for (SeqInt x : a.ground()) l.emplace_back(x, a.label_of(x) * base + b.label_of(x));
  return PartitioningIndex::from_labels(a.ground().n(), a.ground().q(), std::move(l));
}

}  // namespace fbt
