#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "fbt/dmc.hpp"
#include "fbt/report.hpp"

namespace fbt {

struct QuasiImageResult {
  std::size_t size = 0;
  SequenceSet witness;
  double eta_achieved = 0.0;
};

/** @brief lower <= g(A, eta) <= upper, with a certified eta-image of size upper. */
struct ImageBracket {
  std::size_t lower = 0;
  std::size_t upper = 0;
  SequenceSet upper_witness;
  bool exact = false;
  std::string lower_method;
  std::string upper_method;
};

struct ImageSolverOptions {
  /// Exact search runs only when the relevant output columns fall into at most this many
  /// classes of identical weight vectors.
  std::size_t max_classes = 24;
  std::uint64_t node_limit = 20'000'000;
};

struct GapReport {
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t g_alpha = 0;
  std::size_t g_beta = 0;
  double gap = 0.0;
};

namespace detail {

inline void check_eta(double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw DomainError("eta must lie in (0,1]");
}

/** @brief Rows P^n(.|x), x in A, restricted to outputs some row can reach. */
struct RowMatrix {
  std::size_t n = 0;
  std::size_t qy = 0;
  std::vector<SeqInt> cols;
  std::size_t rows = 0;
  std::vector<double> w;

  double at(std::size_t r, std::size_t c) const { return w[r * cols.size() + c]; }
};

inline RowMatrix build_rows(const Channel& ch, const SequenceSet& a, std::uint64_t cap) {
  if (a.q() != ch.input_size()) throw DimensionError("set alphabet differs from channel input alphabet");
  const std::uint64_t ny = checked_pow(ch.output_size(), a.n());
  if (ny > cap) throw CapacityError("output space exceeds image solver enumeration cap");
  std::vector<std::vector<double>> full(a.size());
  parallel_for(a.size(), [&](std::size_t i) { full[i] = channel_row(ch, a.members()[i], a.n()); });
  RowMatrix m;
  m.n = a.n();
  m.qy = ch.output_size();
  m.rows = a.size();
  for (std::uint64_t y = 0; y < ny; ++y) {
    bool any = false;
    for (const auto& r : full) any = any || r[y] > 0.0;
    if (any) m.cols.push_back(y);
  }
  m.w.resize(m.rows * m.cols.size());
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols.size(); ++c) m.w[r * m.cols.size() + c] = full[r][m.cols[c]];
  return m;
}

inline std::size_t prefix_count(std::vector<double> v, double eta) {
  std::sort(v.begin(), v.end(), std::greater<>());
  Accumulator acc;
  for (std::size_t i = 0; i < v.size(); ++i) {
    acc.add(v[i]);
    if (geq(acc.value(), eta)) return i + 1;
  }
  throw DomainError("eta exceeds the total mass");
}

inline QuasiImageResult quasi_from_output(const SequenceDist& py, double eta) {
  std::vector<std::size_t> idx(py.probs().size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto& p = py.probs();
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  Accumulator acc;
  std::vector<SeqInt> picked;
  for (std::size_t i : idx) {
    acc.add(p[i]);
    picked.push_back(py.support().members()[i]);
    if (geq(acc.value(), eta)) return {picked.size(), SequenceSet(py.n(), py.q(), picked), acc.value()};
  }
  throw DomainError("eta exceeds the total mass");
}

/// Greedy multi-cover: add the output whose smallest capped deficit reduction over
/// unsatisfied rows is largest; ties by total reduction, then by ascending output.
inline std::vector<std::size_t> greedy_cover(const RowMatrix& m, double eta) {
  std::vector<Accumulator> mass(m.rows);
  std::vector<char> used(m.cols.size(), 0);
  std::vector<std::size_t> picked;
  auto open = [&](std::size_t r) { return !geq(mass[r].value(), eta); };
  for (;;) {
    bool any_open = false;
    for (std::size_t r = 0; r < m.rows; ++r) any_open = any_open || open(r);
    if (!any_open) break;
    double best_min = -1.0;
    double best_tot = -1.0;
    std::size_t best = m.cols.size();
    for (std::size_t c = 0; c < m.cols.size(); ++c) {
      if (used[c]) continue;
      double mn = std::numeric_limits<double>::infinity();
      double tot = 0.0;
      for (std::size_t r = 0; r < m.rows; ++r) {
        if (!open(r)) continue;
        const double red = std::min(eta - mass[r].value(), m.at(r, c));
        mn = std::min(mn, red);
        tot += red;
      }
      if (mn > best_min || (mn == best_min && tot > best_tot)) {
        best_min = mn;
        best_tot = tot;
        best = c;
      }
    }
    if (best == m.cols.size() || !(best_tot > 0.0)) throw InvariantError("greedy cover stalled");
    used[best] = 1;
    picked.push_back(best);
    for (std::size_t r = 0; r < m.rows; ++r) mass[r].add(m.at(r, best));
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

inline SequenceSet columns_to_set(const RowMatrix& m, const std::vector<std::size_t>& cs) {
  std::vector<SeqInt> v;
  for (std::size_t c : cs) v.push_back(m.cols[c]);
  return SequenceSet(m.n, m.qy, std::move(v));
}

inline ImageBracket bracket_from_rows(const Channel& ch, const SequenceSet& a, const RowMatrix& m, double eta) {
  ImageBracket b;
  const auto cover = greedy_cover(m, eta);
  b.upper = cover.size();
  b.upper_witness = columns_to_set(m, cover);
  b.upper_method = "greedy_cover";
  const std::size_t nc = m.cols.size();
  std::size_t single = 0;
  std::vector<std::size_t> own(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) {
    std::vector<double> row(m.w.begin() + static_cast<std::ptrdiff_t>(r * nc),
                            m.w.begin() + static_cast<std::ptrdiff_t>((r + 1) * nc));
    own[r] = prefix_count(std::move(row), eta);
    single = std::max(single, own[r]);
  }
  // Rows with pairwise disjoint supports need disjoint parts of any image, so their
  // singleton sizes add up. Rows are packed greedily by decreasing singleton size.
  std::vector<std::size_t> order(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) order[r] = r;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return own[x] > own[y]; });
  std::vector<char> taken(nc, 0);
  std::size_t packed = 0;
  for (std::size_t r : order) {
    bool free = true;
    for (std::size_t c = 0; c < nc && free; ++c) free = !(m.at(r, c) > 0.0 && taken[c]);
    if (!free) continue;
    for (std::size_t c = 0; c < nc; ++c)
      if (m.at(r, c) > 0.0) taken[c] = 1;
    packed += own[r];
  }
  const std::size_t quasi = quasi_from_output(cond_output_given_set(ch, SequenceDist::uniform(a), a), eta).size;
  b.lower = std::max({single, quasi, packed});
  b.lower_method = packed > std::max(single, quasi) ? "disjoint_packing"
                   : single >= quasi                ? "max_singleton"
                                                    : "uniform_quasi_image";
  b.exact = b.lower == b.upper;
  return b;
}

/** @brief Depth-first search for an eta-image of at most s columns taken in a fixed order. */
class CoverSearch {
 public:
  CoverSearch(const RowMatrix& m, const std::vector<std::size_t>& cls, std::size_t ncls, double eta,
              std::vector<std::size_t> order, std::size_t s, std::uint64_t& nodes, std::uint64_t limit)
      : m_(m), cls_(cls), eta_(eta), order_(std::move(order)), s_(s), nodes_(nodes), limit_(limit),
        banned_(ncls, 0) {
    const std::size_t nc = order_.size();
    top_.assign(m_.rows, std::vector<double>((nc + 1) * (s_ + 1), 0.0));
    for (std::size_t r = 0; r < m_.rows; ++r) {
      std::vector<double> best;
      for (std::size_t pos = nc + 1; pos-- > 0;) {
        if (pos < nc) {
          const double v = m_.at(r, order_[pos]);
          best.insert(std::upper_bound(best.begin(), best.end(), v, std::greater<>()), v);
          if (best.size() > s_) best.pop_back();
        }
        double run = 0.0;
        auto* t = &top_[r][pos * (s_ + 1)];
        for (std::size_t k = 0; k <= s_; ++k) {
          if (k > 0 && k - 1 < best.size()) run += best[k - 1];
          t[k] = run;
        }
      }
    }
    stack_.assign(nc + 1, std::vector<double>(m_.rows, 0.0));
  }

  bool run(std::vector<std::size_t>& picked) {
    picked_.clear();
    const bool ok = dfs(0, 0);
    picked = picked_;
    return ok;
  }

 private:
  bool dfs(std::size_t pos, std::size_t chosen) {
    if (++nodes_ > limit_) throw CapacityError("exact image search exceeded its node limit");
    const auto& mass = stack_[chosen];
    bool all = true;
    for (std::size_t r = 0; r < m_.rows && all; ++r) all = geq(mass[r], eta_);
    if (all) return true;
    if (chosen == s_ || pos == order_.size()) return false;
    const std::size_t rem = s_ - chosen;
    for (std::size_t r = 0; r < m_.rows; ++r)
      if (!geq(mass[r] + top_[r][pos * (s_ + 1) + rem], eta_)) return false;
    const std::size_t c = order_[pos];
    const std::size_t k = cls_[c];
    if (banned_[k]) return dfs(pos + 1, chosen);
    auto& next = stack_[chosen + 1];
    for (std::size_t r = 0; r < m_.rows; ++r) next[r] = mass[r] + m_.at(r, c);
    picked_.push_back(c);
    if (dfs(pos + 1, chosen + 1)) return true;
    picked_.pop_back();
    // A solution skipping this column never needs a later column with identical weights.
    banned_[k] = 1;
    const bool ok = dfs(pos + 1, chosen);
    banned_[k] = 0;
    return ok;
  }

  const RowMatrix& m_;
  const std::vector<std::size_t>& cls_;
  double eta_;
  std::vector<std::size_t> order_;
  std::size_t s_;
  std::uint64_t& nodes_;
  std::uint64_t limit_;
  std::vector<char> banned_;
  std::vector<std::vector<double>> top_;
  std::vector<std::vector<double>> stack_;
  std::vector<std::size_t> picked_;
};

}  // namespace detail

/// Minimum eta-quasi-image of A under P_{Y^n | X^n in A}; the greedy prefix is optimal.
inline QuasiImageResult min_quasi_image(const Channel& ch, const SequenceDist& input, const SequenceSet& a,
                                        double eta) {
  detail::check_eta(eta);
  return detail::quasi_from_output(cond_output_given_set(ch, input, a), eta);
}

/// Uniform input on A.
inline QuasiImageResult min_quasi_image(const Channel& ch, const SequenceSet& a, double eta) {
  if (a.empty()) throw ConditioningError("quasi-image of an empty set");
  return min_quasi_image(ch, SequenceDist::uniform(a), a, eta);
}

inline std::size_t singleton_image_size(const Channel& ch, const Sequence& x, double eta) {
  detail::check_eta(eta);
  if (x.q != ch.input_size()) throw DimensionError("sequence alphabet differs from channel input alphabet");
  return detail::prefix_count(channel_row(ch, x.value, x.n), eta);
}

inline ImageBracket min_image_bracket(const Channel& ch, const SequenceSet& a, double eta) {
  detail::check_eta(eta);
  if (a.empty()) return {0, 0, SequenceSet(a.n(), ch.output_size(), {}), true, "empty", "empty"};
  const auto m = detail::build_rows(ch, a, kDenseCap);
  return detail::bracket_from_rows(ch, a, m, eta);
}

/**
 * @brief Exact g(A, eta) with the lexicographically least witness of that size.
 *
 * Outputs with identical weight vectors over A form classes; the search is
 * capped by the number of classes (at most |Y|^n).
 */
inline ImageBracket min_image_exact(const Channel& ch, const SequenceSet& a, double eta,
                                    const ImageSolverOptions& opt = {}) {
  detail::check_eta(eta);
  if (a.empty()) return {0, 0, SequenceSet(a.n(), ch.output_size(), {}), true, "empty", "empty"};
  const auto m = detail::build_rows(ch, a, std::uint64_t{1} << 20);
  const std::size_t nc = m.cols.size();
  std::vector<std::size_t> cls(nc);
  std::map<std::vector<double>, std::size_t> ids;
  for (std::size_t c = 0; c < nc; ++c) {
    std::vector<double> key(m.rows);
    for (std::size_t r = 0; r < m.rows; ++r) key[r] = m.at(r, c);
    cls[c] = ids.emplace(std::move(key), ids.size()).first->second;
  }
  if (ids.size() > opt.max_classes)
    throw CapacityError("exact image instance has " + std::to_string(ids.size()) + " output classes (cap " +
                        std::to_string(opt.max_classes) + ")");
  ImageBracket b = detail::bracket_from_rows(ch, a, m, eta);
  std::uint64_t nodes = 0;
  std::size_t g = b.upper;
  if (!b.exact) {
    std::vector<std::size_t> order(nc);
    std::vector<double> cover(nc, 0.0);
    for (std::size_t c = 0; c < nc; ++c) {
      order[c] = c;
      for (std::size_t r = 0; r < m.rows; ++r) cover[c] += std::min(eta, m.at(r, c));
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return cover[x] > cover[y]; });
    for (std::size_t s = b.lower; s < b.upper; ++s) {
      std::vector<std::size_t> picked;
      detail::CoverSearch search(m, cls, ids.size(), eta, order, s, nodes, opt.node_limit);
      if (search.run(picked)) {
        g = s;
        break;
      }
    }
  }
  std::vector<std::size_t> asc(nc);
  for (std::size_t c = 0; c < nc; ++c) asc[c] = c;
  std::vector<std::size_t> picked;
  detail::CoverSearch lex(m, cls, ids.size(), eta, asc, g, nodes, opt.node_limit);
  if (!lex.run(picked)) throw InvariantError("exact image search lost its optimum");
  return {g, g, detail::columns_to_set(m, picked), true, "exact_search", "exact_search"};
}

/// Exact when within the solver cap, otherwise the bracket.
inline ImageBracket image_size(const Channel& ch, const SequenceSet& a, double eta,
                               const ImageSolverOptions& opt = {}) {
  try {
    return min_image_exact(ch, a, eta, opt);
  } catch (const CapacityError&) {
    return min_image_bracket(ch, a, eta);
  }
}

inline SequenceSet hamming_blowup(const SequenceSet& b, std::size_t l) {
  const std::size_t n = b.n();
  const std::size_t q = b.q();
  if (l > n) throw DomainError("blow-up radius exceeds blocklength");
  std::vector<SeqInt> pw(n, 1);
  for (std::size_t i = n; i-- > 1;) pw[i - 1] = pw[i] * q;
  std::vector<SeqInt> seen(b.begin(), b.end());
  std::vector<SeqInt> frontier = seen;
  std::sort(seen.begin(), seen.end());
  for (std::size_t step = 0; step < l && !frontier.empty(); ++step) {
    std::vector<SeqInt> next;
    for (SeqInt s : frontier) {
      for (std::size_t i = 0; i < n; ++i) {
        const SeqInt d = (s / pw[i]) % q;
        for (SeqInt a = 0; a < q; ++a) {
          if (a == d) continue;
          const SeqInt t = s - d * pw[i] + a * pw[i];
          if (!std::binary_search(seen.begin(), seen.end(), t)) next.push_back(t);
        }
      }
    }
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    std::vector<SeqInt> merged;
    std::merge(seen.begin(), seen.end(), next.begin(), next.end(), std::back_inserter(merged));
    seen = std::move(merged);
    frontier = std::move(next);
  }
  return SequenceSet(n, q, std::move(seen));
}

inline GapReport image_exponent_gap(const Channel& ch, const SequenceSet& a, double alpha, double beta,
                                    const ImageSolverOptions& opt = {}) {
  if (!(alpha > 0.0 && alpha < beta && beta < 1.0)) throw DomainError("need 0 < alpha < beta < 1");
  GapReport r;
  r.alpha = alpha;
  r.beta = beta;
  r.g_alpha = min_image_exact(ch, a, alpha, opt).upper;
  r.g_beta = min_image_exact(ch, a, beta, opt).upper;
  r.gap = snap((log2_count(r.g_beta) - log2_count(r.g_alpha)) / static_cast<double>(a.n()));
  return r;
}

struct EntropyBoundReport {
  BoundReport report;
  /// (1/n) log2 g(A', eta), from the certified lower end of the bracket.
  double image_exponent = 0.0;
  /// (1/n) H(Y^n | X^n in A').
  double entropy_rate = 0.0;
  /// entropy_rate - image_exponent.
  double slack = 0.0;
  bool exact = false;
};

/// Checks image_exponent >= entropy_rate - allowance; infinite allowance only records.
inline EntropyBoundReport verify_entropy_lower_bound(const Channel& ch, const SequenceDist& input,
                                                     const SequenceSet& a, double eta,
                                                     double allowance = std::numeric_limits<double>::infinity(),
                                                     const ImageSolverOptions& opt = {}) {
  const double n = static_cast<double>(a.n());
  EntropyBoundReport r;
  const ImageBracket g = image_size(ch, a, eta, opt);
  r.exact = g.exact;
  r.image_exponent = log2_count(g.lower) / n;
  r.entropy_rate = cond_output_entropy(ch, input, a) / n;
  r.slack = r.entropy_rate - r.image_exponent;
  r.report.name = "image_size_vs_entropy";
  r.report.check_le("H(Y|X in A')/n - allowance <= log2 g/n", r.entropy_rate - allowance, r.image_exponent, false);
  r.report.record("measured slack", r.slack, 0.0);
  return r;
}

}  // namespace fbt
