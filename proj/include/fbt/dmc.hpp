#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fbt/errors.hpp"
#include "fbt/numeric.hpp"
#include "fbt/parallel.hpp"

namespace fbt {

using SeqInt = std::uint64_t;

/// Above this many sequences, operations needing full enumeration raise CapacityError.
inline constexpr std::uint64_t kDenseCap = std::uint64_t{1} << 26;

struct Alphabet {
  std::size_t size = 0;
  std::vector<std::string> labels;

  static Alphabet make(std::size_t size, std::vector<std::string> labels = {}) {
    if (size < 1) throw ValidationError("alphabet size must be >= 1");
    if (!labels.empty()) {
      if (labels.size() != size) throw ValidationError("alphabet label count differs from size");
      std::set<std::string> seen(labels.begin(), labels.end());
      if (seen.size() != labels.size()) throw ValidationError("alphabet labels must be unique");
    }
    return Alphabet{size, std::move(labels)};
  }
};

/** @brief Row-stochastic transition matrix P(y|x) of a memoryless channel. */
class Channel {
 public:
  Channel() = default;

  static Channel make(std::size_t input_size, std::size_t output_size,
                      std::vector<std::vector<double>> rows, std::string name = "") {
    Channel ch;
    ch.in_ = Alphabet::make(input_size);
    ch.out_ = Alphabet::make(output_size);
    ch.name_ = std::move(name);
    if (rows.size() != input_size) throw ValidationError("channel needs one row per input symbol");
    ch.m_.reserve(input_size * output_size);
    for (const auto& r : rows) {
      if (r.size() != output_size) throw ValidationError("channel row length differs from output size");
      Accumulator acc;
      for (double v : r) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("channel entries must lie in [0,1]");
        acc.add(v);
        ch.m_.push_back(v);
      }
      if (std::fabs(acc.value() - 1.0) > 1e-12) throw ValidationError("channel row does not sum to 1");
    }
    return ch;
  }

  static Channel identity(std::size_t q) {
    std::vector<std::vector<double>> rows(q, std::vector<double>(q, 0.0));
    for (std::size_t i = 0; i < q; ++i) rows[i][i] = 1.0;
    return make(q, q, std::move(rows), "identity");
  }

  static Channel bsc(double p) {
    return make(2, 2, {{1.0 - p, p}, {p, 1.0 - p}}, "bsc");
  }

  std::size_t input_size() const { return in_.size; }
  std::size_t output_size() const { return out_.size; }
  const std::string& name() const { return name_; }
  double operator()(std::size_t x, std::size_t y) const { return m_[x * out_.size + y]; }
  std::vector<std::vector<double>> rows() const {
    std::vector<std::vector<double>> r(in_.size);
    for (std::size_t x = 0; x < in_.size; ++x)
      r[x].assign(m_.begin() + static_cast<std::ptrdiff_t>(x * out_.size),
                  m_.begin() + static_cast<std::ptrdiff_t>((x + 1) * out_.size));
    return r;
  }

 private:
  Alphabet in_, out_;
  std::string name_;
  std::vector<double> m_;
};

/** @brief Length-n word over a q-ary alphabet; digit 0 is the most significant. */
struct Sequence {
  std::size_t n = 0;
  std::size_t q = 0;
  SeqInt value = 0;

  static Sequence make(std::size_t n, std::size_t q, SeqInt value) {
    if (q < 1) throw ValidationError("alphabet size must be >= 1");
    if (value >= checked_pow(q, n)) throw DomainError("sequence value out of range");
    return Sequence{n, q, value};
  }

  static Sequence from_digits(std::size_t q, const std::vector<std::size_t>& digits) {
    SeqInt v = 0;
    checked_pow(q, digits.size());
    for (std::size_t d : digits) {
      if (d >= q) throw DomainError("digit exceeds alphabet");
      v = v * q + d;
    }
    return Sequence{digits.size(), q, v};
  }

  std::vector<std::size_t> digits() const { return digits_of(value, n, q); }

  static std::vector<std::size_t> digits_of(SeqInt v, std::size_t n, std::size_t q) {
    std::vector<std::size_t> d(n);
    for (std::size_t i = n; i-- > 0;) {
      d[i] = static_cast<std::size_t>(v % q);
      v /= q;
    }
    return d;
  }

  std::string str() const {
    std::string s;
    for (std::size_t d : digits()) s += (d < 10 ? std::to_string(d) : "(" + std::to_string(d) + ")");
    return s;
  }
};

/**
 * @brief Subset of a q-ary sequence space of blocklength n.
 *
 * Members are kept as a sorted list; spaces of at most 2^26 sequences also
 * carry a membership bitset. Both views describe the same set.
 */
class SequenceSet {
 public:
  SequenceSet() = default;

  SequenceSet(std::size_t n, std::size_t q, std::vector<SeqInt> members)
      : n_(n), q_(q), space_(checked_pow(q, n)), members_(std::move(members)) {
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
    if (!members_.empty() && members_.back() >= space_) throw DomainError("set member out of range");
    build_bits();
  }

  static SequenceSet full(std::size_t n, std::size_t q) {
    const std::uint64_t space = checked_pow(q, n);
    if (space > kDenseCap) throw CapacityError("full sequence space exceeds dense cap");
    std::vector<SeqInt> all(space);
    for (SeqInt i = 0; i < space; ++i) all[i] = i;
    return SequenceSet(n, q, std::move(all));
  }

  static SequenceSet from_bitset(std::size_t n, std::size_t q, const std::vector<std::uint64_t>& words) {
    std::vector<SeqInt> m;
    for (std::size_t w = 0; w < words.size(); ++w) {
      std::uint64_t bits = words[w];
      while (bits) {
        const int b = __builtin_ctzll(bits);
        m.push_back(static_cast<SeqInt>(w * 64 + static_cast<std::size_t>(b)));
        bits &= bits - 1;
      }
    }
    return SequenceSet(n, q, std::move(m));
  }

  std::size_t n() const { return n_; }
  std::size_t q() const { return q_; }
  std::uint64_t space() const { return space_; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  bool uses_bitset() const { return !bits_.empty() || (space_ <= kDenseCap && space_ > 0); }
  const std::vector<SeqInt>& members() const { return members_; }
  auto begin() const { return members_.begin(); }
  auto end() const { return members_.end(); }

  bool contains(SeqInt s) const {
    if (!bits_.empty()) return s < space_ && ((bits_[s >> 6] >> (s & 63)) & 1u);
    return std::binary_search(members_.begin(), members_.end(), s);
  }

  std::vector<std::uint64_t> to_bitset() const {
    if (space_ > kDenseCap) throw CapacityError("bitset view exceeds dense cap");
    std::vector<std::uint64_t> w((space_ + 63) / 64, 0);
    for (SeqInt s : members_) w[s >> 6] |= std::uint64_t{1} << (s & 63);
    return w;
  }

  bool same_space(const SequenceSet& o) const { return n_ == o.n_ && q_ == o.q_; }

  SequenceSet unite(const SequenceSet& o) const {
    check_space(o);
    std::vector<SeqInt> r;
    std::set_union(begin(), end(), o.begin(), o.end(), std::back_inserter(r));
    return SequenceSet(n_, q_, std::move(r));
  }
  SequenceSet intersect(const SequenceSet& o) const {
    check_space(o);
    std::vector<SeqInt> r;
    std::set_intersection(begin(), end(), o.begin(), o.end(), std::back_inserter(r));
    return SequenceSet(n_, q_, std::move(r));
  }
  SequenceSet subtract(const SequenceSet& o) const {
    check_space(o);
    std::vector<SeqInt> r;
    std::set_difference(begin(), end(), o.begin(), o.end(), std::back_inserter(r));
    return SequenceSet(n_, q_, std::move(r));
  }
  bool subset_of(const SequenceSet& o) const {
    check_space(o);
    return std::includes(o.begin(), o.end(), begin(), end());
  }

  friend bool operator==(const SequenceSet& a, const SequenceSet& b) {
    return a.n_ == b.n_ && a.q_ == b.q_ && a.members_ == b.members_;
  }

 private:
  void check_space(const SequenceSet& o) const {
    if (!same_space(o)) throw DimensionError("sequence sets live in different spaces");
  }
  void build_bits() {
    if (space_ > kDenseCap || space_ == 0) return;
    bits_ = to_bitset();
  }

  std::size_t n_ = 0;
  std::size_t q_ = 0;
  std::uint64_t space_ = 1;
  std::vector<SeqInt> members_;
  std::vector<std::uint64_t> bits_;
};

/** @brief Distribution over length-n sequences, stored on its positive-probability support. */
class SequenceDist {
 public:
  SequenceDist() = default;

  /// Zero-probability entries are dropped; sums must be within tol of 1.
  static SequenceDist from_entries(std::size_t n, std::size_t q,
                                   std::vector<std::pair<SeqInt, double>> entries, double tol = 1e-10) {
    if (n < 1) throw ValidationError("blocklength must be >= 1");
    std::sort(entries.begin(), entries.end());
    Accumulator acc;
    std::vector<SeqInt> s;
    std::vector<double> p;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& [x, v] = entries[i];
      if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("probabilities must be finite and >= 0");
      if (i > 0 && entries[i - 1].first == x) throw ValidationError("duplicate sequence in distribution");
      acc.add(v);
      if (v > 0.0) {
        s.push_back(x);
        p.push_back(v);
      }
    }
    if (std::fabs(acc.value() - 1.0) > tol) throw ValidationError("probabilities do not sum to 1");
    if (s.empty()) throw ValidationError("distribution has empty support");
    SequenceDist d;
    d.support_ = SequenceSet(n, q, s);
    d.p_ = std::move(p);
    return d;
  }

  static SequenceDist uniform(const SequenceSet& a) {
    if (a.empty()) throw DomainError("uniform distribution on an empty set");
    SequenceDist d;
    d.support_ = a;
    d.p_.assign(a.size(), 1.0 / static_cast<double>(a.size()));
    return d;
  }

  static SequenceDist point(std::size_t n, std::size_t q, SeqInt x) {
    SequenceDist d;
    d.support_ = SequenceSet(n, q, {x});
    d.p_ = {1.0};
    return d;
  }

  /// Trusted constructor for already-normalised positive weights aligned with a sorted support.
  static SequenceDist normalized(SequenceSet support, std::vector<double> weights) {
    Accumulator acc;
    for (double w : weights) acc.add(w);
    const double total = acc.value();
    if (!(total > 0.0)) throw ConditioningError("conditioning on a zero-probability event");
    std::vector<SeqInt> s;
    std::vector<double> p;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] > 0.0) {
        s.push_back(support.members()[i]);
        p.push_back(weights[i] / total);
      }
    }
    SequenceDist d;
    d.support_ = SequenceSet(support.n(), support.q(), std::move(s));
    d.p_ = std::move(p);
    return d;
  }

  std::size_t n() const { return support_.n(); }
  std::size_t q() const { return support_.q(); }
  const SequenceSet& support() const { return support_; }
  const std::vector<double>& probs() const { return p_; }

  double prob(SeqInt x) const {
    const auto& m = support_.members();
    auto it = std::lower_bound(m.begin(), m.end(), x);
    if (it == m.end() || *it != x) return 0.0;
    return p_[static_cast<std::size_t>(it - m.begin())];
  }

  double mass(const SequenceSet& a) const {
    if (!a.same_space(support_)) throw DimensionError("set and distribution live in different spaces");
    Accumulator acc;
    for (SeqInt x : a) acc.add(prob(x));
    return acc.value();
  }

  /// P(.|A); raises ConditioningError when P(A) = 0.
  SequenceDist conditioned_on(const SequenceSet& a) const {
    if (!a.same_space(support_)) throw DimensionError("set and distribution live in different spaces");
    std::vector<SeqInt> s;
    std::vector<double> w;
    for (SeqInt x : a) {
      const double v = prob(x);
      if (v > 0.0) {
        s.push_back(x);
        w.push_back(v);
      }
    }
    if (s.empty()) throw ConditioningError("conditioning on a zero-probability set");
    return normalized(SequenceSet(n(), q(), std::move(s)), std::move(w));
  }

 private:
  SequenceSet support_;
  std::vector<double> p_;
};

namespace detail {
inline void check_input(const Channel& ch, std::size_t q) {
  if (ch.input_size() != q) throw DimensionError("sequence alphabet differs from channel input alphabet");
}
}  // namespace detail

/**
 * @brief Transition probability of a whole block given its joint type counts.
 *
 * counts[a * |Y| + b] = #{i : x_i = a, y_i = b}. Factors are combined in a
 * fixed (a, b) order so blocks with equal joint types get bit-identical values.
 */
inline double type_prob(const Channel& ch, const std::vector<std::size_t>& counts, std::size_t n) {
  const std::size_t qy = ch.output_size();
  if (n < 8) {
    double r = 1.0;
    for (std::size_t i = 0; i < counts.size(); ++i)
      for (std::size_t c = 0; c < counts[i]; ++c) r *= ch(i / qy, i % qy);
    return r;
  }
  double lg = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) continue;
    const double p = ch(i / qy, i % qy);
    if (p == 0.0) return 0.0;
    lg += static_cast<double>(counts[i]) * std::log(p);
  }
  return std::exp(lg);
}

inline double product_prob(const Channel& ch, const Sequence& x, const Sequence& y) {
  if (x.n != y.n) throw DimensionError("input and output blocklengths differ");
  detail::check_input(ch, x.q);
  if (y.q != ch.output_size()) throw DimensionError("sequence alphabet differs from channel output alphabet");
  const auto xd = x.digits();
  const auto yd = y.digits();
  std::vector<std::size_t> counts(ch.input_size() * ch.output_size(), 0);
  for (std::size_t i = 0; i < x.n; ++i) ++counts[xd[i] * ch.output_size() + yd[i]];
  return type_prob(ch, counts, x.n);
}

/// The row P^n(.|x) over all |Y|^n outputs.
inline std::vector<double> channel_row(const Channel& ch, SeqInt x, std::size_t n) {
  const std::size_t qx = ch.input_size();
  const std::size_t qy = ch.output_size();
  const std::uint64_t ny = checked_pow(qy, n);
  if (ny > kDenseCap) throw CapacityError("output space exceeds dense cap");
  const auto xd = Sequence::digits_of(x, n, qx);
  std::vector<std::size_t> counts(qx * qy, 0);
  std::vector<std::size_t> yd(n, 0);
  for (std::size_t i = 0; i < n; ++i) ++counts[xd[i] * qy];
  std::vector<double> row(ny);
  for (std::uint64_t y = 0;; ++y) {
    row[y] = type_prob(ch, counts, n);
    if (y + 1 == ny) break;
    for (std::size_t i = n; i-- > 0;) {
      --counts[xd[i] * qy + yd[i]];
      if (++yd[i] < qy) {
        ++counts[xd[i] * qy + yd[i]];
        break;
      }
      yd[i] = 0;
      ++counts[xd[i] * qy];
    }
  }
  return row;
}

/// Dense output vector of P_{Y^n} = sum_x P(x) P^n(.|x), accumulated in ascending x order.
inline std::vector<double> output_vector(const Channel& ch, const SequenceDist& input) {
  detail::check_input(ch, input.q());
  const std::size_t n = input.n();
  const std::uint64_t ny = checked_pow(ch.output_size(), n);
  if (ny > kDenseCap) throw CapacityError("output space exceeds dense cap");
  const auto& xs = input.support().members();
  const auto& px = input.probs();
  std::vector<Accumulator> acc(ny);
  constexpr std::size_t kBatch = 16;
  std::vector<std::vector<double>> rows(kBatch);
  for (std::size_t start = 0; start < xs.size(); start += kBatch) {
    const std::size_t len = std::min(kBatch, xs.size() - start);
    parallel_for(len, [&](std::size_t i) { rows[i] = channel_row(ch, xs[start + i], n); });
    for (std::size_t i = 0; i < len; ++i) {
      const double w = px[start + i];
      const auto& r = rows[i];
      for (std::uint64_t y = 0; y < ny; ++y)
        if (r[y] != 0.0) acc[y].add(w * r[y]);
    }
  }
  std::vector<double> out(ny);
  for (std::uint64_t y = 0; y < ny; ++y) out[y] = acc[y].value();
  return out;
}

inline SequenceDist dist_from_vector(std::size_t n, std::size_t q, const std::vector<double>& v) {
  std::vector<SeqInt> s;
  std::vector<double> p;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] > 0.0) {
      s.push_back(i);
      p.push_back(v[i]);
    }
  return SequenceDist::normalized(SequenceSet(n, q, std::move(s)), std::move(p));
}

inline SequenceDist output_dist(const Channel& ch, const SequenceDist& input) {
  if (input.support().empty()) throw DomainError("input distribution has empty support");
  return dist_from_vector(input.n(), ch.output_size(), output_vector(ch, input));
}

inline SequenceDist cond_output_given_set(const Channel& ch, const SequenceDist& input, const SequenceSet& a) {
  return output_dist(ch, input.conditioned_on(a));
}

inline double info_density(const SequenceDist& dist, SeqInt x) {
  const double p = dist.prob(x);
  if (!(p > 0.0)) throw DomainError("information density outside the support");
  const double v = -std::log2(p) / static_cast<double>(dist.n());
  return v < 0.0 ? 0.0 : v;
}

inline double info_density(const SequenceDist& dist, const Sequence& x) {
  if (x.n != dist.n() || x.q != dist.q()) throw DimensionError("sequence does not match distribution space");
  return info_density(dist, x.value);
}

/// Entropy in bits of a probability vector (not renormalised).
inline double entropy(std::span<const double> p) {
  Accumulator acc;
  for (double v : p) acc.add(plogp(v));
  return acc.value();
}

inline double entropy(const SequenceDist& d) { return entropy(std::span<const double>(d.probs())); }

/** @brief Joint pmf on a finite rectangle, row-major. */
struct Joint {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> p;

  double at(std::size_t r, std::size_t c) const { return p[r * cols + c]; }
  std::vector<double> row_marginal() const {
    std::vector<double> m(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      Accumulator a;
      for (std::size_t c = 0; c < cols; ++c) a.add(at(r, c));
      m[r] = a.value();
    }
    return m;
  }
  std::vector<double> col_marginal() const {
    std::vector<double> m(cols);
    for (std::size_t c = 0; c < cols; ++c) {
      Accumulator a;
      for (std::size_t r = 0; r < rows; ++r) a.add(at(r, c));
      m[c] = a.value();
    }
    return m;
  }
};

inline void validate_joint(const Joint& j) {
  if (j.p.size() != j.rows * j.cols) throw ValidationError("joint matrix has inconsistent shape");
  Accumulator acc;
  for (double v : j.p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("joint entries must be finite and >= 0");
    acc.add(v);
  }
  if (std::fabs(acc.value() - 1.0) > 1e-10) throw ValidationError("joint does not sum to 1");
}

/// I(row; col) in bits, clamped at 0 against rounding.
inline double mutual_information(const Joint& j) {
  validate_joint(j);
  const auto r = j.row_marginal();
  const auto c = j.col_marginal();
  const double v = entropy(r) + entropy(c) - entropy(std::span<const double>(j.p));
  return v < 0.0 ? 0.0 : v;
}

inline Joint joint_from_rows(const std::vector<std::vector<double>>& rows) {
  Joint j;
  j.rows = rows.size();
  j.cols = rows.empty() ? 0 : rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != j.cols) throw ValidationError("ragged joint matrix");
    j.p.insert(j.p.end(), r.begin(), r.end());
  }
  return j;
}

/// H(Y^n | X^n in A) for X^n ~ input.
inline double cond_output_entropy(const Channel& ch, const SequenceDist& input, const SequenceSet& a) {
  return entropy(cond_output_given_set(ch, input, a));
}

}  // namespace fbt
