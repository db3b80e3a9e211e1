#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fbt/dmc.hpp"
#include "fbt/images.hpp"
#include "fbt/partitioner.hpp"
#include "fbt/report.hpp"
#include "fbt/spectrum.hpp"

namespace fbt {

/** @brief J message components with a joint pmf; flattened index has component 0 most significant. */
struct MessageSpace {
  std::vector<std::size_t> sizes;
  std::vector<double> joint;

  static MessageSpace make(std::vector<std::size_t> sizes, std::vector<double> joint = {}) {
    if (sizes.empty()) throw ValidationError("at least one message component is required");
    std::size_t total = 1;
    for (std::size_t s : sizes) {
      if (s < 1) throw ValidationError("message sets must be nonempty");
      total *= s;
    }
    if (joint.empty()) joint.assign(total, 1.0 / static_cast<double>(total));
    if (joint.size() != total) throw ValidationError("joint message pmf has the wrong length");
    Accumulator acc;
    for (double p : joint) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("message probabilities must be >= 0");
      acc.add(p);
    }
    if (std::fabs(acc.value() - 1.0) > 1e-10) throw ValidationError("message pmf does not sum to 1");
    return {std::move(sizes), std::move(joint)};
  }

  std::size_t J() const { return sizes.size(); }
  std::size_t total() const { return joint.size(); }

  std::vector<std::size_t> unflatten(std::size_t m) const {
    std::vector<std::size_t> c(sizes.size());
    for (std::size_t j = sizes.size(); j-- > 0;) {
      c[j] = m % sizes[j];
      m /= sizes[j];
    }
    return c;
  }

  /// Flattened index of the projection onto the components in S (ascending, mixed radix).
  std::size_t project(std::size_t m, const std::vector<std::size_t>& s) const {
    const auto c = unflatten(m);
    std::size_t r = 0;
    for (std::size_t j : s) r = r * sizes[j] + c[j];
    return r;
  }

  std::size_t size_of(const std::vector<std::size_t>& s) const {
    std::size_t r = 1;
    for (std::size_t j : s) r *= sizes[j];
    return r;
  }
};

/** @brief Stochastic decoder P(m_S | y^n) for one receiver, one row per output sequence. */
struct Decoder {
  std::vector<std::size_t> S;
  std::size_t cols = 0;
  std::vector<double> rows;

  double at(SeqInt y, std::size_t m) const { return rows[y * cols + m]; }
  std::size_t row_count() const { return cols == 0 ? 0 : rows.size() / cols; }
};

struct Code {
  std::size_t n = 0;
  std::size_t input_size = 0;
  MessageSpace messages;
  /// encoder[m]: sparse P(x^n | m) for every flattened message m.
  std::vector<std::vector<std::pair<SeqInt, double>>> encoder;
  std::vector<Decoder> decoders;

  static Code make(std::size_t n, std::size_t input_size, MessageSpace ms,
                   std::vector<std::vector<std::pair<SeqInt, double>>> enc, std::vector<Decoder> decs) {
    if (n < 1) throw ValidationError("blocklength must be >= 1");
    const std::uint64_t space = checked_pow(input_size, n);
    if (enc.size() != ms.total()) throw ValidationError("encoder needs one row per message tuple");
    for (auto& row : enc) {
      Accumulator acc;
      std::sort(row.begin(), row.end());
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (row[i].first >= space) throw ValidationError("codeword outside the input space");
        if (i > 0 && row[i - 1].first == row[i].first) throw ValidationError("duplicate codeword in encoder row");
        if (!(row[i].second >= 0.0)) throw ValidationError("encoder probabilities must be >= 0");
        acc.add(row[i].second);
      }
      if (std::fabs(acc.value() - 1.0) > 1e-10) throw ValidationError("encoder row does not sum to 1");
    }
    if (decs.empty()) throw ValidationError("at least one decoder is required");
    for (auto& d : decs) {
      if (d.S.empty()) throw ValidationError("decoder message set S_k must be nonempty");
      std::sort(d.S.begin(), d.S.end());
      if (std::adjacent_find(d.S.begin(), d.S.end()) != d.S.end()) throw ValidationError("repeated index in S_k");
      if (d.S.back() >= ms.J()) throw ValidationError("S_k refers to a missing message component");
      d.cols = ms.size_of(d.S);
      if (d.rows.size() % d.cols != 0) throw ValidationError("decoder rows have the wrong width");
      for (std::size_t y = 0; y < d.row_count(); ++y) {
        Accumulator acc;
        for (std::size_t c = 0; c < d.cols; ++c) {
          const double v = d.at(y, c);
          if (!(v >= 0.0)) throw ValidationError("decoder probabilities must be >= 0");
          acc.add(v);
        }
        if (std::fabs(acc.value() - 1.0) > 1e-10) throw ValidationError("decoder row does not sum to 1");
      }
    }
    return {n, input_size, std::move(ms), std::move(enc), std::move(decs)};
  }
};

/// Deterministic decoder from a map y -> message index.
inline Decoder decoder_from_map(std::vector<std::size_t> S, std::size_t cols, const std::vector<std::size_t>& map) {
  Decoder d;
  d.S = std::move(S);
  d.cols = cols;
  d.rows.assign(map.size() * cols, 0.0);
  for (std::size_t y = 0; y < map.size(); ++y) d.rows[y * cols + map[y]] = 1.0;
  return d;
}

namespace detail {

struct PairAtom {
  std::size_t m = 0;
  SeqInt x = 0;
  double p = 0.0;
};

inline std::vector<PairAtom> code_pairs(const Code& c) {
  std::vector<PairAtom> out;
  for (std::size_t m = 0; m < c.messages.total(); ++m) {
    const double pm = c.messages.joint[m];
    if (!(pm > 0.0)) continue;
    for (const auto& [x, px] : c.encoder[m])
      if (px > 0.0) out.push_back({m, x, pm * px});
  }
  return out;
}

inline void check_receiver(const Code& c, const std::vector<Channel>& chs, std::size_t k) {
  if (chs.size() != c.decoders.size()) throw DimensionError("need one channel per decoder");
  if (k >= chs.size()) throw DimensionError("receiver index out of range");
  if (chs[k].input_size() != c.input_size) throw DimensionError("channel input alphabet differs from the code");
  const std::uint64_t ny = checked_pow(chs[k].output_size(), c.n);
  if (ny > kDenseCap) throw CapacityError("output space exceeds dense cap");
  if (c.decoders[k].row_count() != ny) throw DimensionError("decoder needs one row per output sequence");
}

/** @brief Caches P^n(.|x) rows per channel. */
class RowCache {
 public:
  RowCache(const Channel& ch, std::size_t n) : ch_(ch), n_(n) {}
  const std::vector<double>& row(SeqInt x) {
    auto it = rows_.find(x);
    if (it == rows_.end()) it = rows_.emplace(x, channel_row(ch_, x, n_)).first;
    return it->second;
  }

 private:
  const Channel& ch_;
  std::size_t n_;
  std::map<SeqInt, std::vector<double>> rows_;
};

/// Pr{decoder k outputs the S_k-projection of m | X^n = x}.
inline double success_prob(const Code& c, std::size_t k, const std::vector<double>& row, std::size_t m) {
  const Decoder& d = c.decoders[k];
  const std::size_t ms = c.messages.project(m, d.S);
  Accumulator acc;
  for (std::size_t y = 0; y < row.size(); ++y)
    if (row[y] > 0.0) acc.add(row[y] * d.at(y, ms));
  return acc.value();
}

inline std::vector<double> success_table(const Code& c, const std::vector<Channel>& chs, std::size_t k,
                                         const std::vector<PairAtom>& pairs) {
  check_receiver(c, chs, k);
  RowCache cache(chs[k], c.n);
  std::vector<double> s(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) s[i] = success_prob(c, k, cache.row(pairs[i].x), pairs[i].m);
  return s;
}

}  // namespace detail

inline double max_error(const Code& c, const std::vector<Channel>& chs, std::size_t k) {
  const auto pairs = detail::code_pairs(c);
  const auto s = detail::success_table(c, chs, k, pairs);
  // Pairs sharing (m_{S_k}, x) have equal success probability, so the max over pairs is the max over them.
  double e = 0.0;
  for (double v : s) e = std::max(e, 1.0 - v);
  return std::clamp(e, 0.0, 1.0);
}

inline double avg_error(const Code& c, const std::vector<Channel>& chs, std::size_t k) {
  const auto pairs = detail::code_pairs(c);
  const auto s = detail::success_table(c, chs, k, pairs);
  Accumulator acc;
  for (std::size_t i = 0; i < pairs.size(); ++i) acc.add(pairs[i].p * s[i]);
  return std::clamp(1.0 - acc.value(), 0.0, 1.0);
}

/// (eps / n) * card_bits + 1/n.
inline double classic_fano(double eps, double card_bits, std::size_t n) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw DomainError("eps must lie in [0,1]");
  const double nn = static_cast<double>(n);
  return eps * card_bits / nn + 1.0 / nn;
}

// ---------------------------------------------------------------------------
// Decoding sets

struct DecodingEntry {
  std::size_t cell = 0;
  std::size_t message = 0;
  std::size_t cell_message_size = 0;
  SequenceSet c_set;
  /// min over the cell-message set of P^n(C | x).
  double min_prob = 0.0;
  bool certified = false;
  bool btilde_empty = false;
};

struct DecodingSets {
  std::size_t k = 0;
  double alpha = 0.0;
  std::vector<std::size_t> image_size;
  std::vector<bool> image_exact;
  std::vector<DecodingEntry> entries;
  std::size_t multiplicity_max = 0;
  std::size_t multiplicity_bound = 0;
  bool multiplicity_ok = true;
  bool certificates_ok = true;
  std::size_t empty_count = 0;
};

/// A cell is a list of (flattened message, codeword) pairs.
using PairCell = std::vector<std::pair<std::size_t, SeqInt>>;

inline DecodingSets build_decoding_sets(const Code& c, const std::vector<Channel>& chs, std::size_t k, double alpha,
                                        const std::vector<PairCell>& cells, const ImageSolverOptions& opt = {}) {
  if (!(alpha > 0.0)) throw PreconditionError("alpha must be positive (maximum error below 1)");
  if (alpha > 1.0) throw DomainError("alpha must not exceed 1");
  detail::check_receiver(c, chs, k);
  const Channel& ch = chs[k];
  const Decoder& d = c.decoders[k];
  DecodingSets out;
  out.k = k;
  out.alpha = alpha;
  out.multiplicity_bound = static_cast<std::size_t>(std::floor(snap(2.0 / alpha)));
  detail::RowCache cache(ch, c.n);
  std::vector<SequenceSet> btilde(d.cols);
  for (std::size_t m = 0; m < d.cols; ++m) {
    std::vector<SeqInt> ys;
    for (std::size_t y = 0; y < d.row_count(); ++y)
      if (geq(d.at(y, m), alpha / 2.0)) ys.push_back(y);
    btilde[m] = SequenceSet(c.n, ch.output_size(), std::move(ys));
  }
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    std::map<std::size_t, std::vector<SeqInt>> by_m;
    std::vector<SeqInt> xs;
    for (const auto& [m, x] : cells[ci]) {
      by_m[c.messages.project(m, d.S)].push_back(x);
      xs.push_back(x);
    }
    const SequenceSet a(c.n, c.input_size, xs);
    const ImageBracket b = image_size(ch, a, 1.0 - alpha / 4.0, opt);
    out.image_size.push_back(b.upper);
    out.image_exact.push_back(b.exact);
    std::map<SeqInt, std::size_t> mult;
    for (auto& [ms, mx] : by_m) {
      DecodingEntry e;
      e.cell = ci;
      e.message = ms;
      const SequenceSet amc(c.n, c.input_size, mx);
      e.cell_message_size = amc.size();
      e.c_set = b.upper_witness.intersect(btilde[ms]);
      e.btilde_empty = btilde[ms].empty();
      e.min_prob = std::numeric_limits<double>::infinity();
      for (SeqInt x : amc) e.min_prob = std::min(e.min_prob, detail::set_prob(cache.row(x), e.c_set));
      e.certified = geq(e.min_prob, alpha / 4.0);
      out.certificates_ok = out.certificates_ok && e.certified;
      out.empty_count += e.c_set.empty() ? 1 : 0;
      for (SeqInt y : e.c_set) ++mult[y];
      out.entries.push_back(std::move(e));
    }
    for (const auto& [y, cnt] : mult) out.multiplicity_max = std::max(out.multiplicity_max, cnt);
  }
  out.multiplicity_ok = out.multiplicity_max <= out.multiplicity_bound;
  return out;
}

/// Cells given as codeword sets; each codeword carries every message with positive mass on it.
inline DecodingSets build_decoding_sets(const Code& c, const std::vector<Channel>& chs, std::size_t k, double alpha,
                                        const std::vector<SequenceSet>& cells, const ImageSolverOptions& opt = {}) {
  const auto pairs = detail::code_pairs(c);
  std::vector<PairCell> pc;
  for (const auto& cell : cells) {
    PairCell v;
    for (const auto& pa : pairs)
      if (cell.contains(pa.x)) v.emplace_back(pa.m, pa.x);
    pc.push_back(std::move(v));
  }
  return build_decoding_sets(c, chs, k, alpha, pc, opt);
}

// ---------------------------------------------------------------------------
// Sphere packing

inline BoundReport sphere_packing_check(const Code& c, const Channel& ch, double mu, double eps,
                                        const ImageSolverOptions& opt = {}) {
  if (!(mu > 0.0) || !(eps >= 0.0) || !(mu + eps < 1.0)) throw PreconditionError("need mu > 0, eps >= 0, mu + eps < 1");
  const std::vector<Channel> chs{ch};
  if (c.decoders.size() != 1) throw PreconditionError("sphere packing check takes a single-receiver code");
  const auto pairs = detail::code_pairs(c);
  std::map<std::size_t, SeqInt> f;
  for (const auto& pa : pairs) {
    if (f.count(pa.m)) throw PreconditionError("encoder must be deterministic");
    f[pa.m] = pa.x;
  }
  const Decoder& d = c.decoders[0];
  for (double v : d.rows)
    if (v != 0.0 && v != 1.0) throw PreconditionError("decoder must be deterministic");
  const double err = max_error(c, chs, 0);
  if (eps < err - 1e-12) throw PreconditionError("eps is below the code's maximum error");
  std::vector<SeqInt> cw;
  for (const auto& [m, x] : f) cw.push_back(x);
  const SequenceSet a(c.n, c.input_size, cw);
  const double n = static_cast<double>(c.n);
  double min_single = std::numeric_limits<double>::infinity();
  for (const auto& [m, x] : f)
    min_single = std::min(min_single, log2_count(singleton_image_size(ch, Sequence::make(c.n, c.input_size, x), mu)) / n);
  const ImageBracket g = image_size(ch, a, mu + eps, opt);
  BoundReport r;
  r.name = "sphere_packing";
  // With a bracket, the upper end keeps the check sound (g <= upper).
  r.check_le("aexp|M| <= log2 g(A, mu+eps)/n - min_m log2 g(f(m), mu)/n", log2_count(f.size()) / n,
             log2_count(g.upper) / n - min_single, false, 1e-12);
  r.record("image exact", g.exact ? 1.0 : 0.0, 1.0);
  return r;
}

// ---------------------------------------------------------------------------
// Strong Fano inequalities

struct FanoParams {
  double eta = 0.5;
  /// W slicing range; <= 0 selects log2|X|.
  double delta = 0.0;
  double rho = 1.0;
  VstarParams vstar;
  /// Average-error split threshold; unset selects (1 - err) / log2 n (log2 n floored at 1).
  std::optional<double> alpha_avg;
};

struct FanoCell {
  std::size_t q = 0;
  bool q0 = false;
  /// Average-error pipeline: receiver subset T as a bitmask (0 when unused).
  std::size_t u = 0;
  std::size_t w = 0;
  std::size_t v = 0;
  std::size_t size = 0;
  double mass = 0.0;
};

struct FanoRow {
  std::size_t k = 0;
  std::size_t q = 0;
  bool q0 = false;
  /// Receiver k is among those the cell's sub-code guarantees (always true for the max pipeline).
  bool covered = true;
  double mass = 0.0;
  std::size_t card = 0;
  double aexp_m = 0.0;
  /// (1/n) I(M_{S_k}; Y_k^n | Q = q).
  double info = 0.0;
  /// (1/n) H(M_{S_k} | Q = q).
  double entropy = 0.0;
  double gap = 0.0;
  bool dp_ok = true;
};

struct CondRow {
  std::size_t k = 0;
  std::size_t q = 0;
  std::vector<std::size_t> sbar;
  double lhs = 0.0;
  double info = 0.0;
  double entropy = 0.0;
  double gap = 0.0;
};

struct FanoReport {
  std::string kind;
  std::size_t n = 0;
  std::vector<double> error;
  std::vector<double> alpha;
  bool appended = false;
  std::size_t n_tilde = 0;
  /// The size formula ceil(log_|X| prod ceil(1/alpha_k)) was large enough.
  bool n_tilde_formula_ok = true;
  std::vector<FanoCell> cells;
  /// Members of each cell as indices into the code's positive-mass (message, codeword) pairs.
  std::vector<std::vector<std::size_t>> cell_pairs;
  std::vector<FanoRow> rows;
  std::vector<CondRow> cond_rows;
  /// Per receiver: max gap over covered, non-q0 cells.
  std::vector<double> zeta;
  std::vector<DecodingSets> decoding;
  std::vector<double> classic;
  bool markov = true;
  bool w_partitions_set = true;
  bool w_partitions_messages = true;
  bool vstar_within_caps = true;
  bool vstar_partitions = true;
  double q0_mass = 0.0;
  double q0_bound = 0.0;
  bool q0_within = true;
  std::size_t q_count = 0;
  bool certificates_ok = true;
  // Average-error pipeline.
  double alpha_n = 0.0;
  std::vector<double> u_mass;
  std::vector<bool> u_mass_ok;
  std::vector<double> passing_mass;
  std::vector<double> passing_target;
  std::vector<double> star_mass;
  std::vector<double> star_target;
  std::vector<double> star_delta;
  /// Per receiver: max over Q*_k of aexp M_{S_k} - I/n (NaN when Q*_k is empty).
  std::vector<double> corollary_gap;
  std::vector<std::vector<std::size_t>> passing;
  std::vector<std::vector<std::size_t>> star;
  bool small_n_regime = false;
};

namespace detail {

struct MaxCells {
  /// cells[0] is q0.
  std::vector<std::vector<std::size_t>> cells;
  std::vector<std::size_t> w_of;
  std::vector<std::size_t> v_of;
  bool appended = false;
  std::size_t n_tilde = 0;
  bool n_tilde_formula_ok = true;
  bool w_partitions_set = true;
  bool w_partitions_messages = true;
  bool vstar_within_caps = true;
  bool vstar_partitions = true;
};

/// Q = (W, V*) over the pairs (indices into `pairs`, weights renormalised internally).
inline MaxCells build_q_cells(const Code& c, const std::vector<PairAtom>& pairs, const std::vector<std::size_t>& idx,
                              const std::vector<Channel>& chs, const std::vector<double>& alphas,
                              const FanoParams& prm) {
  MaxCells out;
  const std::size_t qx = c.input_size;
  std::map<SeqInt, std::vector<std::size_t>> by_x;
  for (std::size_t i : idx) by_x[pairs[i].x].push_back(i);
  std::size_t most = 0;
  for (auto& [x, v] : by_x) {
    std::sort(v.begin(), v.end(), [&](std::size_t a, std::size_t b) { return pairs[a].m < pairs[b].m; });
    most = std::max(most, v.size());
  }
  std::size_t nt = 0;
  if (most > 1) {
    out.appended = true;
    if (qx < 2) throw CapacityError("cannot append symbols over a unary input alphabet");
    std::uint64_t prod = 1;
    for (double a : alphas) prod *= static_cast<std::uint64_t>(std::ceil(snap(1.0 / a)));
    std::uint64_t reach = 1;
    while (reach < prod) {
      reach *= qx;
      ++nt;
    }
    if (reach < most) {
      out.n_tilde_formula_ok = false;
      while (reach < most) {
        reach *= qx;
        ++nt;
      }
    }
  }
  out.n_tilde = nt;
  const std::size_t n2 = c.n + nt;
  const std::uint64_t shift = checked_pow(qx, nt);
  std::vector<SeqInt> ext(pairs.size(), 0);
  std::vector<std::pair<SeqInt, double>> entries;
  std::vector<std::pair<SeqInt, Label>> labels;
  std::map<SeqInt, std::size_t> pair_of_ext;
  double total = 0.0;
  for (std::size_t i : idx) total += pairs[i].p;
  for (auto& [x, v] : by_x)
    for (std::size_t t = 0; t < v.size(); ++t) {
      const SeqInt e = x * shift + t;
      ext[v[t]] = e;
      pair_of_ext[e] = v[t];
      entries.emplace_back(e, pairs[v[t]].p / total);
      labels.emplace_back(e, pairs[v[t]].m);
    }
  const SequenceDist dist = SequenceDist::from_entries(n2, qx, entries, 1e-9);
  const PartitioningIndex mi = PartitioningIndex::from_labels(n2, qx, labels);
  const double delta = prm.delta > 0.0 ? prm.delta : std::max(1e-3, std::log2(static_cast<double>(qx)));
  const WPartition w = build_W(dist, mi, delta, prm.rho);
  out.w_partitions_set = w.partitions_set;
  out.w_partitions_messages = w.partitions_messages;
  auto to_pairs = [&](const SequenceSet& s) {
    std::vector<std::size_t> r;
    for (SeqInt e : s) r.push_back(pair_of_ext.at(e));
    std::sort(r.begin(), r.end());
    return r;
  };
  out.cells.push_back(to_pairs(w.cells.front().members));
  out.w_of.push_back(0);
  out.v_of.push_back(0);
  for (std::size_t wi = 1; wi < w.cells.size(); ++wi) {
    const SequenceSet& cell = w.cells[wi].members;
    std::vector<PartitioningIndex> comps;
    for (std::size_t j = 0; j < c.messages.J(); ++j) {
      std::vector<std::pair<SeqInt, Label>> lj;
      for (SeqInt e : cell) lj.emplace_back(e, c.messages.unflatten(pairs[pair_of_ext.at(e)].m)[j]);
      comps.push_back(PartitioningIndex::from_labels(n2, qx, std::move(lj)));
    }
    VstarParams vp = prm.vstar;
    vp.eta = prm.eta;
    const EqualImagePartition vs = build_Vstar(chs, dist, cell, comps, vp);
    out.vstar_within_caps = out.vstar_within_caps && vs.within_cap;
    out.vstar_partitions = out.vstar_partitions && vs.partitions;
    for (const auto& vc : vs.cells) {
      out.cells.push_back(to_pairs(vc.members));
      out.w_of.push_back(w.index.label_of(cell.members().front()));
      out.v_of.push_back(vc.id);
    }
  }
  return out;
}

struct InfoTerms {
  std::size_t card = 0;
  double h = 0.0;
  double i = 0.0;
};

/// Cardinality, H(M_S) and I(M_S; Y^n) for pairs restricted to a cell, in bits.
inline InfoTerms info_terms(const Code& c, const std::vector<PairAtom>& pairs, const std::vector<std::size_t>& cell,
                            const std::vector<std::size_t>& s, RowCache& cache, std::size_t ny) {
  std::map<std::size_t, std::vector<std::size_t>> by_m;
  double total = 0.0;
  for (std::size_t i : cell) {
    by_m[c.messages.project(pairs[i].m, s)].push_back(i);
    total += pairs[i].p;
  }
  InfoTerms t;
  t.card = by_m.size();
  if (by_m.empty() || !(total > 0.0)) return t;
  Joint j;
  j.rows = by_m.size();
  j.cols = ny;
  j.p.assign(j.rows * ny, 0.0);
  std::size_t r = 0;
  for (auto& [m, ids] : by_m) {
    std::vector<Accumulator> acc(ny);
    for (std::size_t i : ids) {
      const auto& row = cache.row(pairs[i].x);
      const double w = pairs[i].p / total;
      for (std::size_t y = 0; y < ny; ++y)
        if (row[y] > 0.0) acc[y].add(w * row[y]);
    }
    for (std::size_t y = 0; y < ny; ++y) j.p[r * ny + y] = acc[y].value();
    ++r;
  }
  Accumulator sum;
  for (double v : j.p) sum.add(v);
  const double z = sum.value();
  for (double& v : j.p) v /= z;
  t.h = entropy(j.row_marginal());
  t.i = mutual_information(j);
  return t;
}

inline std::vector<std::vector<std::size_t>> subsets_of(const std::vector<std::size_t>& items) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t mask = 1; mask < (std::size_t{1} << items.size()); ++mask) {
    std::vector<std::size_t> s;
    for (std::size_t i = 0; i < items.size(); ++i)
      if (mask >> i & 1u) s.push_back(items[i]);
    out.push_back(std::move(s));
  }
  return out;
}

/// Emits FanoRow/CondRow entries for receiver k on one cell.
inline void emit_rows(FanoReport& rep, const Code& c, const std::vector<PairAtom>& pairs,
                      const std::vector<std::size_t>& cell, const FanoCell& fc, std::size_t k, bool covered,
                      RowCache& cache, std::size_t ny, double log2_ny) {
  const double n = static_cast<double>(c.n);
  const auto& S = c.decoders[k].S;
  FanoRow row;
  row.k = k;
  row.q = fc.q;
  row.q0 = fc.q0;
  row.covered = covered;
  row.mass = fc.mass;
  const InfoTerms t = info_terms(c, pairs, cell, S, cache, ny);
  row.card = t.card;
  row.aexp_m = t.card == 0 ? 0.0 : log2_count(t.card) / n;
  row.info = t.i / n;
  row.entropy = t.h / n;
  row.gap = snap(row.aexp_m - row.info);
  row.dp_ok = t.i <= std::min(t.h, log2_ny) + 1e-9;
  rep.rows.push_back(row);
  std::vector<std::size_t> rest;
  for (std::size_t j = 0; j < c.messages.J(); ++j)
    if (!std::binary_search(S.begin(), S.end(), j)) rest.push_back(j);
  for (const auto& sbar : subsets_of(rest)) {
    std::vector<std::size_t> both = S;
    both.insert(both.end(), sbar.begin(), sbar.end());
    std::sort(both.begin(), both.end());
    std::map<std::size_t, std::vector<std::size_t>> by_bar;
    double total = 0.0;
    for (std::size_t i : cell) {
      by_bar[c.messages.project(pairs[i].m, sbar)].push_back(i);
      total += pairs[i].p;
    }
    std::set<std::size_t> both_vals;
    for (std::size_t i : cell) both_vals.insert(c.messages.project(pairs[i].m, both));
    CondRow cr;
    cr.k = k;
    cr.q = fc.q;
    cr.sbar = sbar;
    cr.lhs = (log2_count(both_vals.size()) - log2_count(by_bar.size())) / n;
    Accumulator info, ent;
    for (auto& [mb, ids] : by_bar) {
      double pb = 0.0;
      for (std::size_t i : ids) pb += pairs[i].p;
      const InfoTerms tb = info_terms(c, pairs, ids, S, cache, ny);
      info.add(pb / total * tb.i);
      ent.add(pb / total * tb.h);
    }
    cr.info = info.value() / n;
    cr.entropy = ent.value() / n;
    cr.gap = snap(cr.lhs - cr.info);
    rep.cond_rows.push_back(std::move(cr));
  }
}

inline double cell_mass(const std::vector<PairAtom>& pairs, const std::vector<std::size_t>& cell) {
  Accumulator a;
  for (std::size_t i : cell) a.add(pairs[i].p);
  return a.value();
}

inline void finish_zeta(FanoReport& rep, std::size_t K) {
  rep.zeta.assign(K, 0.0);
  for (const auto& r : rep.rows)
    if (!r.q0 && r.covered && r.mass > 0.0) rep.zeta[r.k] = std::max(rep.zeta[r.k], r.gap);
}

}  // namespace detail

inline FanoReport strong_fano_max(const Code& c, const std::vector<Channel>& chs, const FanoParams& prm = {}) {
  const std::size_t K = c.decoders.size();
  FanoReport rep;
  rep.kind = "max";
  rep.n = c.n;
  for (std::size_t k = 0; k < K; ++k) {
    const double e = max_error(c, chs, k);
    if (!lt(e, 1.0)) throw PreconditionError("maximum error probability is 1");
    rep.error.push_back(e);
    rep.alpha.push_back(1.0 - e);
    rep.classic.push_back(classic_fano(e, log2_count(c.messages.size_of(c.decoders[k].S)), c.n));
  }
  const auto pairs = detail::code_pairs(c);
  std::vector<std::size_t> all(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) all[i] = i;
  const detail::MaxCells mc = detail::build_q_cells(c, pairs, all, chs, rep.alpha, prm);
  rep.appended = mc.appended;
  rep.n_tilde = mc.n_tilde;
  rep.n_tilde_formula_ok = mc.n_tilde_formula_ok;
  rep.w_partitions_set = mc.w_partitions_set;
  rep.w_partitions_messages = mc.w_partitions_messages;
  rep.vstar_within_caps = mc.vstar_within_caps;
  rep.vstar_partitions = mc.vstar_partitions;
  for (std::size_t q = 0; q < mc.cells.size(); ++q) {
    FanoCell fc;
    fc.q = q;
    fc.q0 = q == 0;
    fc.w = mc.w_of[q];
    fc.v = mc.v_of[q];
    fc.size = mc.cells[q].size();
    fc.mass = detail::cell_mass(pairs, mc.cells[q]);
    rep.cells.push_back(fc);
  }
  rep.cell_pairs = mc.cells;
  rep.q_count = rep.cells.size();
  rep.q0_mass = rep.cells.front().mass;
  rep.q0_bound = std::pow(static_cast<double>(c.input_size), -static_cast<double>(c.n));
  rep.q0_within = rep.q0_mass <= rep.q0_bound + 1e-12;
  for (std::size_t k = 0; k < K; ++k) {
    detail::RowCache cache(chs[k], c.n);
    const std::uint64_t ny = checked_pow(chs[k].output_size(), c.n);
    const double log2_ny = static_cast<double>(c.n) * std::log2(static_cast<double>(chs[k].output_size()));
    for (std::size_t q = 0; q < mc.cells.size(); ++q)
      if (!mc.cells[q].empty())
        detail::emit_rows(rep, c, pairs, mc.cells[q], rep.cells[q], k, true, cache, ny, log2_ny);
    std::vector<PairCell> pc;
    for (std::size_t q = 1; q < mc.cells.size(); ++q) {
      PairCell cell;
      for (std::size_t i : mc.cells[q]) cell.emplace_back(pairs[i].m, pairs[i].x);
      pc.push_back(std::move(cell));
    }
    rep.decoding.push_back(build_decoding_sets(c, chs, k, rep.alpha[k], pc, prm.vstar.extract.solver));
    rep.certificates_ok = rep.certificates_ok && rep.decoding.back().certificates_ok &&
                          rep.decoding.back().multiplicity_ok;
  }
  detail::finish_zeta(rep, K);
  return rep;
}

inline FanoReport strong_fano_avg(const Code& c, const std::vector<Channel>& chs, const FanoParams& prm = {}) {
  const std::size_t K = c.decoders.size();
  if (K > 16) throw CapacityError("at most 16 receivers are supported");
  FanoReport rep;
  rep.kind = "avg";
  rep.n = c.n;
  const auto pairs = detail::code_pairs(c);
  std::vector<std::vector<double>> succ;
  for (std::size_t k = 0; k < K; ++k) {
    const double e = avg_error(c, chs, k);
    if (!lt(e, 1.0)) throw PreconditionError("average error probability is 1");
    rep.error.push_back(e);
    rep.classic.push_back(classic_fano(e, log2_count(c.messages.size_of(c.decoders[k].S)), c.n));
    succ.push_back(detail::success_table(c, chs, k, pairs));
  }
  if (prm.alpha_avg) {
    rep.alpha_n = *prm.alpha_avg;
  } else {
    const double l = std::max(1.0, std::log2(static_cast<double>(c.n)));
    rep.alpha_n = std::numeric_limits<double>::infinity();
    for (double e : rep.error) rep.alpha_n = std::min(rep.alpha_n, (1.0 - e) / l);
  }
  if (!(rep.alpha_n > 0.0 && rep.alpha_n <= 1.0)) throw DomainError("average-error split threshold must lie in (0,1]");
  rep.alpha.assign(K, rep.alpha_n);
  std::map<std::size_t, std::vector<std::size_t>> by_t;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::size_t t = 0;
    for (std::size_t k = 0; k < K; ++k)
      if (geq(succ[k][i], rep.alpha_n)) t |= std::size_t{1} << k;
    by_t[t].push_back(i);
  }
  std::vector<std::vector<std::size_t>> cells;
  for (auto& [t, ids] : by_t) {
    if (t == 0) {
      FanoCell fc;
      fc.q = cells.size();
      fc.q0 = false;
      fc.u = 0;
      fc.size = ids.size();
      fc.mass = detail::cell_mass(pairs, ids);
      rep.cells.push_back(fc);
      cells.push_back(ids);
      continue;
    }
    std::vector<Channel> sub;
    std::vector<double> alphas;
    Code restricted = c;
    restricted.decoders.clear();
    for (std::size_t k = 0; k < K; ++k)
      if (t >> k & 1u) {
        sub.push_back(chs[k]);
        restricted.decoders.push_back(c.decoders[k]);
        alphas.push_back(rep.alpha_n);
      }
    const detail::MaxCells mc = detail::build_q_cells(restricted, pairs, ids, sub, alphas, prm);
    rep.appended = rep.appended || mc.appended;
    rep.n_tilde = std::max(rep.n_tilde, mc.n_tilde);
    rep.n_tilde_formula_ok = rep.n_tilde_formula_ok && mc.n_tilde_formula_ok;
    rep.w_partitions_set = rep.w_partitions_set && mc.w_partitions_set;
    rep.w_partitions_messages = rep.w_partitions_messages && mc.w_partitions_messages;
    rep.vstar_within_caps = rep.vstar_within_caps && mc.vstar_within_caps;
    rep.vstar_partitions = rep.vstar_partitions && mc.vstar_partitions;
    for (std::size_t q = 0; q < mc.cells.size(); ++q) {
      FanoCell fc;
      fc.q = cells.size();
      fc.q0 = q == 0;
      fc.u = t;
      fc.w = mc.w_of[q];
      fc.v = mc.v_of[q];
      fc.size = mc.cells[q].size();
      fc.mass = detail::cell_mass(pairs, mc.cells[q]);
      rep.cells.push_back(fc);
      cells.push_back(mc.cells[q]);
    }
    for (std::size_t si = 0, k = 0; k < K; ++k) {
      if (!(t >> k & 1u)) continue;
      std::vector<PairCell> pc;
      for (std::size_t q = 1; q < mc.cells.size(); ++q) {
        PairCell cell;
        for (std::size_t i : mc.cells[q]) cell.emplace_back(pairs[i].m, pairs[i].x);
        pc.push_back(std::move(cell));
      }
      rep.decoding.push_back(build_decoding_sets(c, chs, k, rep.alpha_n, pc, prm.vstar.extract.solver));
      rep.certificates_ok = rep.certificates_ok && rep.decoding.back().certificates_ok &&
                            rep.decoding.back().multiplicity_ok;
      ++si;
    }
  }
  rep.cell_pairs = cells;
  rep.q_count = rep.cells.size();
  rep.q0_bound = std::pow(static_cast<double>(c.input_size), -static_cast<double>(c.n));
  for (const auto& fc : rep.cells)
    if (fc.q0) rep.q0_mass += fc.mass;
  rep.q0_within = true;
  for (const auto& fc : rep.cells)
    if (fc.q0) rep.q0_within = rep.q0_within && fc.mass <= rep.q0_bound + 1e-12;

  const double n = static_cast<double>(c.n);
  const double log2_q = log2_count(rep.q_count);
  for (std::size_t k = 0; k < K; ++k) {
    detail::RowCache cache(chs[k], c.n);
    const std::uint64_t ny = checked_pow(chs[k].output_size(), c.n);
    const double log2_ny = n * std::log2(static_cast<double>(chs[k].output_size()));
    const std::size_t first = rep.rows.size();
    for (std::size_t q = 0; q < cells.size(); ++q)
      if (!cells[q].empty())
        detail::emit_rows(rep, c, pairs, cells[q], rep.cells[q], k, (rep.cells[q].u >> k) & 1u, cache, ny, log2_ny);
    // Passing set: cells whose sub-code guarantees receiver k, minus the exempt q0 cells.
    double um = 0.0, pm = 0.0;
    std::vector<std::size_t> passing;
    for (const auto& fc : rep.cells)
      if ((fc.u >> k) & 1u) {
        um += fc.mass;
        if (!fc.q0) {
          pm += fc.mass;
          passing.push_back(fc.q);
        }
      }
    rep.u_mass.push_back(um);
    rep.u_mass_ok.push_back(um >= 1.0 - rep.error[k] - rep.alpha_n - 1e-12);
    rep.passing_mass.push_back(pm);
    rep.passing_target.push_back(1.0 - rep.error[k] - rep.alpha_n - rep.q0_bound);
    rep.passing.push_back(passing);
    // Nearly-uniform corollary.
    std::map<std::size_t, double> marg;
    for (const auto& pa : pairs) marg[c.messages.project(pa.m, c.decoders[k].S)] += pa.p;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& [m, p] : marg) {
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    const double gamma = hi / lo;
    const double aexp_all = log2_count(marg.size()) / n;
    const double dstar = 4.0 * (log2_q + std::log2(gamma)) / (n * (1.0 - rep.error[k]));
    rep.star_delta.push_back(dstar);
    double sm = 0.0;
    double cg = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::size_t> star;
    for (std::size_t r = first; r < rep.rows.size(); ++r) {
      const auto& row = rep.rows[r];
      if (!std::binary_search(passing.begin(), passing.end(), row.q)) continue;
      if (aexp_all <= row.entropy + dstar + 1e-12) {
        sm += row.mass;
        star.push_back(row.q);
        const double g = aexp_all - row.info;
        cg = std::isnan(cg) ? g : std::max(cg, g);
      }
    }
    rep.star.push_back(star);
    rep.star_mass.push_back(sm);
    rep.star_target.push_back((1.0 - rep.error[k]) / 4.0);
    rep.corollary_gap.push_back(cg);
    rep.small_n_regime = rep.small_n_regime || std::isnan(cg) || snap(cg) > 0.0 || sm < rep.star_target.back();
  }
  detail::finish_zeta(rep, K);
  return rep;
}

}  // namespace fbt
