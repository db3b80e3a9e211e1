#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fbt/dmc.hpp"
#include "fbt/images.hpp"
#include "fbt/report.hpp"
#include "fbt/spectrum.hpp"

namespace fbt {

// ---------------------------------------------------------------------------
// Message-joint slicing (W)

struct WCell {
  bool remainder = false;
  std::size_t k = 0;
  std::size_t l = 0;
  SequenceSet members;
  double mass = 0.0;
  /// Messages with positive mass in the cell.
  std::vector<Label> messages;
  double gamma_x = 1.0;
  double gamma_m = 1.0;
  bool gamma_x_ok = true;
  bool gamma_m_ok = true;
};

struct WPartition {
  std::size_t n = 0;
  double delta = 0.0;
  double rho = 0.0;
  /// Spectrum slice width 1/n^{rho+2}.
  double width = 0.0;
  std::size_t Kn = 0;
  /// cells[0] is the remainder w0, always present; the rest are the nonempty (k,l) cells.
  std::vector<WCell> cells;
  /// Labels: 0 for w0, 1 + k*Kn + l for cell (k,l).
  PartitioningIndex index;
  bool partitions_set = false;
  /// Every message has positive mass in exactly one cell.
  bool partitions_messages = false;
  std::vector<Label> split_messages;
  double w0_mass = 0.0;
  double w0_bound = 0.0;
  double gamma_x_cap = 0.0;
  double gamma_m_cap = 0.0;
  bool gamma_bounds_hold = true;
  std::size_t cell_cap = 0;
};

namespace detail {

/// Spectrum bins without the delta_n < 1 restriction (slice widths 1/n^{rho+2} may equal 1).
inline std::vector<std::vector<SeqInt>> spectrum_members(const SequenceDist& d, double width, std::size_t K) {
  std::vector<std::vector<SeqInt>> bins(K + 1);
  for (SeqInt x : d.support()) bins[spectrum_bin(info_density(d, x), width, K)].push_back(x);
  return bins;
}

inline double gamma_of(const std::vector<double>& w) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (double v : w)
    if (v > 0.0) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  return hi > 0.0 ? hi / lo : 1.0;
}

}  // namespace detail

inline WPartition build_W(const SequenceDist& dist, const PartitioningIndex& m, double delta, double rho) {
  if (!m.partitions(dist)) throw ValidationError("message index does not partition the support");
  if (!(delta > 0.0)) throw DomainError("delta must be positive");
  if (!(rho >= 0.0)) throw DomainError("rho must be nonnegative");
  WPartition w;
  w.n = dist.n();
  w.delta = delta;
  w.rho = rho;
  const double n = static_cast<double>(w.n);
  const double c = std::pow(n, rho + 1.0);
  w.width = 1.0 / std::pow(n, rho + 2.0);
  w.Kn = spectrum_bin_count(w.width, 2.0 * delta, log2_count(dist.support().size()), w.n);
  w.gamma_x_cap = std::exp2(2.0 / c);
  w.gamma_m_cap = std::exp2(6.0 / c);
  w.w0_bound = std::exp2(-n * delta);
  w.cell_cap = w.Kn * w.Kn + 1;
  const auto bins = detail::spectrum_members(dist, w.width, w.Kn);

  // (k, l) -> members; k == Kn or l == Kn marks the remainder.
  std::map<std::pair<std::size_t, std::size_t>, std::vector<SeqInt>> groups;
  std::vector<SeqInt> rest;
  for (std::size_t k = 0; k <= w.Kn; ++k) {
    if (bins[k].empty()) continue;
    const SequenceSet ak(w.n, dist.q(), bins[k]);
    std::map<Label, std::vector<SeqInt>> by_msg;
    for (SeqInt x : ak) by_msg[m.label_of(x)].push_back(x);
    for (auto& [label, xs] : by_msg) {
      const double ratio = static_cast<double>(xs.size()) / static_cast<double>(ak.size());
      const std::size_t l = spectrum_bin(-std::log2(ratio), 1.0 / c, w.Kn);
      auto& dst = (k == w.Kn || l == w.Kn) ? rest : groups[{k, l}];
      dst.insert(dst.end(), xs.begin(), xs.end());
    }
  }

  std::vector<std::pair<SeqInt, Label>> labels;
  auto make_cell = [&](bool remainder, std::size_t k, std::size_t l, std::vector<SeqInt> xs) {
    WCell cell;
    cell.remainder = remainder;
    cell.k = k;
    cell.l = l;
    cell.members = SequenceSet(w.n, dist.q(), std::move(xs));
    cell.mass = dist.mass(cell.members);
    const Label id = remainder ? 0 : 1 + k * w.Kn + l;
    std::map<Label, Accumulator> msg_mass;
    std::vector<double> px;
    for (SeqInt x : cell.members) {
      labels.emplace_back(x, id);
      msg_mass[m.label_of(x)].add(dist.prob(x));
      px.push_back(dist.prob(x));
    }
    std::vector<double> pm;
    for (auto& [label, a] : msg_mass) {
      cell.messages.push_back(label);
      pm.push_back(a.value());
    }
    cell.gamma_x = detail::gamma_of(px);
    cell.gamma_m = detail::gamma_of(pm);
    if (!remainder) {
      cell.gamma_x_ok = cell.gamma_x <= w.gamma_x_cap * (1.0 + 1e-9);
      cell.gamma_m_ok = cell.gamma_m <= w.gamma_m_cap * (1.0 + 1e-9);
    }
    return cell;
  };
  w.cells.push_back(make_cell(true, w.Kn, w.Kn, std::move(rest)));
  for (auto& [kl, xs] : groups) w.cells.push_back(make_cell(false, kl.first, kl.second, std::move(xs)));
  w.index = PartitioningIndex::from_labels(w.n, dist.q(), std::move(labels));
  w.partitions_set = w.index.ground() == dist.support();
  w.w0_mass = w.cells.front().mass;

  std::map<Label, std::size_t> seen;
  for (const auto& cell : w.cells)
    for (Label label : cell.messages) ++seen[label];
  w.partitions_messages = true;
  for (const auto& [label, count] : seen)
    if (count != 1) {
      w.partitions_messages = false;
      w.split_messages.push_back(label);
    }
  for (const auto& cell : w.cells) w.gamma_bounds_hold = w.gamma_bounds_hold && cell.gamma_x_ok && cell.gamma_m_ok;
  return w;
}

// ---------------------------------------------------------------------------
// Quasi-image to image refinement (A')

struct RefineResult {
  SequenceSet a_prime;
  /// Minimum alpha-quasi-image of A.
  SequenceSet image;
  double alpha = 0.0;
  /// min over A' of P^n(image | x).
  double min_prob = 0.0;
  /// image is an (alpha/n)-image of A'.
  bool certificate = false;
  double ratio = 0.0;
  double gamma = 1.0;
  /// (1/gamma - 1/n) * alpha.
  double ratio_bound = 0.0;
  bool ratio_ok = false;
};

namespace detail {
inline double set_prob(const std::vector<double>& row, const SequenceSet& b) {
  Accumulator acc;
  for (SeqInt y : b) acc.add(row[y]);
  return acc.value();
}
}  // namespace detail

inline RefineResult refine_quasi_to_image(const Channel& ch, const SequenceDist& dist, const SequenceSet& a,
                                          double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0,1]");
  const SequenceDist da = dist.conditioned_on(a);
  RefineResult r;
  r.alpha = alpha;
  r.image = min_quasi_image(ch, da, da.support(), alpha).witness;
  const double n = static_cast<double>(a.n());
  const double thr = alpha / n;
  std::vector<SeqInt> keep;
  r.min_prob = std::numeric_limits<double>::infinity();
  for (SeqInt x : da.support()) {
    const double p = detail::set_prob(channel_row(ch, x, a.n()), r.image);
    if (geq(p, thr)) {
      keep.push_back(x);
      r.min_prob = std::min(r.min_prob, p);
    }
  }
  r.a_prime = SequenceSet(a.n(), a.q(), std::move(keep));
  r.certificate = !r.a_prime.empty() && geq(r.min_prob, thr);
  r.gamma = uniformity(da, da.support()).gamma;
  r.ratio = static_cast<double>(r.a_prime.size()) / static_cast<double>(da.support().size());
  r.ratio_bound = (1.0 / r.gamma - 1.0 / n) * alpha;
  r.ratio_ok = r.ratio > r.ratio_bound - 1e-12;
  return r;
}

// ---------------------------------------------------------------------------
// Dominant-bin extraction (A*)

struct EqualCellTrace {
  /// "direct" (k' <= c_n), "split" (A' minus A''), "tail" (eta_{k''} <= 1/n) or
  /// "fallback" (A' minus A'' was empty, A' kept).
  std::string branch;
  double delta_n = 0.0;
  std::size_t K = 0;
  std::size_t k_prime = 0;
  long k_double = -1;
  double c_n = 0.0;
  /// Measured continuity gap (1/n)[log2 g(A', eta) - log2 gbar(A, eta_{k'})], floored at 0.
  double tau = 0.0;
  double eta_k_prime = 0.0;
  double eta_k_double = 0.0;
  std::size_t size_in = 0;
  std::size_t size_a_prime = 0;
  std::size_t size_out = 0;
  double ratio = 0.0;
  double ratio_bound = 0.0;
  bool ratio_ok = false;
  double entropy_rate = 0.0;
  double image_exponent = 0.0;
  bool image_exact = false;
  /// |entropy_rate - image_exponent|.
  double gap = 0.0;
  /// max(0, image_exponent - 7.19 delta_n - entropy_rate).
  double slack = 0.0;
};

struct ExtractResult {
  SequenceSet cell;
  EqualCellTrace trace;
};

inline ExtractResult extract_equal_cell(const Channel& ch, const SequenceDist& dist, const SequenceSet& a,
                                        double delta_n, double delta, double eta,
                                        const ImageSolverOptions& opt = {}) {
  if (!(eta > 0.0 && eta < 1.0)) throw DomainError("eta must lie in (0,1)");
  const SequenceDist da = dist.conditioned_on(a);
  const SequenceSet& base = da.support();
  const std::size_t nn = a.n();
  const double n = static_cast<double>(nn);
  EqualCellTrace t;
  t.delta_n = delta_n;
  t.size_in = base.size();
  const SequenceDist py = output_dist(ch, da);
  const auto sp = build_spectrum_partition(py, delta_n, delta, n * std::log2(static_cast<double>(ch.output_size())));
  t.K = sp.K;
  std::vector<double> cum(sp.K + 1);
  Accumulator acc;
  for (std::size_t k = 0; k <= sp.K; ++k) {
    acc.add(sp.bin_mass[k]);
    cum[k] = std::min(1.0, acc.value());
  }
  const double heavy = 1.0 / static_cast<double>(sp.K + 1);
  t.k_prime = sp.K;
  for (std::size_t k = 0; k <= sp.K; ++k)
    if (geq(sp.bin_mass[k], heavy)) {
      t.k_prime = k;
      break;
    }
  t.eta_k_prime = cum[t.k_prime];
  const RefineResult first = refine_quasi_to_image(ch, da, base, t.eta_k_prime);
  t.size_a_prime = first.a_prime.size();
  const ImageBracket ga = image_size(ch, first.a_prime, eta, opt);
  t.tau = std::max(0.0, (log2_count(ga.upper) - log2_count(first.image.size())) / n);
  t.c_n = 4.19 + t.tau / delta_n;
  SequenceSet out = first.a_prime;
  if (static_cast<double>(t.k_prime) <= t.c_n) {
    t.branch = "direct";
  } else {
    t.k_double = static_cast<long>(std::floor(static_cast<double>(t.k_prime) - t.c_n));
    t.eta_k_double = cum[static_cast<std::size_t>(t.k_double)];
    if (t.eta_k_double > 0.0 && lt(1.0 / n, t.eta_k_double)) {
      const RefineResult second = refine_quasi_to_image(ch, da, base, t.eta_k_double);
      SequenceSet diff = first.a_prime.subtract(second.a_prime);
      if (diff.empty()) {
        t.branch = "fallback";
      } else {
        t.branch = "split";
        out = std::move(diff);
      }
    } else {
      t.branch = "tail";
    }
  }
  t.size_out = out.size();
  t.ratio = static_cast<double>(out.size()) / static_cast<double>(base.size());
  t.ratio_bound = 1.0 / (2.0 * static_cast<double>(sp.K + 1));
  t.ratio_ok = t.ratio >= t.ratio_bound - 1e-12;
  t.entropy_rate = cond_output_entropy(ch, da, out) / n;
  const ImageBracket g = image_size(ch, out, eta, opt);
  t.image_exact = g.exact;
  t.image_exponent = log2_count(g.upper) / n;
  t.gap = std::fabs(t.entropy_rate - t.image_exponent);
  t.slack = std::max(0.0, t.image_exponent - 7.19 * delta_n - t.entropy_rate);
  return {std::move(out), t};
}

// ---------------------------------------------------------------------------
// Multi-channel extraction

struct ExtractParams {
  /// Extra spectrum range delta of each per-channel extraction.
  double delta = 0.5;
  /// Explicit widths delta_{k,n}; empty selects the adaptive default schedule.
  std::vector<double> widths;
  ImageSolverOptions solver;
};

struct MainTrace {
  std::vector<double> widths;
  std::vector<EqualCellTrace> steps;
  std::size_t size_in = 0;
  std::size_t size_out = 0;
  double ratio = 0.0;
  /// prod_k 1 / (3 (delta + log2 |Y_k|)).
  double mu = 0.0;
  double ratio_bound = 0.0;
  bool ratio_ok = false;
  std::vector<double> entropy_rate;
  std::vector<double> image_exponent;
  std::vector<double> gap;
  double aexp = 0.0;
  double x_entropy_rate = 0.0;
  /// max of aexp - x_entropy_rate and the per-channel gaps.
  double slack = 0.0;
};

struct MainResult {
  SequenceSet cell;
  MainTrace trace;
};

namespace detail {
inline double clamp_width(double w) { return std::clamp(w, 1e-6, 0.999); }

inline void check_channels(const std::vector<Channel>& chs, std::size_t q) {
  if (chs.empty()) throw DomainError("at least one channel is required");
  for (const auto& ch : chs)
    if (ch.input_size() != q) throw DimensionError("channels must share the input alphabet");
}

inline double mu_of(const std::vector<Channel>& chs, double delta) {
  double mu = 1.0;
  for (const auto& ch : chs) mu /= 3.0 * (delta + std::log2(static_cast<double>(ch.output_size())));
  return mu;
}
}  // namespace detail

inline MainResult extract_main(const std::vector<Channel>& chs, const SequenceDist& dist, const SequenceSet& a,
                               double eta, const ExtractParams& p = {}) {
  detail::check_channels(chs, a.q());
  const SequenceDist da = dist.conditioned_on(a);
  const std::size_t nn = a.n();
  const double n = static_cast<double>(nn);
  const std::size_t K = chs.size();
  MainTrace t;
  t.size_in = da.support().size();
  SequenceSet cur = da.support();
  double width = p.widths.empty() ? std::pow(n, -1.0 / static_cast<double>(K + 1)) : p.widths.front();
  for (std::size_t k = 0; k < K; ++k) {
    if (!p.widths.empty()) width = p.widths[std::min(k, p.widths.size() - 1)];
    width = detail::clamp_width(width);
    t.widths.push_back(width);
    auto step = extract_equal_cell(chs[k], da, cur, width, p.delta, eta, p.solver);
    cur = std::move(step.cell);
    if (p.widths.empty()) width = std::sqrt(std::max(width, step.trace.gap));
    t.steps.push_back(std::move(step.trace));
  }
  t.size_out = cur.size();
  t.ratio = static_cast<double>(cur.size()) / static_cast<double>(t.size_in);
  t.mu = detail::mu_of(chs, p.delta);
  t.ratio_bound = t.mu / n;
  t.ratio_ok = t.ratio >= t.ratio_bound - 1e-12;
  const SequenceDist dc = da.conditioned_on(cur);
  t.aexp = aexp(cur.size(), nn);
  t.x_entropy_rate = entropy(dc) / n;
  t.slack = std::max(0.0, t.aexp - t.x_entropy_rate);
  for (const auto& ch : chs) {
    const double h = entropy(output_dist(ch, dc)) / n;
    const double g = log2_count(image_size(ch, cur, eta, p.solver).upper) / n;
    t.entropy_rate.push_back(h);
    t.image_exponent.push_back(g);
    t.gap.push_back(std::fabs(h - g));
    t.slack = std::max(t.slack, t.gap.back());
  }
  return {std::move(cur), std::move(t)};
}

// ---------------------------------------------------------------------------
// Repeated extraction (V)

struct VCell {
  SequenceSet members;
  double mass = 0.0;
  double aexp = 0.0;
  double x_entropy_rate = 0.0;
  std::vector<double> entropy_rate;
  std::vector<double> image_exponent;
  double slack = 0.0;
  MainTrace trace;
};

struct VPartition {
  /// Labels 0, 1, ... in extraction order.
  PartitioningIndex index;
  std::vector<VCell> cells;
  /// Maximum per-cell slack.
  double eps = 0.0;
  double mu = 0.0;
  /// Smallest integer above 2 ln2 (1 + log2|X|) n^2 / mu.
  std::size_t cap = 0;
  bool within_cap = false;
  double gamma = 1.0;
  double n_gamma_minus_1 = 0.0;
};

inline VPartition build_V(const std::vector<Channel>& chs, const SequenceDist& dist, const SequenceSet& a,
                          double eta, const ExtractParams& p = {}) {
  detail::check_channels(chs, a.q());
  const SequenceDist da = dist.conditioned_on(a);
  const double n = static_cast<double>(a.n());
  VPartition v;
  v.gamma = uniformity(da, da.support()).gamma;
  v.n_gamma_minus_1 = n * (v.gamma - 1.0);
  v.mu = detail::mu_of(chs, p.delta);
  const double bound = 2.0 * std::log(2.0) * (1.0 + std::log2(static_cast<double>(a.q()))) * n * n / v.mu;
  v.cap = static_cast<std::size_t>(std::floor(bound)) + 1;
  SequenceSet rest = da.support();
  std::vector<std::pair<SeqInt, Label>> labels;
  int stalled = 0;
  while (!rest.empty()) {
    auto step = extract_main(chs, da, rest, eta, p);
    if (step.cell.empty()) {
      if (++stalled >= 3) throw InvariantError("repeated extraction stopped shrinking the residual");
      continue;
    }
    stalled = 0;
    VCell c;
    c.members = step.cell;
    c.mass = da.mass(c.members);
    c.aexp = step.trace.aexp;
    c.x_entropy_rate = step.trace.x_entropy_rate;
    c.entropy_rate = step.trace.entropy_rate;
    c.image_exponent = step.trace.image_exponent;
    c.slack = step.trace.slack;
    c.trace = std::move(step.trace);
    v.eps = std::max(v.eps, c.slack);
    for (SeqInt x : c.members) labels.emplace_back(x, v.cells.size());
    rest = rest.subtract(c.members);
    v.cells.push_back(std::move(c));
  }
  v.index = PartitioningIndex::from_labels(a.n(), a.q(), std::move(labels));
  v.within_cap = v.cells.size() <= v.cap;
  return v;
}

// ---------------------------------------------------------------------------
// Equal-image-size partition (V*)

struct VstarParams {
  double eta = 0.5;
  /// Lattice spacing; 0 selects 1/ceil(sqrt(n)).
  double delta_n = 0.0;
  ExtractParams extract;
};

struct SubsetReport {
  /// Message components in S (0-based).
  std::vector<std::size_t> S;
  /// Lattice point i_S(v): entry 0 for X, entry k for channel k.
  std::vector<long> lattice;
  /// M_S(v): messages with positive mass in the cell.
  std::vector<Label> messages;
  std::vector<Label> hat;
  std::vector<Label> tilde;
  double entropy_m = 0.0;
  /// Per channel: H(Y_k | M_S, V* = v) / n.
  std::vector<double> entropy_y;
  /// image_exponent[i][k] for messages[i]: (1/n) log2 g_k(A_{m,v}, eta).
  std::vector<std::vector<double>> image_exponent;
  bool images_exact = true;
  /// g(A_{m,v}) <= g(A_v) for every message and channel.
  bool set_monotone = true;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;
  double lambda4 = 0.0;
  bool tilde_empty = false;
};

struct VstarCell {
  std::size_t id = 0;
  std::size_t round = 0;
  SequenceSet members;
  double mass = 0.0;
  std::vector<SubsetReport> subsets;
};

struct EqualImagePartition {
  PartitioningIndex index;
  std::vector<VstarCell> cells;
  std::size_t J = 0;
  std::size_t K = 0;
  double delta_n = 0.0;
  double eps = 0.0;
  double sqrt_eps = 0.0;
  double log2_lattice = 0.0;
  std::size_t rounds = 0;
  std::size_t round_cap = 0;
  bool within_cap = false;
  bool partitions = false;
  /// Per-property maxima over cells, subsets, messages and channels (NaN when undefined).
  double lambda[4] = {0.0, 0.0, 0.0, 0.0};
  /// Largest number of U cells produced for any (S, m_S) in any round.
  std::size_t max_u_cells = 0;
};

namespace detail {

struct UAssign {
  Label m = 0;
  std::size_t u = 0;
};

struct SubsetRound {
  std::map<SeqInt, UAssign> assign;
  std::map<std::pair<Label, std::size_t>, std::size_t> u_size;
  std::map<std::pair<Label, std::size_t>, std::vector<long>> u_lattice;
};

inline long lattice_index(double h, double d) { return static_cast<long>(std::floor(snap(h / d + 0.5))); }

inline double fmax_nan(double a, double b) {
  if (std::isnan(a)) return b;
  if (std::isnan(b)) return a;
  return std::max(a, b);
}

}  // namespace detail

inline EqualImagePartition build_Vstar(const std::vector<Channel>& chs, const SequenceDist& dist,
                                       const SequenceSet& a, const std::vector<PartitioningIndex>& messages,
                                       const VstarParams& p = {}) {
  const std::size_t J = messages.size();
  if (J > 3) throw CapacityError("at most 3 message components are supported");
  detail::check_channels(chs, a.q());
  const SequenceDist da = dist.conditioned_on(a);
  const SequenceSet& base = da.support();
  for (const auto& mi : messages)
    if (!(mi.ground() == base)) throw ValidationError("message index does not partition the set");
  const std::size_t nn = a.n();
  const double n = static_cast<double>(nn);
  const std::size_t K = chs.size();
  EqualImagePartition out;
  out.J = J;
  out.K = K;
  out.delta_n = p.delta_n > 0.0 ? p.delta_n : 1.0 / std::ceil(std::sqrt(n));
  const double d = out.delta_n;
  double lat = std::log2(std::ceil(std::log2(static_cast<double>(a.q())) / d) + 1.0);
  for (const auto& ch : chs) lat += std::log2(std::ceil(std::log2(static_cast<double>(ch.output_size())) / d) + 1.0);
  const std::size_t nsub = std::size_t{1} << J;
  out.log2_lattice = static_cast<double>(nsub) * lat;
  out.round_cap = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(2.0 * n * std::log2(static_cast<double>(a.q())))));

  std::vector<PartitioningIndex> ms(nsub);
  for (std::size_t s = 0; s < nsub; ++s) {
    ms[s] = PartitioningIndex::trivial(base);
    for (std::size_t j = 0; j < J; ++j)
      if (s >> j & 1u) ms[s] = product_index(ms[s], messages[j]);
  }

  std::vector<std::vector<detail::SubsetRound>> rounds;
  std::vector<std::pair<std::size_t, SequenceSet>> kept;
  double eps = 0.0;
  SequenceSet rest = base;
  while (!rest.empty()) {
    const std::size_t r = rounds.size();
    const SequenceDist dr = da.conditioned_on(rest);
    struct Task {
      std::size_t s;
      Label m;
      SequenceSet cell;
    };
    std::vector<Task> tasks;
    for (std::size_t s = 0; s < nsub; ++s) {
      const PartitioningIndex sub = restrict_index(ms[s], rest);
      for (const auto& [m, cell] : sub.cells()) tasks.push_back({s, m, cell});
    }
    std::vector<VPartition> parts(tasks.size());
    parallel_for(tasks.size(), [&](std::size_t i) {
      parts[i] = build_V(chs, dr, tasks[i].cell, p.eta, p.extract);
    });
    std::vector<detail::SubsetRound> sr(nsub);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      auto& round = sr[tasks[i].s];
      out.max_u_cells = std::max(out.max_u_cells, parts[i].cells.size());
      for (std::size_t u = 0; u < parts[i].cells.size(); ++u) {
        const auto& vc = parts[i].cells[u];
        eps = std::max(eps, vc.slack);
        std::vector<long> li{detail::lattice_index(vc.x_entropy_rate, d)};
        for (double h : vc.entropy_rate) li.push_back(detail::lattice_index(h, d));
        const std::pair<Label, std::size_t> key{tasks[i].m, u};
        round.u_size[key] = vc.members.size();
        round.u_lattice[key] = li;
        for (SeqInt x : vc.members) round.assign[x] = {tasks[i].m, u};
      }
    }
    std::map<std::vector<long>, std::vector<SeqInt>> groups;
    for (SeqInt x : rest) {
      std::vector<long> key;
      for (std::size_t s = 0; s < nsub; ++s) {
        const auto& as = sr[s].assign.at(x);
        const auto& li = sr[s].u_lattice.at({as.m, as.u});
        key.insert(key.end(), li.begin(), li.end());
      }
      groups[key].push_back(x);
    }
    std::vector<SeqInt> taken;
    std::size_t kept_before = kept.size();
    SequenceSet heaviest;
    double heaviest_mass = -1.0;
    for (auto& [key, xs] : groups) {
      SequenceSet cell(nn, a.q(), std::move(xs));
      const double pv = dr.mass(cell);
      if (pv > heaviest_mass) {
        heaviest_mass = pv;
        heaviest = cell;
      }
      if (std::log2(pv) >= -2.0 * out.log2_lattice) {
        taken.insert(taken.end(), cell.begin(), cell.end());
        kept.emplace_back(r, std::move(cell));
      }
    }
    if (kept.size() == kept_before) {
      taken.assign(heaviest.begin(), heaviest.end());
      kept.emplace_back(r, heaviest);
    }
    rounds.push_back(std::move(sr));
    rest = rest.subtract(SequenceSet(nn, a.q(), std::move(taken)));
  }
  out.rounds = rounds.size();
  out.within_cap = out.rounds <= out.round_cap;
  out.eps = std::max(eps, 1.0 / (n * n));
  out.sqrt_eps = std::sqrt(out.eps);
  for (double& l : out.lambda) l = std::numeric_limits<double>::quiet_NaN();

  std::vector<std::pair<SeqInt, Label>> labels;
  for (std::size_t id = 0; id < kept.size(); ++id) {
    const auto& [r, cellset] = kept[id];
    VstarCell vc;
    vc.id = id;
    vc.round = r;
    vc.members = cellset;
    vc.mass = da.mass(cellset);
    for (SeqInt x : cellset) labels.emplace_back(x, id);
    std::vector<double> g_cell(K);
    for (std::size_t k = 0; k < K; ++k) g_cell[k] = log2_count(image_size(chs[k], cellset, p.eta, p.extract.solver).upper) / n;
    for (std::size_t s = 0; s < nsub; ++s) {
      SubsetReport rep;
      for (std::size_t j = 0; j < J; ++j)
        if (s >> j & 1u) rep.S.push_back(j);
      const auto& sr = rounds[r][s];
      std::map<Label, std::vector<SeqInt>> by_m;
      std::map<std::pair<Label, std::size_t>, std::size_t> muv;
      for (SeqInt x : cellset) {
        const auto& as = sr.assign.at(x);
        by_m[as.m].push_back(x);
        ++muv[{as.m, as.u}];
      }
      rep.lattice = sr.u_lattice.at({sr.assign.at(cellset.members().front()).m, sr.assign.at(cellset.members().front()).u});
      std::map<Label, double> omega_share;
      std::set<Label> hat;
      for (const auto& [key, cnt] : muv) {
        const double ratio = static_cast<double>(cnt) / static_cast<double>(sr.u_size.at(key));
        if (geq(ratio, out.sqrt_eps)) {
          hat.insert(key.first);
          omega_share[key.first] += static_cast<double>(cnt) / static_cast<double>(by_m[key.first].size());
        }
      }
      std::vector<double> pm;
      std::vector<Accumulator> hy(K);
      for (auto& [m, xs] : by_m) {
        rep.messages.push_back(m);
        SequenceSet amv(nn, a.q(), xs);
        const double pmv = da.mass(amv) / vc.mass;
        pm.push_back(pmv);
        const SequenceDist dm = da.conditioned_on(amv);
        std::vector<double> ge(K);
        for (std::size_t k = 0; k < K; ++k) {
          hy[k].add(pmv * entropy(output_dist(chs[k], dm)) / n);
          const ImageBracket g = image_size(chs[k], amv, p.eta, p.extract.solver);
          rep.images_exact = rep.images_exact && g.exact;
          ge[k] = log2_count(g.upper) / n;
          rep.set_monotone = rep.set_monotone && ge[k] <= g_cell[k] + 1e-12;
        }
        rep.image_exponent.push_back(std::move(ge));
      }
      for (Label m : hat) {
        rep.hat.push_back(m);
        if (geq(omega_share[m], 1.0 - d)) rep.tilde.push_back(m);
      }
      rep.entropy_m = entropy(pm) / n;
      for (std::size_t k = 0; k < K; ++k) rep.entropy_y.push_back(hy[k].value());
      rep.tilde_empty = rep.tilde.empty();
      double l1 = -std::numeric_limits<double>::infinity();
      double l4 = 0.0;
      for (std::size_t i = 0; i < rep.messages.size(); ++i) {
        const bool in_tilde = std::binary_search(rep.tilde.begin(), rep.tilde.end(), rep.messages[i]);
        for (std::size_t k = 0; k < K; ++k) {
          l1 = std::max(l1, rep.image_exponent[i][k] - rep.entropy_y[k]);
          if (in_tilde) l4 = std::max(l4, std::fabs(rep.image_exponent[i][k] - rep.entropy_y[k]));
        }
      }
      rep.lambda1 = l1;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      const double at = rep.tilde_empty ? nan : aexp(rep.tilde.size(), nn);
      rep.lambda2 = rep.tilde_empty ? nan : std::fabs(at - aexp(rep.messages.size(), nn));
      rep.lambda3 = rep.tilde_empty ? nan : std::fabs(rep.entropy_m - at);
      rep.lambda4 = rep.tilde_empty ? nan : l4;
      out.lambda[0] = detail::fmax_nan(out.lambda[0], rep.lambda1);
      out.lambda[1] = detail::fmax_nan(out.lambda[1], rep.lambda2);
      out.lambda[2] = detail::fmax_nan(out.lambda[2], rep.lambda3);
      out.lambda[3] = detail::fmax_nan(out.lambda[3], rep.lambda4);
      vc.subsets.push_back(std::move(rep));
    }
    out.cells.push_back(std::move(vc));
  }
  out.index = PartitioningIndex::from_labels(nn, a.q(), std::move(labels));
  out.partitions = out.index.ground() == base;
  return out;
}

// ---------------------------------------------------------------------------

/// |H(E) - H(E|S=1)| / n <= 1/n + (1 - p) log2|E| / n, with p = P(S=1).
inline BoundReport entropy_perturbation_bound(double h_e, double h_e_given, double p, double log_card,
                                              std::size_t n) {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("p must lie in (0,1]");
  if (n < 1) throw DomainError("n must be positive");
  const double nn = static_cast<double>(n);
  BoundReport r;
  r.name = "entropy_perturbation";
  r.check_le("|H(E) - H(E|S=1)|/n <= 1/n + (1-p) log|E| / n", std::fabs(h_e - h_e_given) / nn,
             1.0 / nn + (1.0 - p) * log_card / nn, false);
  return r;
}

}  // namespace fbt
