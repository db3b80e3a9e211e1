#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "fbt/dmc.hpp"
#include "fbt/fano.hpp"
#include "fbt/parallel.hpp"

namespace fbt {

/** @brief Wiretap channel given by its legitimate and eavesdropper marginals over one input alphabet. */
struct WiretapInstance {
  Channel main;
  Channel eve;

  static WiretapInstance make(Channel main, Channel eve) {
    if (main.input_size() != eve.input_size()) throw DimensionError("main and eavesdropper inputs differ");
    return {std::move(main), std::move(eve)};
  }
};

struct WtcEvaluation {
  double epsilon = 0.0;
  double leakage = 0.0;
  double message_entropy = 0.0;
};

namespace detail {

inline void check_wtc_code(const WiretapInstance& w, const Code& c) {
  if (c.messages.J() != 1) throw PreconditionError("wiretap codes carry a single message");
  if (c.decoders.size() != 1) throw PreconditionError("wiretap codes have a single legitimate receiver");
  if (c.input_size != w.main.input_size()) throw DimensionError("code input alphabet differs from the channel");
}

inline std::vector<std::size_t> iota_cells(std::size_t count) {
  std::vector<std::size_t> v(count);
  for (std::size_t i = 0; i < count; ++i) v[i] = i;
  return v;
}

}  // namespace detail

inline WtcEvaluation evaluate_wtc_code(const WiretapInstance& w, const Code& c) {
  detail::check_wtc_code(w, c);
  WtcEvaluation e;
  e.epsilon = avg_error(c, {w.main}, 0);
  const auto pairs = detail::code_pairs(c);
  const std::uint64_t nz = checked_pow(w.eve.output_size(), c.n);
  if (nz > kDenseCap) throw CapacityError("eavesdropper output space exceeds dense cap");
  detail::RowCache cache(w.eve, c.n);
  const auto t = detail::info_terms(c, pairs, detail::iota_cells(pairs.size()), {0}, cache, nz);
  e.leakage = std::min(t.i, t.h);
  e.message_entropy = t.h;
  return e;
}

struct WiretapCellRow {
  std::size_t q = 0;
  double mass = 0.0;
  /// (1/n) I(M; Y^n | Q = q) and (1/n) I(M; Z^n | Q = q).
  double info_y = 0.0;
  double info_z = 0.0;
  bool in_star = false;
};

struct WiretapReport {
  std::size_t n = 0;
  double rate = 0.0;
  double epsilon = 0.0;
  double leakage = 0.0;
  std::vector<WiretapCellRow> cells;
  /// Which set Q* was drawn from: "star", "passing" or "all".
  std::string star_source;
  std::size_t star_count = 0;
  double star_mass = 0.0;
  double star_mass_target = 0.0;
  bool star_mass_ok = false;
  std::size_t q_count = 0;
  /// I(M; Z^n | Q in Q*) in bits, under the law conditioned on the event.
  double leak_given_event = 0.0;
  /// I(M; Z^n | Q*) and I(M; Y^n | Q*) in bits.
  double leak_given_star = 0.0;
  double info_given_star = 0.0;
  double deflation = 0.0;
  double count_term = 0.0;
  /// Max over Q* of aexp M - (1/n) I(M; Y^n | Q = q).
  double fano_slack = 0.0;
  double chain_rhs = 0.0;
  bool chain_holds = false;
  BoundReport steps;
  FanoReport fano;
};

inline WiretapReport wtc_converse_chain(const WiretapInstance& w, const Code& c, const FanoParams& prm = {}) {
  detail::check_wtc_code(w, c);
  WiretapReport r;
  r.n = c.n;
  const double n = static_cast<double>(c.n);
  const WtcEvaluation ev = evaluate_wtc_code(w, c);
  if (!lt(ev.epsilon, 1.0)) throw PreconditionError("average error probability is 1");
  r.epsilon = ev.epsilon;
  r.leakage = ev.leakage;
  std::size_t support = 0;
  for (double p : c.messages.joint) support += p > 0.0 ? 1 : 0;
  r.rate = log2_count(support) / n;
  r.fano = strong_fano_avg(c, {w.main}, prm);
  r.q_count = r.fano.q_count;

  std::vector<std::size_t> star = r.fano.star[0];
  r.star_source = "star";
  if (star.empty()) {
    star = r.fano.passing[0];
    r.star_source = "passing";
  }
  if (star.empty()) {
    for (const auto& fc : r.fano.cells)
      if (fc.mass > 0.0) star.push_back(fc.q);
    r.star_source = "all";
  }
  std::sort(star.begin(), star.end());
  r.star_count = star.size();

  const auto pairs = detail::code_pairs(c);
  const std::uint64_t ny = checked_pow(w.main.output_size(), c.n);
  const std::uint64_t nz = checked_pow(w.eve.output_size(), c.n);
  detail::RowCache cy(w.main, c.n), cz(w.eve, c.n);
  const auto& cells = r.fano.cell_pairs;
  std::vector<std::size_t> event;
  Accumulator iy, iz, mass;
  for (std::size_t q = 0; q < cells.size(); ++q) {
    WiretapCellRow row;
    row.q = q;
    row.mass = r.fano.cells[q].mass;
    row.in_star = std::binary_search(star.begin(), star.end(), q);
    if (!cells[q].empty()) {
      row.info_y = detail::info_terms(c, pairs, cells[q], {0}, cy, ny).i / n;
      row.info_z = detail::info_terms(c, pairs, cells[q], {0}, cz, nz).i / n;
    }
    if (row.in_star) {
      mass.add(row.mass);
      event.insert(event.end(), cells[q].begin(), cells[q].end());
    }
    r.cells.push_back(row);
  }
  r.star_mass = mass.value();
  for (const auto& row : r.cells)
    if (row.in_star && r.star_mass > 0.0) {
      iy.add(row.mass / r.star_mass * row.info_y * n);
      iz.add(row.mass / r.star_mass * row.info_z * n);
    }
  r.info_given_star = iy.value();
  r.leak_given_star = iz.value();
  std::sort(event.begin(), event.end());
  r.leak_given_event = detail::info_terms(c, pairs, event, {0}, cz, nz).i;
  r.star_mass_target = (1.0 - r.epsilon) / 4.0;
  r.star_mass_ok = r.star_mass >= r.star_mass_target - 1e-12;
  r.deflation = 4.0 * (r.leakage + 1.0) / ((1.0 - r.epsilon) * n);
  r.count_term = log2_count(r.q_count) / n;
  r.fano_slack = -std::numeric_limits<double>::infinity();
  for (const auto& row : r.cells)
    if (row.in_star) r.fano_slack = std::max(r.fano_slack, snap(r.rate - row.info_y));

  r.steps.name = "wiretap_chain";
  r.steps.check_le("I(M;Z|Q in Q*) P(Q*) <= I(M;Z) + 1", r.leak_given_event * r.star_mass, r.leakage + 1.0, false);
  r.steps.check_le("I(M;Z|Q*) <= I(M;Z|Q in Q*) + log2|Q*|", r.leak_given_star,
                   r.leak_given_event + log2_count(r.star_count), false);
  r.steps.check_le("0 <= I(M;Z|Q*)", 0.0, r.leak_given_star, false);
  r.steps.check_le("0 <= I(M;Y|Q*)", 0.0, r.info_given_star, false);
  r.steps.check_le("mass of Q* <= 1", r.star_mass, 1.0, false);
  r.steps.record("P(Q*) vs (1-eps)/4", r.star_mass_target, r.star_mass);
  const double deflated = r.star_mass > 0.0 ? (r.leakage + 1.0) / (r.star_mass * n) + log2_count(r.star_count) / n
                                            : std::numeric_limits<double>::infinity();
  r.steps.record("(1/n) I(M;Z|Q*) vs measured deflation", r.leak_given_star / n, deflated);
  r.chain_rhs = (r.info_given_star - r.leak_given_star) / n + r.fano_slack + r.deflation + r.count_term;
  r.chain_holds = r.rate <= r.chain_rhs + 1e-9;
  return r;
}

// ---------------------------------------------------------------------------
// Single-letter bound max I(U;Y) - I(U;Z)

struct SecrecyOptions {
  std::size_t starts = 32;
  std::uint64_t seed = 0;
  /// Coarse grid resolution for initializers; 0 disables the grid.
  std::size_t grid = 20;
  /// Grids with more points than this are skipped.
  std::size_t grid_cap = 200000;
  std::size_t max_iters = 20000;
};

struct SecrecyResult {
  double value = 0.0;
  std::vector<double> p_u;
  /// p_x_given_u[u][x].
  std::vector<std::vector<double>> p_x_given_u;
  /// Largest ascent derivative along feasible simplex directions at the optimum.
  double kkt_max = 0.0;
  bool kkt_ok = true;
  /// Values for |U| = 1 .. U_size.
  std::vector<double> by_size;
};

namespace detail {

/// Smooth extension of I(U;Out) to unnormalised arguments: H(Out) - H(Out|U) from p(u, out).
inline double mi_through(const Channel& ch, const std::vector<double>& v, std::size_t nu, std::size_t nx) {
  const std::size_t no = ch.output_size();
  std::vector<Accumulator> py(no);
  Accumulator cond;
  for (std::size_t u = 0; u < nu; ++u) {
    const double pu = v[u];
    for (std::size_t y = 0; y < no; ++y) {
      Accumulator a;
      for (std::size_t x = 0; x < nx; ++x) a.add(v[nu + u * nx + x] * ch(x, y));
      const double pyu = a.value();
      const double joint = pu * pyu;
      py[y].add(joint);
      if (joint > 0.0 && pyu > 0.0) cond.add(joint * std::log2(pyu));
    }
  }
  Accumulator hy;
  for (auto& a : py) {
    const double p = a.value();
    if (p > 0.0) hy.add(-p * std::log2(p));
  }
  return hy.value() + cond.value();
}

struct SecrecyProblem {
  const Channel& main;
  const Channel& eve;
  std::size_t nu;
  std::size_t nx;

  std::size_t dim() const { return nu + nu * nx; }
  double f(const std::vector<double>& v) const { return mi_through(main, v, nu, nx) - mi_through(eve, v, nu, nx); }

  /// Blocks: [0, nu) and then nu rows of width nx.
  std::vector<std::pair<std::size_t, std::size_t>> blocks() const {
    std::vector<std::pair<std::size_t, std::size_t>> b{{0, nu}};
    for (std::size_t u = 0; u < nu; ++u) b.emplace_back(nu + u * nx, nx);
    return b;
  }
};

/// Euclidean projection of v[off, off+len) onto the probability simplex (sort-based).
inline void project_block(std::vector<double>& v, std::size_t off, std::size_t len) {
  std::vector<double> s(v.begin() + static_cast<std::ptrdiff_t>(off), v.begin() + static_cast<std::ptrdiff_t>(off + len));
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    cum += s[i];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (s[i] - t > 0.0) theta = t;
  }
  for (std::size_t i = off; i < off + len; ++i) v[i] = std::max(0.0, v[i] - theta);
}

inline void project(const SecrecyProblem& pb, std::vector<double>& v) {
  for (auto [off, len] : pb.blocks()) project_block(v, off, len);
}

constexpr double kFdStep = 1e-6;

inline std::vector<double> gradient(const SecrecyProblem& pb, const std::vector<double>& v) {
  std::vector<double> g(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::vector<double> a = v, b = v;
    if (v[i] >= kFdStep) {
      a[i] += kFdStep;
      b[i] -= kFdStep;
      g[i] = (pb.f(a) - pb.f(b)) / (2.0 * kFdStep);
    } else {
      a[i] += kFdStep;
      g[i] = (pb.f(a) - pb.f(v)) / kFdStep;
    }
  }
  return g;
}

/// Projected gradient ascent with step halving; stops when a full step search improves by < 1e-10.
inline std::pair<double, std::vector<double>> ascend(const SecrecyProblem& pb, std::vector<double> v,
                                                     std::size_t max_iters) {
  project(pb, v);
  double fv = pb.f(v);
  double step = 1.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    const auto g = gradient(pb, v);
    bool moved = false;
    double s = std::min(1.0, step * 2.0);
    while (s > 1e-12) {
      std::vector<double> c = v;
      for (std::size_t i = 0; i < c.size(); ++i) c[i] += s * g[i];
      project(pb, c);
      const double fc = pb.f(c);
      if (fc > fv) {
        const double gain = fc - fv;
        v = std::move(c);
        fv = fc;
        step = s;
        moved = gain >= 1e-10;
        break;
      }
      s *= 0.5;
    }
    if (!moved) break;
  }
  return {fv, v};
}

/// Max ascent derivative along e_i - e_j within each block, over feasible j (v_j > 0).
inline double kkt_violation(const SecrecyProblem& pb, const std::vector<double>& v) {
  double worst = 0.0;
  const double f0 = pb.f(v);
  for (auto [off, len] : pb.blocks()) {
    // Directions inside an unused U row (zero mass) leave the objective flat.
    for (std::size_t j = off; j < off + len; ++j) {
      if (!(v[j] > 0.0)) continue;
      for (std::size_t i = off; i < off + len; ++i) {
        if (i == j) continue;
        const double h = std::min(kFdStep, v[j]);
        std::vector<double> a = v;
        a[i] += h;
        a[j] -= h;
        const double d = (pb.f(a) - f0) / h;
        worst = std::max(worst, d);
      }
    }
  }
  return worst;
}

/// Grid points on the k-simplex at resolution 1/r, in lexicographic order.
inline std::vector<std::vector<double>> simplex_grid(std::size_t k, std::size_t r) {
  std::vector<std::vector<double>> out;
  std::vector<std::size_t> c(k, 0);
  auto rec = [&](auto&& self, std::size_t i, std::size_t left) -> void {
    if (i + 1 == k) {
      c[i] = left;
      std::vector<double> p(k);
      for (std::size_t j = 0; j < k; ++j) p[j] = static_cast<double>(c[j]) / static_cast<double>(r);
      out.push_back(std::move(p));
      return;
    }
    for (std::size_t t = 0; t <= left; ++t) {
      c[i] = t;
      self(self, i + 1, left - t);
    }
  };
  rec(rec, 0, r);
  return out;
}

inline std::vector<double> random_point(const SecrecyProblem& pb, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(pb.dim());
  for (auto [off, len] : pb.blocks()) {
    double s = 0.0;
    for (std::size_t i = off; i < off + len; ++i) s += v[i] = e(rng);
    for (std::size_t i = off; i < off + len; ++i) v[i] /= s;
  }
  return v;
}

/// Best grid points (by value, then grid order) used as initializers.
inline std::vector<std::vector<double>> grid_starts(const SecrecyProblem& pb, const SecrecyOptions& o,
                                                   std::size_t want) {
  if (o.grid == 0 || want == 0) return {};
  const auto gu = simplex_grid(pb.nu, o.grid);
  const auto gx = simplex_grid(pb.nx, o.grid);
  double total = static_cast<double>(gu.size());
  for (std::size_t u = 0; u < pb.nu; ++u) total *= static_cast<double>(gx.size());
  if (total > static_cast<double>(o.grid_cap)) return {};
  const std::size_t count = static_cast<std::size_t>(total);
  std::vector<double> vals(count);
  auto point = [&](std::size_t idx) {
    std::vector<double> v(pb.dim());
    std::size_t r = idx;
    for (std::size_t u = pb.nu; u-- > 0;) {
      const auto& row = gx[r % gx.size()];
      r /= gx.size();
      std::copy(row.begin(), row.end(), v.begin() + static_cast<std::ptrdiff_t>(pb.nu + u * pb.nx));
    }
    const auto& pu = gu[r];
    std::copy(pu.begin(), pu.end(), v.begin());
    return v;
  };
  parallel_for(count, [&](std::size_t i) { vals[i] = pb.f(point(i)); });
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < std::min(want, count); ++i) out.push_back(point(order[i]));
  return out;
}

inline std::pair<double, std::vector<double>> solve_size(const SecrecyProblem& pb, const SecrecyOptions& o,
                                                         const std::vector<double>* warm) {
  std::vector<std::vector<double>> inits;
  if (warm) inits.push_back(*warm);
  for (auto& g : grid_starts(pb, o, o.starts / 2)) inits.push_back(std::move(g));
  std::mt19937_64 rng(o.seed ^ (0x9e3779b97f4a7c15ULL * (pb.nu + 1)));
  while (inits.size() < std::max<std::size_t>(o.starts, 1) + (warm ? 1 : 0)) inits.push_back(random_point(pb, rng));
  std::vector<std::pair<double, std::vector<double>>> res(inits.size());
  parallel_for(inits.size(), [&](std::size_t i) { res[i] = ascend(pb, inits[i], o.max_iters); });
  std::size_t best = 0;
  for (std::size_t i = 1; i < res.size(); ++i)
    if (res[i].first > res[best].first) best = i;
  return res[best];
}

}  // namespace detail

/// max over P_U, P_{X|U} with |U| = u_size of I(U;Y) - I(U;Z), floored at 0.
inline SecrecyResult secrecy_bound_single_letter(const WiretapInstance& w, std::size_t u_size = 0,
                                                 const SecrecyOptions& o = {}) {
  const std::size_t nx = w.main.input_size();
  if (u_size == 0) u_size = nx;
  if (u_size > 16) throw CapacityError("|U| above 16 is not supported");
  SecrecyResult r;
  std::vector<double> prev;
  double prev_val = 0.0;
  for (std::size_t nu = 1; nu <= u_size; ++nu) {
    const detail::SecrecyProblem pb{w.main, w.eve, nu, nx};
    std::vector<double> warm;
    if (!prev.empty()) {
      // Pad the previous optimum with a zero-mass atom whose row copies row 0.
      const std::size_t pnu = nu - 1;
      warm.assign(pb.dim(), 0.0);
      for (std::size_t u = 0; u < pnu; ++u) warm[u] = prev[u];
      for (std::size_t u = 0; u < pnu; ++u)
        for (std::size_t x = 0; x < nx; ++x) warm[nu + u * nx + x] = prev[pnu + u * nx + x];
      for (std::size_t x = 0; x < nx; ++x) warm[nu + pnu * nx + x] = prev[pnu + x];
    }
    auto [val, v] = detail::solve_size(pb, o, prev.empty() ? nullptr : &warm);
    if (!prev.empty() && val < prev_val) {
      val = prev_val;
      v = warm;
    }
    prev = v;
    prev_val = val;
    r.by_size.push_back(std::max(0.0, val));
    if (nu == u_size) {
      r.value = std::max(0.0, val);
      r.p_u.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(nu));
      for (std::size_t u = 0; u < nu; ++u)
        r.p_x_given_u.emplace_back(v.begin() + static_cast<std::ptrdiff_t>(nu + u * nx),
                                   v.begin() + static_cast<std::ptrdiff_t>(nu + (u + 1) * nx));
      r.kkt_max = detail::kkt_violation(pb, v);
      r.kkt_ok = r.kkt_max <= 1e-5;
    }
  }
  return r;
}

}  // namespace fbt
