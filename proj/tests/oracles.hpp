#pragma once

// Brute-force reference computations. They share no code paths with the library
// beyond the Channel matrix accessor and the 1e-12 comparison grid.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "fbt/dmc.hpp"

namespace oracle {

inline std::vector<std::size_t> digits(std::uint64_t v, std::size_t n, std::size_t q) {
  std::vector<std::size_t> d(n);
  for (std::size_t i = n; i-- > 0;) {
    d[i] = v % q;
    v /= q;
  }
  return d;
}

inline std::uint64_t ipow(std::uint64_t b, std::size_t e) {
  std::uint64_t r = 1;
  while (e--) r *= b;
  return r;
}

/// P^n(y|x) as a plain left-to-right product.
inline double prob(const fbt::Channel& ch, std::uint64_t x, std::uint64_t y, std::size_t n) {
  const auto dx = digits(x, n, ch.input_size());
  const auto dy = digits(y, n, ch.output_size());
  double p = 1.0;
  for (std::size_t i = 0; i < n; ++i) p *= ch(dx[i], dy[i]);
  return p;
}

inline std::vector<std::vector<double>> rows(const fbt::Channel& ch, const std::vector<std::uint64_t>& a,
                                             std::size_t n) {
  const std::uint64_t ny = ipow(ch.output_size(), n);
  std::vector<std::vector<double>> r;
  for (auto x : a) {
    std::vector<double> row(ny);
    for (std::uint64_t y = 0; y < ny; ++y) row[y] = prob(ch, x, y, n);
    r.push_back(row);
  }
  return r;
}

/// Smallest |B| with min_x P(B|x) >= eta, by exhaustive search over output subset masks (|Y|^n <= 20).
inline std::size_t min_image(const fbt::Channel& ch, const std::vector<std::uint64_t>& a, std::size_t n, double eta) {
  const auto r = rows(ch, a, n);
  const std::size_t ny = r.front().size();
  std::size_t best = ny + 1;
  const std::uint64_t full = std::uint64_t{1} << ny;
  std::vector<std::vector<double>> sums(r.size(), std::vector<double>(full, 0.0));
  for (std::uint64_t mask = 1; mask < full; ++mask) {
    const unsigned low = static_cast<unsigned>(std::countr_zero(mask));
    const std::uint64_t rest = mask & (mask - 1);
    bool ok = true;
    for (std::size_t i = 0; i < r.size(); ++i) {
      sums[i][mask] = sums[i][rest] + r[i][low];
      ok = ok && fbt::geq(sums[i][mask], eta);
    }
    if (ok) best = std::min<std::size_t>(best, static_cast<std::size_t>(std::popcount(mask)));
  }
  return best;
}

/// Smallest |B| with P(B) >= eta for an explicit output pmf, by exhaustive search (length <= 20).
inline std::size_t min_quasi(const std::vector<double>& py, double eta) {
  const std::size_t ny = py.size();
  std::size_t best = ny + 1;
  const std::uint64_t full = std::uint64_t{1} << ny;
  std::vector<double> sums(full, 0.0);
  for (std::uint64_t mask = 1; mask < full; ++mask) {
    const unsigned low = static_cast<unsigned>(std::countr_zero(mask));
    sums[mask] = sums[mask & (mask - 1)] + py[low];
    if (fbt::geq(sums[mask], eta)) best = std::min<std::size_t>(best, static_cast<std::size_t>(std::popcount(mask)));
  }
  return best;
}

/// Output pmf given a weighted input set (weights need not be normalised).
inline std::vector<double> output(const fbt::Channel& ch, const std::vector<std::uint64_t>& a,
                                  const std::vector<double>& w, std::size_t n) {
  const auto r = rows(ch, a, n);
  double total = 0.0;
  for (double v : w) total += v;
  std::vector<double> py(r.front().size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t y = 0; y < py.size(); ++y) py[y] += w[i] / total * r[i][y];
  return py;
}

inline double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log2(v);
  return h;
}

inline double mutual_information(const std::vector<std::vector<double>>& j) {
  std::vector<double> r(j.size(), 0.0), c(j.front().size(), 0.0);
  for (std::size_t a = 0; a < j.size(); ++a)
    for (std::size_t b = 0; b < c.size(); ++b) {
      r[a] += j[a][b];
      c[b] += j[a][b];
    }
  double i = 0.0;
  for (std::size_t a = 0; a < j.size(); ++a)
    for (std::size_t b = 0; b < c.size(); ++b)
      if (j[a][b] > 0.0) i += j[a][b] * std::log2(j[a][b] / (r[a] * c[b]));
  return i;
}

inline double binary_entropy(double p) { return entropy({p, 1.0 - p}); }

/// I(U;Y) - I(U;Z) for a binary-input wiretap pair with |U| = 2 in direct form (outputs <= 8).
inline double secrecy_objective(const fbt::Channel& m, const fbt::Channel& e, double pu, double a, double b) {
  auto through = [&](const fbt::Channel& ch) {
    const std::size_t no = ch.output_size();
    double j[2][8] = {};
    const double px[2][2] = {{a, 1.0 - a}, {b, 1.0 - b}};
    const double pus[2] = {pu, 1.0 - pu};
    double col[8] = {};
    for (std::size_t u = 0; u < 2; ++u)
      for (std::size_t y = 0; y < no; ++y) {
        j[u][y] = pus[u] * (px[u][0] * ch(0, y) + px[u][1] * ch(1, y));
        col[y] += j[u][y];
      }
    double i = 0.0;
    for (std::size_t u = 0; u < 2; ++u)
      for (std::size_t y = 0; y < no; ++y)
        if (j[u][y] > 0.0) i += j[u][y] * std::log2(j[u][y] / (pus[u] * col[y]));
    return i;
  };
  return through(m) - through(e);
}

/// Grid search over (P_U, P_{X|U}) at resolution 1/res, then coordinate refinement with shrinking steps.
inline double secrecy_grid(const fbt::Channel& m, const fbt::Channel& e, std::size_t res) {
  double best = -1.0, bu = 0.0, ba = 0.0, bb = 0.0;
  const double h = 1.0 / static_cast<double>(res);
  for (std::size_t i = 0; i <= res; ++i)
    for (std::size_t j = 0; j <= res; ++j)
      for (std::size_t k = 0; k <= res; ++k) {
        const double pu = i * h, a = j * h, b = k * h;
        const double v = secrecy_objective(m, e, pu, a, b);
        if (v > best) {
          best = v;
          bu = pu;
          ba = a;
          bb = b;
        }
      }
  for (double s = h; s > 1e-10; s *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (int c = 0; c < 3; ++c)
        for (double d : {s, -s}) {
          double u = bu, a = ba, b = bb;
          (c == 0 ? u : c == 1 ? a : b) += d;
          if (u < 0 || u > 1 || a < 0 || a > 1 || b < 0 || b > 1) continue;
          const double v = secrecy_objective(m, e, u, a, b);
          if (v > best + 1e-15) {
            best = v;
            bu = u;
            ba = a;
            bb = b;
            improved = true;
          }
        }
    }
  }
  return std::max(0.0, best);
}

inline fbt::Channel random_channel(std::mt19937_64& rng, std::size_t qx, std::size_t qy) {
  std::exponential_distribution<double> ex(1.0);
  std::vector<std::vector<double>> r(qx, std::vector<double>(qy));
  for (auto& row : r) {
    double s = 0.0;
    for (double& v : row) s += v = ex(rng);
    double t = 0.0;
    for (std::size_t y = 0; y + 1 < qy; ++y) t += row[y] /= s;
    row[qy - 1] = std::max(0.0, 1.0 - t);
  }
  return fbt::Channel::make(qx, qy, r);
}

inline std::vector<std::uint64_t> random_members(std::mt19937_64& rng, std::uint64_t space, std::size_t count) {
  std::vector<std::uint64_t> all(space);
  for (std::uint64_t i = 0; i < space; ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min<std::uint64_t>(count, space));
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace oracle
