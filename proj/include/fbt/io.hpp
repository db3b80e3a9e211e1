#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbt/dmc.hpp"
#include "fbt/fano.hpp"
#include "fbt/images.hpp"
#include "fbt/lemma_suite.hpp"
#include "fbt/partitioner.hpp"
#include "fbt/spectrum.hpp"
#include "fbt/wiretap.hpp"

namespace fbt::io {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Writer: fixed field order, doubles at 17 significant digits, non-finite as null.

namespace detail {

inline void write_string(std::string& out, const std::string& s) {
  out += Json(s).dump();
}

inline void write(std::string& out, const Json& j, int indent, int depth) {
  const std::string pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
  const std::string close = indent > 0 ? std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{";
      out += nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) {
          out += ",";
          out += nl;
        }
        first = false;
        out += pad;
        write_string(out, it.key());
        out += indent > 0 ? ": " : ":";
        write(out, it.value(), indent, depth + 1);
      }
      out += nl;
      out += close + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      bool flat = true;
      for (const auto& v : j) flat = flat && !v.is_structured();
      out += "[";
      if (!flat) out += nl;
      bool first = true;
      for (const auto& v : j) {
        if (!first) {
          out += ",";
          out += flat ? (indent > 0 ? " " : "") : nl;
        }
        first = false;
        if (!flat) out += pad;
        write(out, v, indent, depth + 1);
      }
      if (!flat) {
        out += nl;
        out += close;
      }
      out += "]";
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out += buf;
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

inline std::string dump(const Json& j, int indent = 2) {
  std::string out;
  detail::write(out, j, indent, 0);
  out += "\n";
  return out;
}

inline Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed JSON in " + path + ": " + e.what());
  }
}

inline void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << text;
}

/// Rejects keys outside `allowed`.
inline void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw ValidationError(what + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ValidationError("unknown key '" + it.key() + "' in " + what);
}

template <class T>
T get(const Json& j, const char* key, const std::string& what) {
  if (!j.contains(key)) throw ValidationError(what + " is missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(what + ": '" + key + "' has the wrong type");
  }
}

// ---------------------------------------------------------------------------
// Sequences and sets

/// Digit strings ("0110") when the alphabet has at most 10 symbols, integers otherwise.
inline Json seq_json(SeqInt x, std::size_t n, std::size_t q) {
  if (q <= 10) return Sequence::make(n, q, x).str();
  return x;
}

inline SeqInt seq_from_json(const Json& j, std::size_t n, std::size_t q) {
  if (j.is_number_unsigned() || j.is_number_integer()) {
    const long long v = j.get<long long>();
    if (v < 0) throw ValidationError("negative sequence index");
    return Sequence::make(n, q, static_cast<SeqInt>(v)).value;
  }
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s.size() != n) throw ValidationError("sequence '" + s + "' does not have length " + std::to_string(n));
    std::vector<std::size_t> d;
    for (char c : s) {
      if (c < '0' || c > '9') throw ValidationError("sequence '" + s + "' has a non-digit symbol");
      d.push_back(static_cast<std::size_t>(c - '0'));
    }
    try {
      return Sequence::from_digits(q, d).value;
    } catch (const DomainError&) {
      throw ValidationError("sequence '" + s + "' uses a symbol outside the alphabet");
    }
  }
  throw ValidationError("sequences are integers or digit strings");
}

inline Json set_json(const SequenceSet& s) {
  Json m = Json::array();
  for (SeqInt x : s) m.push_back(seq_json(x, s.n(), s.q()));
  return m;
}

inline Json set_file_json(const SequenceSet& s) {
  Json j;
  j["n"] = s.n();
  j["alphabet_size"] = s.q();
  j["members"] = set_json(s);
  return j;
}

inline SequenceSet set_from_json(const Json& j) {
  check_keys(j, {"n", "alphabet_size", "members"}, "set");
  const auto n = get<std::size_t>(j, "n", "set");
  const auto q = get<std::size_t>(j, "alphabet_size", "set");
  if (n < 1 || q < 1) throw ValidationError("set needs n >= 1 and alphabet_size >= 1");
  checked_pow(q, n);
  std::vector<SeqInt> m;
  for (const auto& v : get<Json>(j, "members", "set")) m.push_back(seq_from_json(v, n, q));
  return SequenceSet(n, q, std::move(m));
}

/// {n, alphabet_size, entries: [[seq, p]]} or {n, alphabet_size, uniform: [seq...]}.
inline SequenceDist dist_from_json(const Json& j) {
  check_keys(j, {"n", "alphabet_size", "entries", "uniform"}, "distribution");
  const auto n = get<std::size_t>(j, "n", "distribution");
  const auto q = get<std::size_t>(j, "alphabet_size", "distribution");
  if (n < 1 || q < 1) throw ValidationError("distribution needs n >= 1 and alphabet_size >= 1");
  checked_pow(q, n);
  if (j.contains("uniform") == j.contains("entries"))
    throw ValidationError("distribution needs exactly one of 'entries' and 'uniform'");
  if (j.contains("uniform")) {
    std::vector<SeqInt> m;
    for (const auto& v : j.at("uniform")) m.push_back(seq_from_json(v, n, q));
    const SequenceSet s(n, q, std::move(m));
    if (s.size() != j.at("uniform").size()) throw ValidationError("duplicate sequence in distribution");
    if (s.empty()) throw ValidationError("distribution has empty support");
    return SequenceDist::uniform(s);
  }
  std::vector<std::pair<SeqInt, double>> e;
  for (const auto& row : j.at("entries")) {
    if (!row.is_array() || row.size() != 2 || !row[1].is_number())
      throw ValidationError("distribution entries are [sequence, probability] pairs");
    e.emplace_back(seq_from_json(row[0], n, q), row[1].get<double>());
  }
  return SequenceDist::from_entries(n, q, std::move(e));
}

inline Json dist_json(const SequenceDist& d) {
  Json j;
  j["n"] = d.n();
  j["alphabet_size"] = d.q();
  Json e = Json::array();
  for (std::size_t i = 0; i < d.support().size(); ++i)
    e.push_back(Json::array({seq_json(d.support().members()[i], d.n(), d.q()), d.probs()[i]}));
  j["entries"] = e;
  return j;
}

/// {n, alphabet_size, labels: [[seq, label]]}.
inline PartitioningIndex index_from_json(const Json& j) {
  check_keys(j, {"n", "alphabet_size", "labels"}, "index");
  const auto n = get<std::size_t>(j, "n", "index");
  const auto q = get<std::size_t>(j, "alphabet_size", "index");
  checked_pow(q, n);
  std::vector<std::pair<SeqInt, Label>> l;
  for (const auto& row : get<Json>(j, "labels", "index")) {
    if (!row.is_array() || row.size() != 2 || !row[1].is_number_unsigned())
      throw ValidationError("index labels are [sequence, label] pairs with label >= 0");
    l.emplace_back(seq_from_json(row[0], n, q), row[1].get<Label>());
  }
  return PartitioningIndex::from_labels(n, q, std::move(l));
}

inline Json index_json(const PartitioningIndex& pi) {
  Json j;
  j["n"] = pi.ground().n();
  j["alphabet_size"] = pi.ground().q();
  Json l = Json::array();
  for (const auto& [x, lab] : pi.entries()) l.push_back(Json::array({seq_json(x, pi.ground().n(), pi.ground().q()), lab}));
  j["labels"] = l;
  return j;
}

// ---------------------------------------------------------------------------
// Channels and codes

/// {rows: [[...]]}, {bsc: p} or {identity: q}; an optional name is kept.
inline Channel channel_from_json(const Json& j) {
  check_keys(j, {"rows", "bsc", "identity", "name"}, "channel");
  const std::string name = j.contains("name") ? get<std::string>(j, "name", "channel") : "";
  const int kinds = static_cast<int>(j.contains("rows")) + static_cast<int>(j.contains("bsc")) +
                    static_cast<int>(j.contains("identity"));
  if (kinds != 1) throw ValidationError("channel needs exactly one of 'rows', 'bsc', 'identity'");
  if (j.contains("bsc")) {
    const double p = get<double>(j, "bsc", "channel");
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("bsc crossover must lie in [0,1]");
    return Channel::make(2, 2, {{1.0 - p, p}, {p, 1.0 - p}}, name.empty() ? "bsc" : name);
  }
  if (j.contains("identity")) {
    const auto q = get<std::size_t>(j, "identity", "channel");
    if (q < 1) throw ValidationError("identity channel needs q >= 1");
    Channel c = Channel::identity(q);
    return name.empty() ? c : Channel::make(q, q, c.rows(), name);
  }
  const auto rows = get<std::vector<std::vector<double>>>(j, "rows", "channel");
  if (rows.empty()) throw ValidationError("channel has no rows");
  return Channel::make(rows.size(), rows.front().size(), rows, name);
}

inline Json channel_json(const Channel& c) {
  Json j;
  if (!c.name().empty()) j["name"] = c.name();
  j["rows"] = c.rows();
  return j;
}

/**
 * Code file:
 * {n, input_size, messages: {sizes, joint?}, encoder: [[[x, p], ...] per message],
 *  decoders: [{S: [...], map: [...]} or {S: [...], rows: [[...]]}]}.
 * Message components in S are 0-based.
 */
inline Code code_from_json(const Json& j) {
  check_keys(j, {"n", "input_size", "messages", "encoder", "decoders"}, "code");
  const auto n = get<std::size_t>(j, "n", "code");
  const auto qx = get<std::size_t>(j, "input_size", "code");
  if (n < 1 || qx < 1) throw ValidationError("code needs n >= 1 and input_size >= 1");
  const Json& mj = get<Json>(j, "messages", "code");
  check_keys(mj, {"sizes", "joint"}, "messages");
  MessageSpace ms = MessageSpace::make(get<std::vector<std::size_t>>(mj, "sizes", "messages"),
                                       mj.contains("joint") ? get<std::vector<double>>(mj, "joint", "messages")
                                                            : std::vector<double>{});
  std::vector<std::vector<std::pair<SeqInt, double>>> enc;
  for (const auto& row : get<Json>(j, "encoder", "code")) {
    std::vector<std::pair<SeqInt, double>> r;
    if (!row.is_array()) throw ValidationError("encoder rows are arrays");
    for (const auto& e : row) {
      if (!e.is_array() || e.size() != 2 || !e[1].is_number())
        throw ValidationError("encoder entries are [codeword, probability] pairs");
      r.emplace_back(seq_from_json(e[0], n, qx), e[1].get<double>());
    }
    enc.push_back(std::move(r));
  }
  std::vector<Decoder> decs;
  for (const auto& dj : get<Json>(j, "decoders", "code")) {
    check_keys(dj, {"S", "map", "rows"}, "decoder");
    Decoder d;
    d.S = get<std::vector<std::size_t>>(dj, "S", "decoder");
    for (std::size_t s : d.S)
      if (s >= ms.J()) throw ValidationError("decoder S refers to a missing message component");
    const std::size_t cols = ms.size_of(d.S);
    if (dj.contains("map") == dj.contains("rows")) throw ValidationError("decoder needs exactly one of 'map', 'rows'");
    if (dj.contains("map")) {
      const auto map = get<std::vector<std::size_t>>(dj, "map", "decoder");
      for (std::size_t m : map)
        if (m >= cols) throw ValidationError("decoder map entry outside the message set");
      d = decoder_from_map(d.S, cols, map);
    } else {
      d.cols = cols;
      for (const auto& r : get<std::vector<std::vector<double>>>(dj, "rows", "decoder")) {
        if (r.size() != cols) throw ValidationError("decoder row has the wrong width");
        d.rows.insert(d.rows.end(), r.begin(), r.end());
      }
    }
    decs.push_back(std::move(d));
  }
  return Code::make(n, qx, std::move(ms), std::move(enc), std::move(decs));
}

// ---------------------------------------------------------------------------
// Reports

inline Json bound_json(const BoundReport& r) {
  Json j;
  j["name"] = r.name;
  j["pass"] = r.pass;
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back(Json{{"label", row.label}, {"lhs", row.lhs}, {"rhs", row.rhs}, {"slack", row.slack},
                        {"holds", row.holds}});
  j["rows"] = rows;
  return j;
}

inline Json spectrum_json(const SpectrumPartition& sp, const SequenceDist& d) {
  Json j;
  j["n"] = sp.n;
  j["delta_n"] = sp.delta_n;
  j["delta"] = sp.delta;
  j["K"] = sp.K;
  Json bins = Json::array();
  for (std::size_t k = 0; k <= sp.K; ++k) {
    if (sp.bins[k].empty()) continue;
    bins.push_back(Json{{"k", k}, {"tail", k == sp.K}, {"size", sp.bins[k].size()}, {"mass", sp.bin_mass[k]},
                        {"aexp", aexp(sp.bins[k].size(), sp.n)}, {"members", set_json(sp.bins[k])}});
  }
  j["bins"] = bins;
  j["warnings"] = sp.warnings;
  j["bin_size_bounds"] = bound_json(verify_bin_size_bounds(sp, d));
  j["bin_conditional_uniformity"] = bound_json(verify_bin_conditional_uniformity(sp, d));
  return j;
}

inline Json quasi_json(const QuasiImageResult& q) {
  return Json{{"size", q.size}, {"mass", q.eta_achieved}, {"witness", set_json(q.witness)}};
}

inline Json bracket_json(const ImageBracket& b) {
  return Json{{"lower", b.lower},
              {"upper", b.upper},
              {"exact", b.exact},
              {"lower_method", b.lower_method},
              {"upper_method", b.upper_method},
              {"witness", set_json(b.upper_witness)}};
}

inline Json w_json(const WPartition& w) {
  Json j;
  j["n"] = w.n;
  j["delta"] = w.delta;
  j["rho"] = w.rho;
  j["width"] = w.width;
  j["Kn"] = w.Kn;
  j["cell_cap"] = w.cell_cap;
  j["partitions_set"] = w.partitions_set;
  j["partitions_messages"] = w.partitions_messages;
  j["split_messages"] = w.split_messages;
  j["w0_mass"] = w.w0_mass;
  j["w0_bound"] = w.w0_bound;
  j["gamma_x_cap"] = w.gamma_x_cap;
  j["gamma_m_cap"] = w.gamma_m_cap;
  j["gamma_bounds_hold"] = w.gamma_bounds_hold;
  Json cells = Json::array();
  for (const auto& c : w.cells)
    cells.push_back(Json{{"remainder", c.remainder},
                         {"k", c.k},
                         {"l", c.l},
                         {"size", c.members.size()},
                         {"mass", c.mass},
                         {"messages", c.messages},
                         {"gamma_x", c.gamma_x},
                         {"gamma_m", c.gamma_m},
                         {"members", set_json(c.members)}});
  j["cells"] = cells;
  return j;
}

inline Json main_trace_json(const MainTrace& t) {
  Json steps = Json::array();
  for (const auto& s : t.steps)
    steps.push_back(Json{{"branch", s.branch},
                         {"delta_n", s.delta_n},
                         {"K", s.K},
                         {"k_prime", s.k_prime},
                         {"k_double", s.k_double},
                         {"c_n", s.c_n},
                         {"tau", s.tau},
                         {"size_in", s.size_in},
                         {"size_out", s.size_out},
                         {"ratio", s.ratio},
                         {"ratio_bound", s.ratio_bound},
                         {"ratio_ok", s.ratio_ok},
                         {"entropy_rate", s.entropy_rate},
                         {"image_exponent", s.image_exponent},
                         {"image_exact", s.image_exact},
                         {"gap", s.gap},
                         {"slack", s.slack}});
  return Json{{"widths", t.widths}, {"mu", t.mu},       {"ratio", t.ratio}, {"ratio_bound", t.ratio_bound},
              {"ratio_ok", t.ratio_ok}, {"slack", t.slack}, {"steps", steps}};
}

inline Json vstar_json(const EqualImagePartition& v) {
  Json j;
  j["J"] = v.J;
  j["K"] = v.K;
  j["delta_n"] = v.delta_n;
  j["eps"] = v.eps;
  j["sqrt_eps"] = v.sqrt_eps;
  j["log2_lattice"] = v.log2_lattice;
  j["rounds"] = v.rounds;
  j["round_cap"] = v.round_cap;
  j["within_cap"] = v.within_cap;
  j["partitions"] = v.partitions;
  j["lambda"] = {v.lambda[0], v.lambda[1], v.lambda[2], v.lambda[3]};
  j["max_u_cells"] = v.max_u_cells;
  Json cells = Json::array();
  for (const auto& c : v.cells) {
    Json subs = Json::array();
    for (const auto& s : c.subsets)
      subs.push_back(Json{{"S", s.S},
                          {"lattice", s.lattice},
                          {"messages", s.messages},
                          {"hat", s.hat},
                          {"tilde", s.tilde},
                          {"entropy_m", s.entropy_m},
                          {"entropy_y", s.entropy_y},
                          {"image_exponent", s.image_exponent},
                          {"images_exact", s.images_exact},
                          {"set_monotone", s.set_monotone},
                          {"lambda", {s.lambda1, s.lambda2, s.lambda3, s.lambda4}},
                          {"tilde_empty", s.tilde_empty}});
    cells.push_back(Json{{"id", c.id},
                         {"round", c.round},
                         {"size", c.members.size()},
                         {"mass", c.mass},
                         {"members", set_json(c.members)},
                         {"subsets", subs}});
  }
  j["cells"] = cells;
  return j;
}

inline Json decoding_json(const DecodingSets& d) {
  Json e = Json::array();
  for (const auto& x : d.entries)
    e.push_back(Json{{"cell", x.cell},
                     {"message", x.message},
                     {"cell_message_size", x.cell_message_size},
                     {"size", x.c_set.size()},
                     {"min_prob", x.min_prob},
                     {"certified", x.certified},
                     {"btilde_empty", x.btilde_empty}});
  return Json{{"k", d.k},
              {"alpha", d.alpha},
              {"image_size", d.image_size},
              {"image_exact", d.image_exact},
              {"multiplicity_max", d.multiplicity_max},
              {"multiplicity_bound", d.multiplicity_bound},
              {"multiplicity_ok", d.multiplicity_ok},
              {"certificates_ok", d.certificates_ok},
              {"empty_count", d.empty_count},
              {"entries", e}};
}

inline Json fano_json(const FanoReport& r) {
  Json j;
  j["kind"] = r.kind;
  j["n"] = r.n;
  j["error"] = r.error;
  j["alpha"] = r.alpha;
  j["appended"] = r.appended;
  j["n_tilde"] = r.n_tilde;
  j["n_tilde_formula_ok"] = r.n_tilde_formula_ok;
  j["q_count"] = r.q_count;
  j["q0_mass"] = r.q0_mass;
  j["q0_bound"] = r.q0_bound;
  j["q0_within"] = r.q0_within;
  j["w_partitions_set"] = r.w_partitions_set;
  j["w_partitions_messages"] = r.w_partitions_messages;
  j["vstar_within_caps"] = r.vstar_within_caps;
  j["vstar_partitions"] = r.vstar_partitions;
  j["certificates_ok"] = r.certificates_ok;
  j["classic_fano"] = r.classic;
  j["zeta"] = r.zeta;
  Json cells = Json::array();
  for (const auto& c : r.cells)
    cells.push_back(Json{{"q", c.q}, {"q0", c.q0}, {"u", c.u}, {"w", c.w}, {"v", c.v}, {"size", c.size},
                         {"mass", c.mass}});
  j["cells"] = cells;
  Json rows = Json::array();
  for (const auto& x : r.rows)
    rows.push_back(Json{{"k", x.k},
                        {"q", x.q},
                        {"q0", x.q0},
                        {"covered", x.covered},
                        {"mass", x.mass},
                        {"card", x.card},
                        {"aexp_m", x.aexp_m},
                        {"info", x.info},
                        {"entropy", x.entropy},
                        {"gap", x.gap},
                        {"dp_ok", x.dp_ok}});
  j["rows"] = rows;
  Json cond = Json::array();
  for (const auto& x : r.cond_rows)
    cond.push_back(Json{{"k", x.k}, {"q", x.q}, {"sbar", x.sbar}, {"lhs", x.lhs}, {"info", x.info},
                        {"entropy", x.entropy}, {"gap", x.gap}});
  j["conditional_rows"] = cond;
  Json dec = Json::array();
  for (const auto& d : r.decoding) dec.push_back(decoding_json(d));
  j["decoding_sets"] = dec;
  if (r.kind == "avg") {
    j["alpha_n"] = r.alpha_n;
    j["u_mass"] = r.u_mass;
    j["u_mass_ok"] = r.u_mass_ok;
    j["passing_mass"] = r.passing_mass;
    j["passing_target"] = r.passing_target;
    j["passing"] = r.passing;
    j["star"] = r.star;
    j["star_mass"] = r.star_mass;
    j["star_target"] = r.star_target;
    j["star_delta"] = r.star_delta;
    j["corollary_gap"] = r.corollary_gap;
    j["small_n_regime"] = r.small_n_regime;
  }
  return j;
}

/// One row per (k, q).
inline std::string fano_csv(const FanoReport& r) {
  std::string out = "k,q,q0,covered,mass,card,aexp_m,info,entropy,gap\n";
  char buf[256];
  for (const auto& x : r.rows) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%d,%d,%.17g,%zu,%.17g,%.17g,%.17g,%.17g\n", x.k, x.q,
                  static_cast<int>(x.q0), static_cast<int>(x.covered), x.mass, x.card, x.aexp_m, x.info, x.entropy,
                  x.gap);
    out += buf;
  }
  return out;
}

inline Json secrecy_json(const SecrecyResult& s) {
  return Json{{"value", s.value},     {"P_U", s.p_u},          {"P_X_given_U", s.p_x_given_u},
              {"by_size", s.by_size}, {"kkt_max", s.kkt_max}, {"kkt_ok", s.kkt_ok}};
}

inline Json wiretap_json(const WiretapReport& r) {
  Json cells = Json::array();
  for (const auto& c : r.cells)
    cells.push_back(Json{{"q", c.q}, {"mass", c.mass}, {"info_y", c.info_y}, {"info_z", c.info_z},
                         {"in_star", c.in_star}});
  return Json{{"n", r.n},
              {"rate", r.rate},
              {"epsilon", r.epsilon},
              {"leakage", r.leakage},
              {"q_count", r.q_count},
              {"star_source", r.star_source},
              {"star_count", r.star_count},
              {"star_mass", r.star_mass},
              {"star_mass_target", r.star_mass_target},
              {"star_mass_ok", r.star_mass_ok},
              {"leak_given_event", r.leak_given_event},
              {"leak_given_star", r.leak_given_star},
              {"info_given_star", r.info_given_star},
              {"deflation", r.deflation},
              {"count_term", r.count_term},
              {"fano_slack", r.fano_slack},
              {"chain_rhs", r.chain_rhs},
              {"chain_holds", r.chain_holds},
              {"steps", bound_json(r.steps)},
              {"cells", cells}};
}

inline Json lemma_json(const LemmaSuiteReport& r) {
  Json t = Json::array();
  for (const auto& x : r.tallies)
    t.push_back(Json{{"name", x.name},
                     {"checks", x.checks},
                     {"failures", x.failures},
                     {"skipped", x.skipped},
                     {"min_slack", x.min_slack},
                     {"first_failure", x.first_failure}});
  return Json{{"seed", r.seed}, {"trials", r.trials}, {"n", r.blocklengths}, {"pass", r.pass}, {"checks", t}};
}

}  // namespace fbt::io
