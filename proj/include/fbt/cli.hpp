#pragma once

#include <chrono>
#include <ctime>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fbt/io.hpp"
#include "fbt/lemma_suite.hpp"
#include "fbt/parallel.hpp"

namespace fbt::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kValidation = 2, kCapacity = 3, kInvariant = 4 };

namespace detail {

using io::Json;

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Splices keys of a flat JSON config in as "--key value" options of the chosen subcommand.
/// Options given on the command line win; CLI11 rejects keys that name no option.
inline std::vector<std::string> apply_config(std::vector<std::string> args, const std::vector<std::string>& subs) {
  std::string path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config needs a file");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty()) return rest;
  const Json cfg = io::load_json(path);
  if (!cfg.is_object()) throw ValidationError("config must be a JSON object");
  std::size_t at = rest.size();
  for (std::size_t i = 0; i < rest.size(); ++i)
    if (std::find(subs.begin(), subs.end(), rest[i]) != subs.end()) {
      at = i + 1;
      break;
    }
  if (at > rest.size()) throw ValidationError("config given without a subcommand");
  std::vector<std::string> extra;
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    const std::string flag = "--" + it.key();
    bool given = false;
    for (const auto& a : rest) given = given || a == flag || a.rfind(flag + "=", 0) == 0;
    if (given) continue;
    auto scalar = [](const Json& v) {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_number_float()) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
        return std::string(buf);
      }
      if (v.is_number()) return v.dump();
      throw ValidationError("config values must be strings, numbers, booleans or arrays of those");
    };
    const Json& v = it.value();
    if (v.is_boolean()) {
      if (v.get<bool>()) extra.push_back(flag);
    } else if (v.is_array()) {
      for (const auto& e : v) {
        extra.push_back(flag);
        extra.push_back(scalar(e));
      }
    } else {
      extra.push_back(flag);
      extra.push_back(scalar(v));
    }
  }
  rest.insert(rest.begin() + static_cast<std::ptrdiff_t>(at), extra.begin(), extra.end());
  return rest;
}

struct Outputs {
  std::string out;
  std::string csv;
  std::string record;
};

/// Result of one subcommand: the deterministic report, optional CSV, and whether its asserted checks held.
struct Result {
  Json report;
  std::string csv;
  bool checks_hold = true;
};

inline std::vector<Channel> load_channels(const std::vector<std::string>& paths) {
  std::vector<Channel> chs;
  for (const auto& p : paths) chs.push_back(io::channel_from_json(io::load_json(p)));
  return chs;
}

inline void check_unit(double v, const char* what, bool closed_low = false) {
  const bool ok = closed_low ? (v >= 0.0 && v <= 1.0) : (v > 0.0 && v <= 1.0);
  if (!ok) throw ValidationError(std::string(what) + " is out of range");
}

}  // namespace detail

/**
 * @brief Runs one command line; args excludes the program name.
 *
 * The report goes to --out when given, else to `out`. Diagnostics go to `err`.
 */
inline int run(const std::vector<std::string>& argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using detail::Json;
  CLI::App app{"Finite-blocklength toolkit for image sizes, spectrum partitions and strong converses", "fbt"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", kToolVersion);

  int threads = 1;
  std::uint64_t seed = 0;
  detail::Outputs outs;
  app.add_option("--threads", threads, "Worker threads; results do not depend on it")->check(CLI::Range(1, 256));
  app.add_option("--seed", seed, "Seed for every random draw");
  app.add_option("--out", outs.out, "Write the JSON report here instead of stdout");
  app.add_option("--csv", outs.csv, "Write the tabular part of the report as CSV");
  app.add_option("--record", outs.record, "Write a run record with config and timestamps");
  app.add_option("--config", "Flat JSON object of subcommand options");  // consumed before parsing
  app.fallthrough();

  // spectrum
  std::string dist_path;
  double delta_n = 0.5, delta = 0.5;
  std::optional<double> ambient;
  auto* sp = app.add_subcommand("spectrum", "Entropy-spectrum partition of a distribution");
  sp->add_option("--dist", dist_path, "Distribution file")->required();
  sp->add_option("--delta-n", delta_n, "Bin width in (0,1)");
  sp->add_option("--delta", delta, "Extra range above aexp(support)");
  sp->add_option("--ambient", ambient, "log2 of the ambient set size used for the bin count");

  // image-size
  std::string channel_path, set_path;
  double eta = 0.5;
  bool want_exact = false;
  ImageSolverOptions solver;
  auto* is = app.add_subcommand("image-size", "Minimum quasi-image and image size of a set");
  is->add_option("--channel", channel_path, "Channel file")->required();
  is->add_option("--set", set_path, "Set file")->required();
  is->add_option("--eta", eta, "Image threshold in (0,1]");
  is->add_option("--dist", dist_path, "Input distribution for the quasi-image (default uniform on the set)");
  is->add_flag("--exact", want_exact, "Fail with exit 3 when the exact solver is over its cap");
  is->add_option("--max-classes", solver.max_classes, "Exact solver cap on output classes");
  is->add_option("--node-limit", solver.node_limit, "Exact solver node budget");

  // partition
  std::vector<std::string> message_paths, channel_paths;
  double rho = 1.0;
  VstarParams vp;
  double w_delta = 0.0;
  auto* pa = app.add_subcommand("partition", "Message-joint slicing and equal-image-size partition");
  pa->add_option("--dist", dist_path, "Distribution file")->required();
  pa->add_option("--messages", message_paths, "Index file per message component (default: one trivial message)");
  pa->add_option("--channel", channel_paths, "Channel file per receiver")->required();
  pa->add_option("--eta", vp.eta, "Image threshold for the partition");
  pa->add_option("--delta-n", vp.delta_n, "Lattice spacing; 0 selects 1/ceil(sqrt(n))");
  pa->add_option("--delta", w_delta, "Slicing range; 0 selects log2|X|");
  pa->add_option("--rho", rho, "Slicing exponent");
  pa->add_option("--extract-delta", vp.extract.delta, "Extra spectrum range per extraction");
  pa->add_option("--schedule", vp.extract.widths, "Explicit per-channel widths");
  pa->add_option("--max-classes", vp.extract.solver.max_classes, "Exact solver cap on output classes");

  // fano-max / fano-avg
  std::string code_path;
  FanoParams fp;
  double alpha_avg = 0.0;
  auto add_fano = [&](const char* name, const char* what) {
    auto* f = app.add_subcommand(name, what);
    f->add_option("--code", code_path, "Code file")->required();
    f->add_option("--channel", channel_paths, "Channel file per receiver")->required();
    f->add_option("--eta", fp.eta, "Image threshold for the equal-image-size partition");
    f->add_option("--delta", fp.delta, "Slicing range; 0 selects log2|X|");
    f->add_option("--rho", fp.rho, "Slicing exponent");
    f->add_option("--delta-n", fp.vstar.delta_n, "Lattice spacing; 0 selects 1/ceil(sqrt(n))");
    f->add_option("--schedule", fp.vstar.extract.widths, "Explicit per-channel widths");
    return f;
  };
  auto* fm = add_fano("fano-max", "Strong Fano inequality under maximum error");
  auto* fa = add_fano("fano-avg", "Strong Fano inequality under average error");
  fa->add_option("--alpha", alpha_avg, "Split threshold override in (0,1]");

  // wiretap-bound
  std::string main_path, eve_path;
  std::size_t usize = 0;
  SecrecyOptions so;
  auto* wb = app.add_subcommand("wiretap-bound", "Single-letter secrecy bound, and the converse chain of a code");
  wb->add_option("--main", main_path, "Legitimate channel file")->required();
  wb->add_option("--eve", eve_path, "Eavesdropper channel file")->required();
  wb->add_option("--usize", usize, "Auxiliary alphabet size (default |X|)");
  wb->add_option("--starts", so.starts, "Random starts")->check(CLI::Range(std::size_t{1}, std::size_t{4096}));
  wb->add_option("--grid", so.grid, "Coarse grid resolution for initializers (0 disables)");
  wb->add_option("--code", code_path, "Also evaluate this code and its converse chain");

  // verify-lemmas
  std::size_t trials = 100;
  std::vector<std::size_t> ns;
  auto* vl = app.add_subcommand("verify-lemmas", "Randomized unconditional property suite");
  vl->add_option("--trials", trials, "Trials per blocklength")->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
  vl->add_option("--n", ns, "Blocklengths (default 2..8)");

  std::vector<std::string> args;
  try {
    args = detail::apply_config(argv, {"spectrum", "image-size", "partition", "fano-max", "fano-avg",
                                       "wiretap-bound", "verify-lemmas"});
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "fbt: " << e.what() << "\n";
    return kValidation;
  } catch (const Error& e) {
    err << "fbt: " << e.what() << "\n";
    return kValidation;
  }

  const std::string started = detail::utc_now();
  set_threads(threads);
  detail::Result res;
  try {
    if (sp->parsed()) {
      const SequenceDist d = io::dist_from_json(io::load_json(dist_path));
      const SpectrumPartition part = build_spectrum_partition(d, delta_n, delta, ambient);
      res.report = io::spectrum_json(part, d);
      res.checks_hold = res.report["bin_size_bounds"]["pass"].get<bool>() &&
                        res.report["bin_conditional_uniformity"]["pass"].get<bool>();
      res.csv = "k,tail,size,mass,aexp\n";
      for (const auto& b : res.report["bins"]) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%zu,%d,%zu,%.17g,%.17g\n", b["k"].get<std::size_t>(),
                      static_cast<int>(b["tail"].get<bool>()), b["size"].get<std::size_t>(),
                      b["mass"].get<double>(), b["aexp"].get<double>());
        res.csv += buf;
      }
    } else if (is->parsed()) {
      detail::check_unit(eta, "eta");
      const Channel ch = io::channel_from_json(io::load_json(channel_path));
      const SequenceSet a = io::set_from_json(io::load_json(set_path));
      if (a.q() != ch.input_size()) throw DimensionError("set alphabet differs from channel input alphabet");
      const QuasiImageResult q = dist_path.empty()
                                     ? min_quasi_image(ch, a, eta)
                                     : min_quasi_image(ch, io::dist_from_json(io::load_json(dist_path)), a, eta);
      const ImageBracket b = want_exact ? min_image_exact(ch, a, eta, solver) : image_size(ch, a, eta, solver);
      res.report = Json{{"n", a.n()}, {"eta", eta}, {"set_size", a.size()}, {"quasi_image", io::quasi_json(q)},
                        {"image", io::bracket_json(b)}};
    } else if (pa->parsed()) {
      const SequenceDist d = io::dist_from_json(io::load_json(dist_path));
      const std::vector<Channel> chs = detail::load_channels(channel_paths);
      std::vector<PartitioningIndex> comps;
      for (const auto& p : message_paths) comps.push_back(io::index_from_json(io::load_json(p)));
      if (comps.empty()) comps.push_back(PartitioningIndex::trivial(d.support()));
      PartitioningIndex joint = comps.front();
      for (std::size_t i = 1; i < comps.size(); ++i) joint = product_index(joint, comps[i]);
      const double wd = w_delta > 0.0 ? w_delta : std::max(1e-3, std::log2(static_cast<double>(d.q())));
      const WPartition w = build_W(d, joint, wd, rho);
      const EqualImagePartition v = build_Vstar(chs, d, d.support(), comps, vp);
      res.report = Json{{"W", io::w_json(w)}, {"Vstar", io::vstar_json(v)}};
      res.checks_hold = w.partitions_set && v.partitions;
    } else if (fm->parsed() || fa->parsed()) {
      const Code c = io::code_from_json(io::load_json(code_path));
      const std::vector<Channel> chs = detail::load_channels(channel_paths);
      if (fa->parsed() && alpha_avg != 0.0) fp.alpha_avg = alpha_avg;
      const FanoReport r = fm->parsed() ? strong_fano_max(c, chs, fp) : strong_fano_avg(c, chs, fp);
      res.report = io::fano_json(r);
      res.csv = io::fano_csv(r);
      for (const auto& row : r.rows) res.checks_hold = res.checks_hold && row.dp_ok;
      for (bool ok : r.u_mass_ok) res.checks_hold = res.checks_hold && ok;
    } else if (wb->parsed()) {
      const WiretapInstance w = WiretapInstance::make(io::channel_from_json(io::load_json(main_path)),
                                                      io::channel_from_json(io::load_json(eve_path)));
      so.seed = seed;
      const SecrecyResult s = secrecy_bound_single_letter(w, usize, so);
      res.report = io::secrecy_json(s);
      if (!code_path.empty()) {
        const WiretapReport chain = wtc_converse_chain(w, io::code_from_json(io::load_json(code_path)));
        res.report["chain"] = io::wiretap_json(chain);
        res.checks_hold = chain.steps.pass;
      }
    } else if (vl->parsed()) {
      if (ns.empty()) ns = {2, 3, 4, 5, 6, 7, 8};
      const LemmaSuiteReport r = run_lemma_suite(seed, trials, ns);
      res.report = io::lemma_json(r);
      res.checks_hold = r.pass;
      res.csv = "name,checks,failures,skipped,min_slack\n";
      for (const auto& t : r.tallies) {
        char buf[200];
        std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%.17g\n", t.name.c_str(), t.checks, t.failures, t.skipped,
                      t.min_slack);
        res.csv += buf;
      }
    }

    const std::string text = io::dump(res.report);
    if (outs.out.empty())
      out << text;
    else
      io::save_text(outs.out, text);
    if (!outs.csv.empty()) io::save_text(outs.csv, res.csv);
    if (!outs.record.empty()) {
      Json rec;
      rec["tool"] = "fbt";
      rec["version"] = kToolVersion;
      rec["args"] = args;
      rec["seed"] = seed;
      rec["threads"] = threads;
      rec["started"] = started;
      rec["finished"] = detail::utc_now();
      rec["pass"] = res.checks_hold;
      rec["report"] = res.report;
      io::save_text(outs.record, io::dump(rec));
    }
  } catch (const CapacityError& e) {
    err << "fbt: capacity: " << e.what() << "\n";
    return kCapacity;
  } catch (const InvariantError& e) {
    err << "fbt: invariant: " << e.what() << "\n";
    return kInvariant;
  } catch (const Error& e) {
    err << "fbt: " << e.what() << "\n";
    return kValidation;
  } catch (const nlohmann::json::exception& e) {
    err << "fbt: " << e.what() << "\n";
    return kValidation;
  }
  if (!res.checks_hold) {
    err << "fbt: a checked property failed; see the report\n";
    return kInvariant;
  }
  return kOk;
}

}  // namespace fbt::cli
