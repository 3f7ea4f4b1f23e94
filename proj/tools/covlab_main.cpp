// Batch front-end: loads an experiment config, dispatches to the analysis and
// simulation layers, and emits deterministic CSV or JSON.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "covlab/asymptotics.hpp"
#include "covlab/bounds.hpp"
#include "covlab/event_set.hpp"
#include "covlab/generation.hpp"
#include "covlab/sim.hpp"

using json = nlohmann::json;
using covlab::CodebookSizes;
using covlab::EventSet;
using covlab::GenerationLaw;
using covlab::JointPmf;
using covlab::kInf;
using covlab::ValidationError;
using covlab::VarSet;

namespace {

struct Options {
  std::string config_path;
  std::string format;  // empty: config value or "csv"
  std::string out;
  bool bits = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> trials;
  std::optional<int> threads;
};

// Nat-valued quantities convert to bits on output, rate-valued inputs convert
// from bits, when --bits is active.
double nat_in(double x, bool bits) { return bits ? x * std::numbers::ln2 : x; }
double nat_out(double x, bool bits) { return bits ? x / std::numbers::ln2 : x; }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string fmt_u64(std::uint64_t v) { return std::to_string(v); }

std::string set_label(VarSet s) { return s.empty() ? "-" : s.label(); }

json set_json(VarSet s) { return json(s.vars()); }

// Non-finite doubles serialize as strings so JSON stays lossless.
json jnum(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

void csv_row(std::string& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  out += '\n';
}

[[noreturn]] void fail(const std::string& msg) { throw ValidationError(msg); }

const json& need(const json& cfg, const std::string& key) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) fail("config: field `" + key + "` is required for this subcommand");
  return *it;
}

double num_field(const json& j, const std::string& key) {
  if (!j.is_number()) fail("config: field `" + key + "` must be a number");
  return j.get<double>();
}

std::uint64_t uint_field(const json& j, const std::string& key) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    fail("config: field `" + key + "` must be a nonnegative integer");
  }
  return j.get<std::uint64_t>();
}

std::vector<double> double_list(const json& j, const std::string& key) {
  if (!j.is_array() || j.empty()) fail("config: field `" + key + "` must be a nonempty array");
  std::vector<double> out;
  for (const auto& x : j) out.push_back(num_field(x, key));
  return out;
}

//! Parsed experiment configuration plus the effective-value echo.
struct Config {
  json raw;
  json echo;
  bool bits = false;

  JointPmf p = JointPmf::validated({1, 1, 1}, {1.0});
  std::size_t guard = covlab::kDefaultEnumerationGuard;
  std::uint64_t seed = 0;
  std::uint64_t trials = 1000;
  int threads = 1;

  bool has(const std::string& key) const { return raw.contains(key); }

  int n() {
    const std::uint64_t v = uint_field(need(raw, "n"), "n");
    if (v < 1 || v > 1000000) fail("config: field `n` must lie in [1, 1000000]");
    echo["n"] = v;
    return static_cast<int>(v);
  }

  std::vector<int> n_sweep() {
    if (has("n") == has("n_sweep")) {
      fail("config: exactly one of `n`/`n_sweep` must be given");
    }
    if (has("n")) return {n()};
    const json& j = need(raw, "n_sweep");
    if (!j.is_array() || j.empty()) fail("config: field `n_sweep` must be a nonempty array");
    std::vector<int> out;
    for (const auto& x : j) {
      const std::uint64_t v = uint_field(x, "n_sweep");
      if (v < 1 || v > 1000000) fail("config: field `n_sweep` entries must lie in [1, 1000000]");
      out.push_back(static_cast<int>(v));
    }
    echo["n_sweep"] = out;
    return out;
  }

  double delta() {
    const double d = nat_in(num_field(need(raw, "delta"), "delta"), bits);
    if (!(d >= 0.0) || !std::isfinite(d)) fail("config: field `delta` must be >= 0");
    echo["delta"] = d;
    return d;
  }

  std::vector<double> epsilon_grid() {
    if (has("epsilon") && has("epsilon_grid")) {
      fail("config: give only one of `epsilon`/`epsilon_grid`");
    }
    std::vector<double> grid;
    if (has("epsilon")) {
      grid.push_back(num_field(raw["epsilon"], "epsilon"));
    } else if (has("epsilon_grid")) {
      grid = double_list(raw["epsilon_grid"], "epsilon_grid");
    } else {
      for (int i = 1; i <= 9; ++i) grid.push_back(i / 10.0);
    }
    for (double e : grid) {
      if (!(e > 0.0 && e < 1.0)) {
        fail("config: field `epsilon` values must lie strictly inside (0, 1)");
      }
    }
    echo["epsilon_grid"] = grid;
    return grid;
  }

  // Codebook sizes at blocklength n, from exactly one of `M`/`R`.
  CodebookSizes sizes(int n_val) {
    if (has("M") == has("R")) fail("config: exactly one of `M`/`R` must be given");
    if (has("M")) {
      const json& j = raw["M"];
      if (!j.is_array() || j.empty()) fail("config: field `M` must be a nonempty array");
      std::vector<std::uint64_t> counts;
      for (const auto& x : j) counts.push_back(uint_field(x, "M"));
      echo["M"] = counts;
      if (static_cast<int>(counts.size()) != p.k()) {
        fail("config: field `M` must list one size per codebook");
      }
      return CodebookSizes::from_counts(std::move(counts));
    }
    std::vector<double> rates = double_list(raw["R"], "R");
    for (double& r : rates) {
      r = nat_in(r, bits);
      if (!(r >= 0.0) || !std::isfinite(r)) fail("config: field `R` entries must be >= 0");
    }
    echo["R"] = rates;
    if (static_cast<int>(rates.size()) != p.k()) {
      fail("config: field `R` must list one rate per codebook");
    }
    return CodebookSizes::from_rates(rates, n_val);
  }

  VarSet var_list(const std::string& key) {
    const json& j = need(raw, key);
    if (!j.is_array() || j.empty()) fail("config: field `" + key + "` must be a nonempty array");
    VarSet s;
    for (const auto& x : j) {
      const std::uint64_t v = uint_field(x, key);
      if (v >= static_cast<std::uint64_t>(p.num_vars())) {
        fail("config: field `" + key + "` names a variable outside the distribution");
      }
      s = s.with(static_cast<int>(v));
    }
    echo[key] = s.vars();
    return s;
  }

  // Event over the length-n product space; `typical` is the default kind.
  EventSet event(int n_val) {
    json ev = has("event") ? raw["event"] : json{{"kind", "typical"}};
    if (!ev.is_object() || !ev.contains("kind") || !ev["kind"].is_string()) {
      fail("config: field `event` must be an object with a string `kind`");
    }
    const std::string kind = ev["kind"].get<std::string>();
    echo["event"] = ev;
    if (kind == "typical") {
      return covlab::typical_event(p, n_val, delta(), guard);
    }
    if (kind == "equal") {
      if (!ev.contains("vars")) fail("config: field `event.vars` is required for kind `equal`");
      VarSet vars;
      for (const auto& x : ev["vars"]) {
        const std::uint64_t v = uint_field(x, "event.vars");
        if (v >= static_cast<std::uint64_t>(p.num_vars())) {
          fail("config: field `event.vars` names a variable outside the distribution");
        }
        vars = vars.with(static_cast<int>(v));
      }
      std::vector<int> ext;
      for (int v = 0; v < p.num_vars(); ++v) {
        ext.push_back(static_cast<int>(covlab::checked_pow(p.size(v), n_val, guard)));
      }
      return covlab::equal_event(std::move(ext), vars, guard);
    }
    if (kind == "explicit") {
      if (n_val != 1) fail("config: `event.kind` = explicit is only valid at n = 1");
      if (!ev.contains("members") || !ev["members"].is_array()) {
        fail("config: field `event.members` must be an array of cell indices");
      }
      EventSet F = EventSet::none(p.alphabet_sizes(), guard);
      for (const auto& x : ev["members"]) {
        const std::uint64_t flat = uint_field(x, "event.members");
        if (flat >= F.space_size()) {
          fail("config: field `event.members` holds an out-of-range cell index");
        }
        F.add_flat(flat);
      }
      return F;
    }
    fail("config: field `event.kind` must be one of typical|equal|explicit");
  }
};

Config load_config(const Options& opt) {
  std::ifstream in(opt.config_path);
  if (!in) fail("config: cannot open `" + opt.config_path + "`");
  json raw;
  try {
    raw = json::parse(in);
  } catch (const json::parse_error& e) {
    fail("config: `" + opt.config_path + "` is not valid JSON: " + e.what());
  }
  if (!raw.is_object()) fail("config: top level must be a JSON object");

  Config cfg;
  cfg.raw = raw;
  cfg.bits = opt.bits;

  const json& dist = need(raw, "distribution");
  if (!dist.is_object()) fail("config: field `distribution` must be an object");
  const json& jsizes = need(dist, "alphabet_sizes");
  if (!jsizes.is_array() || jsizes.empty()) {
    fail("config: field `distribution.alphabet_sizes` must be a nonempty array");
  }
  std::vector<int> sizes;
  for (const auto& x : jsizes) {
    const std::uint64_t v = uint_field(x, "distribution.alphabet_sizes");
    if (v < 1 || v > 4096) {
      fail("config: field `distribution.alphabet_sizes` entries must lie in [1, 4096]");
    }
    sizes.push_back(static_cast<int>(v));
  }
  const std::vector<double> probs = double_list(need(dist, "probs"), "distribution.probs");
  double tol = covlab::kDefaultMassTolerance;
  if (dist.contains("tolerance")) tol = num_field(dist["tolerance"], "distribution.tolerance");
  try {
    cfg.p = JointPmf::validated(sizes, probs, tol);
  } catch (const ValidationError& e) {
    fail(std::string("config: field `distribution` is invalid: ") + e.what());
  }
  cfg.echo["distribution"] = {{"alphabet_sizes", sizes}, {"probs", probs}, {"tolerance", tol}};

  if (raw.contains("k")) {
    if (uint_field(raw["k"], "k") != static_cast<std::uint64_t>(cfg.p.k())) {
      fail("config: field `k` disagrees with the distribution (expected " +
           std::to_string(cfg.p.k()) + ")");
    }
  }
  cfg.echo["k"] = cfg.p.k();

  if (raw.contains("enumeration_guard")) {
    cfg.guard = uint_field(raw["enumeration_guard"], "enumeration_guard");
    if (cfg.guard < 1) fail("config: field `enumeration_guard` must be >= 1");
  }
  cfg.echo["enumeration_guard"] = cfg.guard;

  if (raw.contains("seed")) cfg.seed = uint_field(raw["seed"], "seed");
  if (opt.seed) cfg.seed = *opt.seed;
  cfg.echo["seed"] = cfg.seed;

  if (raw.contains("trials")) cfg.trials = uint_field(raw["trials"], "trials");
  if (opt.trials) cfg.trials = *opt.trials;
  if (cfg.trials < 1) fail("config: field `trials` must be >= 1");
  cfg.echo["trials"] = cfg.trials;

  if (raw.contains("threads")) {
    const std::uint64_t t = uint_field(raw["threads"], "threads");
    if (t < 1 || t > 4096) fail("config: field `threads` must lie in [1, 4096]");
    cfg.threads = static_cast<int>(t);
  }
  if (opt.threads) cfg.threads = *opt.threads;
  if (cfg.threads < 1) fail("config: field `threads` must be >= 1");
  // Thread count is an execution detail: results are thread-invariant, so it
  // stays out of the echoed config to keep output bytes stable.

  cfg.echo["bits"] = cfg.bits;
  return cfg;
}

void emit(const Options& opt, const std::string& text) {
  if (opt.out.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(opt.out, std::ios::binary);
  if (!f) fail("cannot open output file `" + opt.out + "`");
  f << text;
}

std::string csv_header(const Config& cfg, const std::vector<std::string>& cols) {
  std::string out = "# config=" + cfg.echo.dump() + "\n";
  csv_row(out, cols);
  return out;
}

json json_report(const Config& cfg) { return json{{"config", cfg.echo}}; }

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------- entropy --

int cmd_entropy(const Options& opt, Config& cfg) {
  const JointPmf& p = cfg.p;
  const bool bits = cfg.bits;
  const int side = p.num_vars() - 1;
  const VarSet books = VarSet::range(1, p.k());

  struct Row {
    VarSet subset, given;
    double value;
  };
  std::vector<Row> rows;
  for (VarSet S : covlab::nonempty_subsets(p.all_vars())) {
    rows.push_back({S, VarSet(), p.entropy(S)});
  }
  for (VarSet S : covlab::nonempty_subsets(books)) {
    const VarSet pair = VarSet::of({0, side});
    rows.push_back({S, VarSet::of({0}), p.cond_entropy(S, VarSet::of({0}))});
    rows.push_back({S, pair, p.cond_entropy(S, pair)});
    const VarSet rest = pair.unite(books.minus(S));
    if (rest != pair) rows.push_back({S, rest, p.cond_entropy(S, rest)});
  }

  if (opt.format == "json") {
    json j = json_report(cfg);
    json out = json::array();
    for (const Row& r : rows) {
      out.push_back({{"subset", set_json(r.subset)},
                     {"given", set_json(r.given)},
                     {"entropy", jnum(nat_out(r.value, bits))}});
    }
    j["rows"] = std::move(out);
    emit(opt, dump_json(j));
    return 0;
  }
  std::string out = csv_header(cfg, {"subset", "given", "entropy"});
  for (const Row& r : rows) {
    csv_row(out, {set_label(r.subset), set_label(r.given), fmt(nat_out(r.value, bits))});
  }
  emit(opt, out);
  return 0;
}

// ----------------------------------------------------------------- bounds --

int cmd_bounds(const Options& opt, Config& cfg) {
  const int n = cfg.n();
  const std::vector<double> grid = cfg.epsilon_grid();
  const EventSet F = cfg.event(n);
  const CodebookSizes M = cfg.sizes(n);
  const JointPmf ext = covlab::product_extend(cfg.p, n, cfg.guard);
  const auto r = covlab::bounds_report(ext, F, M, grid);
  const bool bits = cfg.bits;

  if (opt.format == "json") {
    json j = json_report(cfg);
    json constants;
    constants["gamma"] = jnum(nat_out(r.constants.gamma, bits));
    json alpha, beta;
    for (std::uint32_t cm = 1; cm < (1u << r.constants.k); ++cm) {
      const std::string key = covlab::SubsetConstants::from_cmask(cm).label();
      alpha[key] = jnum(nat_out(r.constants.alpha[cm], bits));
      beta[key] = jnum(nat_out(r.constants.beta[cm], bits));
    }
    constants["alpha"] = std::move(alpha);
    constants["beta"] = std::move(beta);
    j["constants"] = std::move(constants);
    j["p_f_complement"] = jnum(r.p_f_complement);
    j["lower"] = {{"raw", jnum(r.lower.raw)},
                  {"clamped", jnum(r.lower.clamped)},
                  {"binding", set_json(r.lower.binding)}};
    json rows = json::array();
    for (const auto& row : r.rows) {
      rows.push_back({{"epsilon", jnum(row.epsilon)},
                      {"chebyshev", {{"raw", jnum(row.chebyshev.raw)},
                                     {"clamped", jnum(row.chebyshev.clamped)},
                                     {"split_term", jnum(row.chebyshev.split_term)},
                                     {"mean_term", jnum(row.chebyshev.mean_term)},
                                     {"pair_sum", jnum(row.chebyshev.pair_sum)},
                                     {"conditional", jnum(row.chebyshev.conditional)}}},
                      {"cauchy_schwarz", {{"raw", jnum(row.cauchy_schwarz.raw)},
                                          {"clamped", jnum(row.cauchy_schwarz.clamped)},
                                          {"conditional", jnum(row.cauchy_schwarz.conditional)}}}});
    }
    j["rows"] = std::move(rows);
    j["best_chebyshev_epsilon"] =
        jnum(r.rows[static_cast<std::size_t>(r.best_chebyshev_row)].epsilon);
    j["best_cauchy_schwarz_epsilon"] =
        jnum(r.rows[static_cast<std::size_t>(r.best_cauchy_schwarz_row)].epsilon);
    emit(opt, dump_json(j));
    return 0;
  }

  std::string out = csv_header(
      cfg, {"epsilon", "chebyshev_raw", "chebyshev_clamped", "chebyshev_split",
            "chebyshev_mean", "chebyshev_pair", "cauchy_schwarz_raw", "cauchy_schwarz_clamped",
            "lower_raw", "lower_clamped", "lower_binding", "p_f_complement", "gamma",
            "best_chebyshev", "best_cauchy_schwarz"});
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    csv_row(out,
            {fmt(row.epsilon), fmt(row.chebyshev.raw), fmt(row.chebyshev.clamped),
             fmt(row.chebyshev.split_term), fmt(row.chebyshev.mean_term),
             fmt(row.chebyshev.pair_sum), fmt(row.cauchy_schwarz.raw),
             fmt(row.cauchy_schwarz.clamped), fmt(r.lower.raw), fmt(r.lower.clamped),
             set_label(r.lower.binding), fmt(r.p_f_complement),
             fmt(nat_out(r.constants.gamma, cfg.bits)),
             i == static_cast<std::size_t>(r.best_chebyshev_row) ? "1" : "0",
             i == static_cast<std::size_t>(r.best_cauchy_schwarz_row) ? "1" : "0"});
  }
  emit(opt, out);
  return 0;
}

// ------------------------------------------------------------------ rates --

int cmd_rates(const Options& opt, Config& cfg) {
  const double delta = cfg.delta();
  const bool bits = cfg.bits;
  if (cfg.has("rates") == cfg.has("rate_grid")) {
    fail("config: exactly one of `rates`/`rate_grid` must be given");
  }

  if (cfg.has("rate_grid")) {
    const json& jg = cfg.raw["rate_grid"];
    if (!jg.is_array() || jg.empty()) {
      fail("config: field `rate_grid` must be a nonempty array of rate axes");
    }
    std::vector<std::vector<double>> axes;
    for (const auto& axis : jg) {
      axes.push_back(double_list(axis, "rate_grid"));
      for (double& r : axes.back()) r = nat_in(r, bits);
    }
    cfg.echo["rate_grid"] = axes;
    const auto rows = covlab::boundary_scan(cfg.p, delta, axes);

    if (opt.format == "json") {
      json j = json_report(cfg);
      json out = json::array();
      for (const auto& row : rows) {
        json rates = json::array();
        for (double r : row.rates) rates.push_back(jnum(nat_out(r, bits)));
        out.push_back(
            {{"rates", std::move(rates)}, {"direct", row.direct}, {"converse", row.converse}});
      }
      j["rows"] = std::move(out);
      emit(opt, dump_json(j));
      return 0;
    }
    std::vector<std::string> cols;
    for (int jx = 1; jx <= cfg.p.k(); ++jx) cols.push_back("R_" + std::to_string(jx));
    cols.push_back("direct");
    cols.push_back("converse");
    std::string out = csv_header(cfg, cols);
    for (const auto& row : rows) {
      std::vector<std::string> cells;
      for (double r : row.rates) cells.push_back(fmt(nat_out(r, bits)));
      cells.push_back(row.direct ? "1" : "0");
      cells.push_back(row.converse ? "1" : "0");
      csv_row(out, cells);
    }
    emit(opt, out);
    return 0;
  }

  std::vector<double> rates = double_list(cfg.raw["rates"], "rates");
  for (double& r : rates) r = nat_in(r, bits);
  cfg.echo["rates"] = rates;
  const covlab::RateTuple R = covlab::RateTuple::of(rates);
  const auto direct = covlab::direct_check(cfg.p, R, delta);
  const auto converse = covlab::converse_check(cfg.p, R, delta);

  if (opt.format == "json") {
    json j = json_report(cfg);
    const auto verdict = [&](const covlab::RegionVerdict& v) {
      json rows = json::array();
      for (const auto& row : v.rows) {
        rows.push_back({{"subset", set_json(row.subset)},
                        {"rate_sum", jnum(nat_out(row.rate_sum, bits))},
                        {"threshold", jnum(nat_out(row.threshold, bits))},
                        {"slack", jnum(nat_out(row.slack, bits))},
                        {"ok", row.ok}});
      }
      return json{{"satisfied", v.satisfied},
                  {"binding", set_json(v.binding)},
                  {"min_slack", jnum(nat_out(v.min_slack, bits))},
                  {"rows", std::move(rows)}};
    };
    j["direct"] = verdict(direct);
    j["converse"] = verdict(converse);
    emit(opt, dump_json(j));
    return 0;
  }

  std::string out = csv_header(cfg, {"check", "subset", "rate_sum", "threshold", "slack", "ok",
                                     "satisfied", "binding"});
  const auto rows_of = [&](const char* name, const covlab::RegionVerdict& v) {
    for (const auto& row : v.rows) {
      csv_row(out, {name, set_label(row.subset), fmt(nat_out(row.rate_sum, bits)),
                    fmt(nat_out(row.threshold, bits)), fmt(nat_out(row.slack, bits)),
                    row.ok ? "1" : "0", v.satisfied ? "1" : "0", set_label(v.binding)});
    }
  };
  rows_of("direct", direct);
  rows_of("converse", converse);
  emit(opt, out);
  return 0;
}

// --------------------------------------------------------------- exponent --

int cmd_exponent(const Options& opt, Config& cfg) {
  const double delta = cfg.delta();
  const bool bits = cfg.bits;
  const VarSet scope = cfg.has("scope") ? cfg.var_list("scope") : cfg.p.all_vars();
  const auto r = covlab::exponent_report(cfg.p, delta, scope);
  const bool with_n = cfg.has("n");
  int n_val = 0;
  double bound = 0.0;
  double schedule = std::numeric_limits<double>::quiet_NaN();
  if (with_n) {
    n_val = cfg.n();
    bound = covlab::atypicality_bound(r, n_val);
    if (r.overall.effective() > 0.0) {
      schedule = covlab::epsilon_schedule(cfg.p, delta, n_val, scope).value;
    }
  }

  const auto tail_name = [](covlab::Tail t) {
    return t == covlab::Tail::upper ? "upper" : "lower";
  };

  if (opt.format == "json") {
    json j = json_report(cfg);
    json entries = json::array();
    for (const auto& e : r.entries) {
      const auto one = [&](const covlab::Exponent& x) {
        return json{{"exponent", jnum(nat_out(x.effective(), bits))},
                    {"unbounded", x.unbounded},
                    {"t_arg", jnum(x.t_arg)}};
      };
      entries.push_back(
          {{"subset", set_json(e.subset)}, {"upper", one(e.upper)}, {"lower", one(e.lower)}});
    }
    j["entries"] = std::move(entries);
    j["prefactor"] = jnum(r.prefactor);
    j["overall"] = {{"exponent", jnum(nat_out(r.overall.value, bits))},
                    {"unbounded", r.overall.unbounded}};
    j["binding"] = set_json(r.binding);
    j["binding_tail"] = tail_name(r.binding_tail);
    if (with_n) {
      j["n"] = n_val;
      j["atypicality_bound"] = jnum(bound);
      j["epsilon_schedule"] = jnum(schedule);
    }
    emit(opt, dump_json(j));
    return 0;
  }

  std::vector<std::string> cols = {"subset",    "tail",    "exponent", "unbounded",
                                   "t_arg",     "prefactor", "overall", "binding",
                                   "binding_tail"};
  if (with_n) {
    cols.push_back("n");
    cols.push_back("atypicality_bound");
    cols.push_back("epsilon_schedule");
  }
  std::string out = csv_header(cfg, cols);
  for (const auto& e : r.entries) {
    for (covlab::Tail t : {covlab::Tail::upper, covlab::Tail::lower}) {
      const covlab::Exponent& x = t == covlab::Tail::upper ? e.upper : e.lower;
      std::vector<std::string> cells = {set_label(e.subset),
                                        tail_name(t),
                                        fmt(nat_out(x.effective(), bits)),
                                        x.unbounded ? "1" : "0",
                                        fmt(x.t_arg),
                                        fmt(r.prefactor),
                                        fmt(nat_out(r.overall.effective(), bits)),
                                        set_label(r.binding),
                                        tail_name(r.binding_tail)};
      if (with_n) {
        cells.push_back(std::to_string(n_val));
        cells.push_back(fmt(bound));
        cells.push_back(fmt(schedule));
      }
      csv_row(out, cells);
    }
  }
  emit(opt, out);
  return 0;
}

// --------------------------------------------------------------- simulate --

int cmd_simulate(const Options& opt, Config& cfg) {
  const std::vector<int> sweep = cfg.n_sweep();
  const double delta = cfg.delta();
  const GenerationLaw law = GenerationLaw::from(cfg.p);

  struct Row {
    int n;
    covlab::CoverEstimate est;
  };
  std::vector<Row> rows;
  for (int n_val : sweep) {
    const CodebookSizes M = cfg.sizes(n_val);
    rows.push_back({n_val, covlab::estimate_cover_probability(law, cfg.p, n_val, M, delta,
                                                              cfg.trials, cfg.seed,
                                                              cfg.threads)});
  }

  const auto method_name = [](covlab::TrialMethod m) {
    return m == covlab::TrialMethod::search ? "search" : "analytic";
  };

  if (opt.format == "json") {
    json j = json_report(cfg);
    json out = json::array();
    for (const Row& r : rows) {
      out.push_back({{"n", r.n},
                     {"trials", r.est.trials},
                     {"successes", r.est.successes},
                     {"p_hat", jnum(r.est.p_hat)},
                     {"ci_low", jnum(r.est.ci_low)},
                     {"ci_high", jnum(r.est.ci_high)},
                     {"method", method_name(r.est.method)},
                     {"seed", r.est.seed}});
    }
    j["rows"] = std::move(out);
    emit(opt, dump_json(j));
    return 0;
  }

  std::string out = csv_header(
      cfg, {"n", "trials", "successes", "p_hat", "ci_low", "ci_high", "method", "seed"});
  for (const Row& r : rows) {
    csv_row(out, {std::to_string(r.n), fmt_u64(r.est.trials), fmt_u64(r.est.successes),
                  fmt(r.est.p_hat), fmt(r.est.ci_low), fmt(r.est.ci_high),
                  method_name(r.est.method), fmt_u64(r.est.seed)});
  }
  emit(opt, out);
  return 0;
}

// ----------------------------------------------------------------- oracle --

int cmd_oracle(const Options& opt, Config& cfg) {
  const int n = cfg.n();
  const EventSet F = cfg.event(n);
  const CodebookSizes M = cfg.sizes(n);
  const GenerationLaw law = GenerationLaw::from(cfg.p);
  const double p_zero = covlab::exact_oracle(law, cfg.p, n, M, F, cfg.guard);

  if (opt.format == "json") {
    json j = json_report(cfg);
    j["n"] = n;
    j["event_count"] = F.count;
    j["p_no_cover"] = jnum(p_zero);
    j["p_cover"] = jnum(1.0 - p_zero);
    emit(opt, dump_json(j));
    return 0;
  }
  std::string out = csv_header(cfg, {"n", "event_count", "p_no_cover", "p_cover"});
  csv_row(out, {std::to_string(n), fmt_u64(F.count), fmt(p_zero), fmt(1.0 - p_zero)});
  emit(opt, out);
  return 0;
}

// ------------------------------------------------------------------ audit --

int cmd_audit(const Options& opt, Config& cfg) {
  std::uint64_t samples = 4000;
  if (cfg.has("audit_samples")) samples = uint_field(cfg.raw["audit_samples"], "audit_samples");
  if (samples < 100) fail("config: field `audit_samples` must be >= 100");
  cfg.echo["audit_samples"] = samples;
  const GenerationLaw law = GenerationLaw::from(cfg.p);
  const auto report = covlab::assumption1_audit(law, samples, cfg.seed);

  if (opt.format == "json") {
    json j = json_report(cfg);
    j["pass"] = report.pass;
    j["samples"] = report.samples;
    json pats = json::array();
    for (const auto& pat : report.patterns) {
      pats.push_back({{"overlap", set_json(pat.overlap)},
                      {"max_abs_dev", jnum(pat.max_abs_dev)},
                      {"threshold", jnum(pat.threshold)},
                      {"pass", pat.pass}});
    }
    j["patterns"] = std::move(pats);
    emit(opt, dump_json(j));
    return 0;
  }
  std::string out = csv_header(
      cfg, {"overlap", "max_abs_dev", "threshold", "pass", "overall_pass", "samples"});
  for (const auto& pat : report.patterns) {
    csv_row(out, {set_label(pat.overlap), fmt(pat.max_abs_dev), fmt(pat.threshold),
                  pat.pass ? "1" : "0", report.pass ? "1" : "0", fmt_u64(report.samples)});
  }
  emit(opt, out);
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"covering-bound analysis and simulation toolkit"};
  app.fallthrough();
  app.require_subcommand(1);

  Options opt;
  app.add_option("--config", opt.config_path, "experiment config file (JSON)")->required();
  app.add_option("--format", opt.format, "output format: csv|json (default csv)");
  app.add_option("--out", opt.out, "write output to this file instead of stdout");
  app.add_flag("--bits", opt.bits, "rates and entropies in bits instead of nats");
  std::uint64_t seed_val = 0, trials_val = 0;
  int threads_val = 0;
  auto* seed_opt = app.add_option("--seed", seed_val, "override the config seed");
  auto* trials_opt = app.add_option("--trials", trials_val, "override the config trial count");
  auto* threads_opt = app.add_option("--threads", threads_val, "override the config thread count");

  auto* sc_entropy =
      app.add_subcommand("entropy", "marginal and conditional entropies of the distribution");
  auto* sc_bounds =
      app.add_subcommand("bounds", "one-shot no-cover bounds over the epsilon grid");
  auto* sc_rates = app.add_subcommand("rates", "direct/converse rate-region checks");
  auto* sc_exponent =
      app.add_subcommand("exponent", "large-deviation exponents for atypicality");
  auto* sc_simulate = app.add_subcommand("simulate", "Monte Carlo covering estimate");
  auto* sc_oracle = app.add_subcommand("oracle", "exact no-cover probability by enumeration");
  auto* sc_audit = app.add_subcommand("audit", "codebook independence audit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  if (seed_opt->count()) opt.seed = seed_val;
  if (trials_opt->count()) opt.trials = trials_val;
  if (threads_opt->count()) {
    if (threads_val < 1) fail("flag --threads must be >= 1");
    opt.threads = threads_val;
  }

  Config cfg = load_config(opt);
  if (opt.format.empty()) {
    opt.format = cfg.raw.contains("format")
                     ? cfg.raw["format"].is_string()
                           ? cfg.raw["format"].get<std::string>()
                           : std::string()
                     : "csv";
  }
  if (opt.format != "csv" && opt.format != "json") {
    fail("config: output format must be csv or json");
  }
  cfg.echo["format"] = opt.format;

  if (sc_entropy->parsed()) return cmd_entropy(opt, cfg);
  if (sc_bounds->parsed()) return cmd_bounds(opt, cfg);
  if (sc_rates->parsed()) return cmd_rates(opt, cfg);
  if (sc_exponent->parsed()) return cmd_exponent(opt, cfg);
  if (sc_simulate->parsed()) return cmd_simulate(opt, cfg);
  if (sc_oracle->parsed()) return cmd_oracle(opt, cfg);
  if (sc_audit->parsed()) return cmd_audit(opt, cfg);
  fail("unknown subcommand");
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const covlab::GuardExceeded& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const covlab::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
