#include "xva/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "json.hpp"

namespace xva {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Minimal JSON emitter: insertion-order keys, every double at 17 significant
// digits, no whitespace. The library parser is happy to read it back; the
// point of rolling our own is byte-stable artifacts.
class JsonWriter {
 public:
  JsonWriter() { first_.push_back(true); }

  void begin_object() {
    pre();
    out_ += '{';
    first_.push_back(true);
  }
  void end_object() {
    out_ += '}';
    first_.pop_back();
  }
  void begin_array() {
    pre();
    out_ += '[';
    first_.push_back(true);
  }
  void end_array() {
    out_ += ']';
    first_.pop_back();
  }
  void key(const std::string& k) {
    sep();
    quote(k);
    out_ += ':';
    keyed_ = true;
  }
  void value(double v) {
    pre();
    out_ += fmt17(v);
  }
  void value(int v) {
    pre();
    out_ += std::to_string(v);
  }
  void value(std::int64_t v) {
    pre();
    out_ += std::to_string(v);
  }
  void value(std::uint64_t v) {
    pre();
    out_ += std::to_string(v);
  }
  void value(bool v) {
    pre();
    out_ += v ? "true" : "false";
  }
  void value(const std::string& v) {
    pre();
    quote(v);
  }
  void raw(const std::string& fragment) {
    pre();
    out_ += fragment;
  }
  const std::string& str() const { return out_; }

 private:
  void sep() {
    if (!first_.back()) out_ += ',';
    first_.back() = false;
  }
  void pre() {
    if (keyed_) {
      keyed_ = false;
      return;
    }
    sep();
  }
  void quote(const std::string& s) {
    out_ += '"';
    for (char c : s) {
      switch (c) {
        case '"': out_ += "\\\""; break;
        case '\\': out_ += "\\\\"; break;
        case '\n': out_ += "\\n"; break;
        case '\t': out_ += "\\t"; break;
        case '\r': out_ += "\\r"; break;
        default:
          if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", c);
            out_ += buf;
          } else {
            out_ += c;
          }
      }
    }
    out_ += '"';
  }

  std::string out_;
  std::vector<bool> first_;
  bool keyed_ = false;
};

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* a : allowed) {
      if (it.key() == a) {
        known = true;
        break;
      }
    }
    if (!known) fail(join(path, it.key()), "unknown key");
  }
}

const json& need(const json& obj, const std::string& path, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(join(path, key), "required");
  return *it;
}

const json& need_object(const json& obj, const std::string& path, const char* key) {
  const json& v = need(obj, path, key);
  if (!v.is_object()) fail(join(path, key), "expected an object");
  return v;
}

double as_num(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<int>();
}

std::uint64_t as_seed(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) {
    return static_cast<std::uint64_t>(v.get<long long>());
  }
  fail(path, "expected a nonnegative integer");
}

std::string as_str(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

std::vector<double> as_num_array(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(as_num(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

TimeCurve parse_curve(const json& v, const std::string& path) {
  if (v.is_number()) return TimeCurve(v.get<double>());
  if (!v.is_object()) fail(path, "expected a constant or {times, values}");
  check_keys(v, path, {"times", "values"});
  const auto times = as_num_array(need(v, path, "times"), path + ".times");
  const auto values = as_num_array(need(v, path, "values"), path + ".values");
  try {
    return TimeCurve(times, values);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    const std::string prefix = "curve: ";
    if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
    fail(path, msg);
  }
}

// Module validators speak struct language ("risk.lambda_b"); the loader
// answers in schema language ("credit.lambda_b").
std::string schema_path(std::string msg) {
  if (msg.rfind("risk.r:", 0) == 0) return "market.r:" + msg.substr(7);
  if (msg.rfind("risk.", 0) == 0) return "credit." + msg.substr(5);
  return msg;
}

std::string backend_name(BackendKind b) {
  switch (b) {
    case BackendKind::kernel: return "kernel";
    case BackendKind::fd: return "fd";
    case BackendKind::mc: return "mc";
  }
  return "kernel";
}

std::string direction_name(IterationConfig::Direction d) {
  switch (d) {
    case IterationConfig::Direction::decreasing: return "decreasing";
    case IterationConfig::Direction::increasing: return "increasing";
    case IterationConfig::Direction::both: return "both";
  }
  return "both";
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open " + p.string() + " for writing");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  f.flush();
  if (!f) throw IoError("write failed: " + p.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  if (!std::filesystem::is_directory(dir)) {
    throw IoError(dir.string() + " is not a directory");
  }
}

void emit_curve(JsonWriter& w, const TimeCurve& c) {
  w.begin_object();
  w.key("times");
  w.begin_array();
  for (double t : c.knot_times()) w.value(t);
  w.end_array();
  w.key("values");
  w.begin_array();
  for (double v : c.knot_values()) w.value(v);
  w.end_array();
  w.end_object();
}

void emit_chain(JsonWriter& w, const ChainRecord& rec) {
  w.begin_object();
  w.key("iterations");
  w.value(rec.iterations);
  w.key("converged");
  w.value(rec.converged);
  w.key("gaps");
  w.begin_array();
  for (double g : rec.gaps) w.value(g);
  w.end_array();
  w.key("ratios");
  w.begin_array();
  for (double r : rec.ratios) w.value(r);
  w.end_array();
  w.key("sandwich_violations");
  w.begin_array();
  for (int v : rec.sandwich_violations) w.value(v);
  w.end_array();
  w.end_object();
}

void append_chain_rows(std::string& csv, const ChainRecord& rec, const char* label) {
  for (std::size_t m = 0; m < rec.gaps.size(); ++m) {
    csv += std::to_string(m + 1);
    csv += ',';
    csv += label;
    csv += ',';
    csv += fmt17(rec.gaps[m]);
    csv += ',';
    if (m > 0) csv += fmt17(rec.ratios[m - 1]);
    csv += ',';
    csv += rec.sandwich_violations[m] == 0 ? '1' : '0';
    csv += '\n';
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  check_keys(j, "", {"market", "credit", "payoff", "grid", "time", "solver", "iteration"});

  RunConfig cfg;

  const json& market = need_object(j, "", "market");
  check_keys(market, "market", {"r", "sigma", "q", "gamma"});
  cfg.risk.r = as_num(need(market, "market", "r"), "market.r");
  cfg.sigma = parse_curve(need(market, "market", "sigma"), "market.sigma");
  if (market.contains("q")) cfg.q = parse_curve(market["q"], "market.q");
  if (market.contains("gamma")) cfg.gamma = parse_curve(market["gamma"], "market.gamma");

  if (j.contains("credit")) {
    const json& credit = j["credit"];
    if (!credit.is_object()) fail("credit", "expected an object");
    check_keys(credit, "credit",
               {"lambda_b", "lambda_c", "recovery_b", "recovery_c", "s_f"});
    if (credit.contains("lambda_b"))
      cfg.risk.lambda_b = as_num(credit["lambda_b"], "credit.lambda_b");
    if (credit.contains("lambda_c"))
      cfg.risk.lambda_c = as_num(credit["lambda_c"], "credit.lambda_c");
    if (credit.contains("recovery_b"))
      cfg.risk.recovery_b = as_num(credit["recovery_b"], "credit.recovery_b");
    if (credit.contains("recovery_c"))
      cfg.risk.recovery_c = as_num(credit["recovery_c"], "credit.recovery_c");
    if (credit.contains("s_f")) cfg.risk.s_f = as_num(credit["s_f"], "credit.s_f");
  }

  const json& pay = need_object(j, "", "payoff");
  check_keys(pay, "payoff", {"kind", "strike", "table"});
  const std::string kind = as_str(need(pay, "payoff", "kind"), "payoff.kind");
  if (kind == "call") {
    cfg.payoff.kind = Payoff::Kind::call;
  } else if (kind == "put") {
    cfg.payoff.kind = Payoff::Kind::put;
  } else if (kind == "table") {
    cfg.payoff.kind = Payoff::Kind::table;
  } else {
    fail("payoff.kind", "expected one of call, put, table");
  }
  cfg.payoff.strike = as_num(need(pay, "payoff", "strike"), "payoff.strike");
  if (pay.contains("table")) {
    const json& table = pay["table"];
    if (!table.is_object()) fail("payoff.table", "expected an object");
    check_keys(table, "payoff.table", {"s", "v"});
    cfg.payoff.table_s = as_num_array(need(table, "payoff.table", "s"), "payoff.table.s");
    cfg.payoff.table_v = as_num_array(need(table, "payoff.table", "v"), "payoff.table.v");
  } else if (cfg.payoff.kind == Payoff::Kind::table) {
    fail("payoff.table", "required for tabulated payoffs");
  }

  const json& grid = need_object(j, "", "grid");
  check_keys(grid, "grid", {"x_min", "x_max", "n", "mu"});
  cfg.x_min = as_num(need(grid, "grid", "x_min"), "grid.x_min");
  cfg.x_max = as_num(need(grid, "grid", "x_max"), "grid.x_max");
  cfg.n = as_int(need(grid, "grid", "n"), "grid.n");
  cfg.mu = as_num(need(grid, "grid", "mu"), "grid.mu");

  const json& time = need_object(j, "", "time");
  check_keys(time, "time", {"horizon", "steps"});
  cfg.horizon = as_num(need(time, "time", "horizon"), "time.horizon");
  cfg.solver.t_steps = as_int(need(time, "time", "steps"), "time.steps");

  if (j.contains("solver")) {
    const json& solver = j["solver"];
    if (!solver.is_object()) fail("solver", "expected an object");
    check_keys(solver, "solver", {"backend", "theta", "mc_samples", "seed"});
    if (solver.contains("backend")) {
      const std::string b = as_str(solver["backend"], "solver.backend");
      if (b == "kernel") {
        cfg.solver.backend = BackendKind::kernel;
      } else if (b == "fd") {
        cfg.solver.backend = BackendKind::fd;
      } else if (b == "mc") {
        cfg.solver.backend = BackendKind::mc;
      } else {
        fail("solver.backend", "expected one of kernel, fd, mc");
      }
    }
    if (solver.contains("theta")) cfg.solver.theta = as_num(solver["theta"], "solver.theta");
    if (solver.contains("mc_samples")) {
      cfg.solver.mc.samples = as_int(solver["mc_samples"], "solver.mc_samples");
    }
    if (solver.contains("seed")) cfg.solver.mc.seed = as_seed(solver["seed"], "solver.seed");
  }

  if (j.contains("iteration")) {
    const json& it = j["iteration"];
    if (!it.is_object()) fail("iteration", "expected an object");
    check_keys(it, "iteration", {"tol", "max_iter", "direction", "omega"});
    if (it.contains("tol")) cfg.solver.tol = as_num(it["tol"], "iteration.tol");
    if (it.contains("max_iter")) cfg.solver.max_iter = as_int(it["max_iter"], "iteration.max_iter");
    if (it.contains("direction")) {
      const std::string d = as_str(it["direction"], "iteration.direction");
      if (d == "decreasing") {
        cfg.solver.direction = IterationConfig::Direction::decreasing;
      } else if (d == "increasing") {
        cfg.solver.direction = IterationConfig::Direction::increasing;
      } else if (d == "both") {
        cfg.solver.direction = IterationConfig::Direction::both;
      } else {
        fail("iteration.direction", "expected one of decreasing, increasing, both");
      }
    }
    if (it.contains("omega")) cfg.solver.omega = as_num(it["omega"], "iteration.omega");
  }

  // Re-run every component invariant so a bad config never reaches a solver.
  try {
    cfg.risk.validate();
  } catch (const std::exception& e) {
    throw ConfigError(schema_path(e.what()));
  }
  try {
    cfg.payoff.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  try {
    (void)make_grid(cfg.x_min, cfg.x_max, cfg.n, cfg.mu);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (!(cfg.horizon > 0.0)) fail("time.horizon", "must be > 0");
  if (cfg.solver.t_steps < 1) fail("time.steps", "must be >= 1");
  if (!(cfg.sigma.min_value(0.0, cfg.horizon) > 0.0)) {
    fail("market.sigma", "must stay positive up to the horizon");
  }
  if (!(cfg.solver.theta >= 0.0 && cfg.solver.theta <= 1.0)) {
    fail("solver.theta", "must lie in [0, 1]");
  }
  if (cfg.solver.mc.samples < 1) fail("solver.mc_samples", "must be >= 1");
  if (!(cfg.solver.tol > 0.0)) fail("iteration.tol", "must be > 0");
  if (cfg.solver.max_iter < 1) fail("iteration.max_iter", "must be >= 1");
  if (cfg.solver.omega && !(*cfg.solver.omega > 0.0)) fail("iteration.omega", "must be > 0");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("config: cannot read " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_run_config(buf.str());
}

std::string echo_config(const RunConfig& cfg) {
  JsonWriter w;
  w.begin_object();
  w.key("market");
  w.begin_object();
  w.key("r");
  w.value(cfg.risk.r);
  w.key("sigma");
  emit_curve(w, cfg.sigma);
  w.key("q");
  emit_curve(w, cfg.q);
  w.key("gamma");
  emit_curve(w, cfg.gamma);
  w.end_object();
  w.key("credit");
  w.begin_object();
  w.key("lambda_b");
  w.value(cfg.risk.lambda_b);
  w.key("lambda_c");
  w.value(cfg.risk.lambda_c);
  w.key("recovery_b");
  w.value(cfg.risk.recovery_b);
  w.key("recovery_c");
  w.value(cfg.risk.recovery_c);
  w.key("s_f");
  w.value(cfg.risk.s_f);
  w.end_object();
  w.key("payoff");
  w.begin_object();
  w.key("kind");
  w.value(std::string(cfg.payoff.kind == Payoff::Kind::call
                          ? "call"
                          : cfg.payoff.kind == Payoff::Kind::put ? "put" : "table"));
  w.key("strike");
  w.value(cfg.payoff.strike);
  if (cfg.payoff.kind == Payoff::Kind::table) {
    w.key("table");
    w.begin_object();
    w.key("s");
    w.begin_array();
    for (double s : cfg.payoff.table_s) w.value(s);
    w.end_array();
    w.key("v");
    w.begin_array();
    for (double v : cfg.payoff.table_v) w.value(v);
    w.end_array();
    w.end_object();
  }
  w.end_object();
  w.key("grid");
  w.begin_object();
  w.key("x_min");
  w.value(cfg.x_min);
  w.key("x_max");
  w.value(cfg.x_max);
  w.key("n");
  w.value(cfg.n);
  w.key("mu");
  w.value(cfg.mu);
  w.end_object();
  w.key("time");
  w.begin_object();
  w.key("horizon");
  w.value(cfg.horizon);
  w.key("steps");
  w.value(cfg.solver.t_steps);
  w.end_object();
  w.key("solver");
  w.begin_object();
  w.key("backend");
  w.value(backend_name(cfg.solver.backend));
  w.key("theta");
  w.value(cfg.solver.theta);
  w.key("mc_samples");
  w.value(cfg.solver.mc.samples);
  w.key("seed");
  w.value(static_cast<std::uint64_t>(cfg.solver.mc.seed));
  w.end_object();
  w.key("iteration");
  w.begin_object();
  w.key("tol");
  w.value(cfg.solver.tol);
  w.key("max_iter");
  w.value(cfg.solver.max_iter);
  w.key("direction");
  w.value(direction_name(cfg.solver.direction));
  if (cfg.solver.omega) {
    w.key("omega");
    w.value(*cfg.solver.omega);
  }
  w.end_object();
  w.end_object();
  return w.str();
}

PriceArtifacts run_price(const RunConfig& cfg, const std::vector<ProbeSpec>& probes) {
  const SpatialGrid g = make_grid(cfg.x_min, cfg.x_max, cfg.n, cfg.mu);
  const CoefficientIntegrals ci(cfg.sigma, cfg.q, cfg.gamma);
  const ReactionSpec spec = build_reaction(cfg.risk);

  PriceArtifacts art;
  art.report = run_monotone(spec, ci, g, cfg.payoff, cfg.horizon, cfg.solver);
  art.surface = back_transform(art.report.price_levels, cfg.payoff, cfg.horizon);
  art.headline = surface_price(art.surface, cfg.payoff.strike, 0.0);
  art.probe_values.reserve(probes.size());
  for (const ProbeSpec& p : probes) {
    art.probe_values.push_back(surface_price(art.surface, p.spot, p.t));
  }
  return art;
}

void write_price_artifacts(const PriceArtifacts& art, const RunConfig& cfg,
                           const std::vector<ProbeSpec>& probes,
                           const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);

  const PriceSurface& s = art.surface;
  std::string surface_csv;
  surface_csv.reserve(s.values.size() * s.x.size() * 64 + 64);
  surface_csv += "x,S,tau,t,v\n";
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      surface_csv += fmt17(s.x[i]);
      surface_csv += ',';
      surface_csv += fmt17(s.spot[i]);
      surface_csv += ',';
      surface_csv += fmt17(s.tau[k]);
      surface_csv += ',';
      surface_csv += fmt17(s.horizon - s.tau[k]);
      surface_csv += ',';
      surface_csv += fmt17(s.values[k][i]);
      surface_csv += '\n';
    }
  }
  write_file(out_dir / "surface.csv", surface_csv);

  std::string iter_csv = "iter,direction,gap_weighted_sup,ratio,sandwich_ok\n";
  append_chain_rows(iter_csv, art.report.decreasing, "decreasing");
  append_chain_rows(iter_csv, art.report.increasing, "increasing");
  write_file(out_dir / "iterations.csv", iter_csv);

  JsonWriter w;
  w.begin_object();
  w.key("headline");
  w.begin_object();
  w.key("spot");
  w.value(cfg.payoff.strike);
  w.key("t");
  w.value(0.0);
  w.key("price");
  w.value(art.headline);
  w.end_object();
  w.key("converged");
  w.value(art.report.converged);
  w.key("max_ratio");
  w.value(art.report.max_ratio);
  w.key("two_sided_gap");
  w.value(art.report.two_sided_gap);
  w.key("omega");
  w.value(art.report.omega_used);
  w.key("slack");
  w.value(art.report.slack);
  w.key("envelope");
  w.begin_object();
  w.key("k_const");
  w.value(art.report.supersolution.k_const);
  w.key("lambda_rate");
  w.value(art.report.supersolution.lambda_rate);
  w.end_object();
  if (art.report.decreasing.iterations > 0) {
    w.key("decreasing");
    emit_chain(w, art.report.decreasing);
  }
  if (art.report.increasing.iterations > 0) {
    w.key("increasing");
    emit_chain(w, art.report.increasing);
  }
  w.key("probes");
  w.begin_array();
  for (std::size_t i = 0; i < probes.size(); ++i) {
    w.begin_object();
    w.key("spot");
    w.value(probes[i].spot);
    w.key("t");
    w.value(probes[i].t);
    w.key("price");
    w.value(art.probe_values[i]);
    w.end_object();
  }
  w.end_array();
  w.key("config");
  w.raw(echo_config(cfg));
  w.end_object();
  write_file(out_dir / "summary.json", w.str() + "\n");
}

CompareArtifacts run_compare(const RunConfig& cfg) {
  const SpatialGrid g = make_grid(cfg.x_min, cfg.x_max, cfg.n, cfg.mu);
  const CoefficientIntegrals ci(cfg.sigma, cfg.q, cfg.gamma);
  const ReactionSpec spec = build_reaction(cfg.risk);
  const Payoff unit = cfg.payoff.normalized();
  const double strike = cfg.payoff.strike;
  const bool trivial = !spec.custom && spec.g_neg == 0.0 && spec.g_pos == 0.0;

  CompareArtifacts art;
  art.x.resize(static_cast<std::size_t>(g.n));
  art.spot.resize(static_cast<std::size_t>(g.n));
  for (int i = 0; i < g.n; ++i) {
    art.x[static_cast<std::size_t>(i)] = g.node(i);
    art.spot[static_cast<std::size_t>(i)] = strike * std::exp(g.node(i));
  }

  std::vector<Field> mc_pooled;
  auto run_backend = [&](BackendKind b, CompareColumn& col) {
    col.name = backend_name(b);
    IterationConfig sc = cfg.solver;
    sc.backend = b;
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Field> levels;
    if (b == BackendKind::mc && trivial) {
      // no reaction, no iteration: one march is already the fixed point
      const Field v0 = sample_payoff(unit, g).field;
      const Continuation cont = make_continuation(unit, spec, ci);
      const std::vector<Field> any(static_cast<std::size_t>(sc.t_steps) + 1, v0);
      LinearSolveOutput out = iterate_once(any, spec, ci, cont, v0, sc, cfg.horizon);
      levels = std::move(out.levels);
      mc_pooled = std::move(out.pooled_se);
      col.converged = true;
      col.iterations = 1;
    } else {
      IterationReport rep = run_monotone(spec, ci, g, cfg.payoff, cfg.horizon, sc);
      col.converged = rep.converged;
      col.iterations = std::max(rep.decreasing.iterations, rep.increasing.iterations);
      levels = std::move(rep.price_levels);
      if (b == BackendKind::mc) {
        // one refresh sweep so the reported values carry their own errors
        const Field v0 = sample_payoff(unit, g).field;
        const Continuation cont = make_continuation(unit, spec, ci);
        LinearSolveOutput out = iterate_once(levels, spec, ci, cont, v0, sc, cfg.horizon);
        levels = std::move(out.levels);
        mc_pooled = std::move(out.pooled_se);
      }
    }
    const auto t1 = std::chrono::steady_clock::now();
    col.runtime_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    col.values = levels.back().values;
    for (double& v : col.values) v *= strike;
    const PriceSurface s = back_transform(levels, cfg.payoff, cfg.horizon);
    col.headline = surface_price(s, strike, 0.0);
  };

  run_backend(BackendKind::kernel, art.kernel);
  run_backend(BackendKind::fd, art.fd);
  run_backend(BackendKind::mc, art.mc);

  const auto pair_gap = [&](const CompareColumn& a, const CompareColumn& b) {
    PairGap pg;
    double sum = 0.0;
    int count = 0;
    for (int i = 1; i + 1 < g.n; ++i) {
      const double au = a.values[static_cast<std::size_t>(i)] / strike;
      const double bu = b.values[static_cast<std::size_t>(i)] / strike;
      const double rel = std::abs(au - bu) / std::max(1.0, std::abs(au));
      pg.max_rel = std::max(pg.max_rel, rel);
      sum += rel;
      ++count;
    }
    pg.mean_rel = count > 0 ? sum / count : 0.0;
    return pg;
  };
  art.kernel_fd = pair_gap(art.kernel, art.fd);
  art.kernel_mc = pair_gap(art.kernel, art.mc);
  art.fd_mc = pair_gap(art.fd, art.mc);

  if (!mc_pooled.empty()) {
    const int i_atm =
        std::clamp(static_cast<int>(std::llround(-g.x_min / g.h)), 0, g.n - 1);
    const double pooled_unit = mc_pooled.back().values[static_cast<std::size_t>(i_atm)];
    art.atm_pooled_se = strike * pooled_unit;
    const double gap_atm = art.mc.values[static_cast<std::size_t>(i_atm)] -
                           art.kernel.values[static_cast<std::size_t>(i_atm)];
    art.atm_z = pooled_unit > 0.0 ? gap_atm / (strike * pooled_unit) : 0.0;
    double max_pooled = 0.0;
    for (const Field& f : mc_pooled)
      for (double v : f.values) max_pooled = std::max(max_pooled, v);
    art.max_pooled_se = strike * max_pooled;
  }
  return art;
}

void write_compare_artifacts(const CompareArtifacts& art, const RunConfig& cfg,
                             const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);

  std::string csv;
  csv.reserve(art.x.size() * 96 + 32);
  csv += "x,S,kernel,fd,mc\n";
  for (std::size_t i = 0; i < art.x.size(); ++i) {
    csv += fmt17(art.x[i]);
    csv += ',';
    csv += fmt17(art.spot[i]);
    csv += ',';
    csv += fmt17(art.kernel.values[i]);
    csv += ',';
    csv += fmt17(art.fd.values[i]);
    csv += ',';
    csv += fmt17(art.mc.values[i]);
    csv += '\n';
  }
  write_file(out_dir / "compare.csv", csv);

  JsonWriter w;
  w.begin_object();
  w.key("headline");
  w.begin_object();
  for (const CompareColumn* c : {&art.kernel, &art.fd, &art.mc}) {
    w.key(c->name);
    w.value(c->headline);
  }
  w.end_object();
  w.key("converged");
  w.begin_object();
  for (const CompareColumn* c : {&art.kernel, &art.fd, &art.mc}) {
    w.key(c->name);
    w.value(c->converged);
  }
  w.end_object();
  w.key("iterations");
  w.begin_object();
  for (const CompareColumn* c : {&art.kernel, &art.fd, &art.mc}) {
    w.key(c->name);
    w.value(c->iterations);
  }
  w.end_object();
  w.key("gaps");
  w.begin_object();
  const std::pair<const char*, const PairGap*> pairs[] = {
      {"kernel_fd", &art.kernel_fd}, {"kernel_mc", &art.kernel_mc}, {"fd_mc", &art.fd_mc}};
  for (const auto& [name, pg] : pairs) {
    w.key(name);
    w.begin_object();
    w.key("max_rel");
    w.value(pg->max_rel);
    w.key("mean_rel");
    w.value(pg->mean_rel);
    w.end_object();
  }
  w.end_object();
  w.key("mc");
  w.begin_object();
  w.key("atm_pooled_se");
  w.value(art.atm_pooled_se);
  w.key("atm_z_vs_kernel");
  w.value(art.atm_z);
  w.key("max_pooled_se");
  w.value(art.max_pooled_se);
  w.end_object();
  w.key("runtimes_ms");
  w.begin_object();
  for (const CompareColumn* c : {&art.kernel, &art.fd, &art.mc}) {
    w.key(c->name);
    w.value(c->runtime_ms);
  }
  w.end_object();
  w.key("config");
  w.raw(echo_config(cfg));
  w.end_object();
  write_file(out_dir / "compare.json", w.str() + "\n");
}

}  // namespace xva
