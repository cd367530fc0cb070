#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <numbers>
#include <sstream>

#include "kam/diophantine.hpp"
#include "kam/dynamics.hpp"
#include "kam/kam.hpp"
#include "kam/mechanics.hpp"
#include "kam/models.hpp"
#include "kam/series_io.hpp"
#include "kam/util.hpp"

namespace kamtool {

namespace fs = std::filesystem;

constexpr const char* kToolVersion = "kamtool 1.0.0";

std::string num(double v) { return kam::fmt_double(v); }

namespace {

std::string inum(long long v) { return std::to_string(v); }

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

// Cells that parse fully as numbers are emitted as JSON numbers, the rest as strings.
json cell_json(const std::string& s) {
  if (s.empty()) return s;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end && *end == '\0' && std::isfinite(v)) return json::parse(s, nullptr, false).is_discarded() ? json(v) : json::parse(s);
  return s;
}

template <class T>
T get_or(const json& j, const char* key, T def) {
  if (!j.is_object() || !j.contains(key) || j[key].is_null()) return def;
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

template <class T>
T require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("config is missing '") + key + "'");
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j[key].is_object()) throw ConfigError(std::string("config section '") + key + "' must be an object");
  return j[key];
}

fs::path resolve(const RunContext& ctx, const std::string& p) {
  fs::path q(p);
  if (q.is_relative()) q = ctx.config_dir / q;
  if (!fs::exists(q)) throw ConfigError("referenced file does not exist: " + q.string());
  return q;
}

void write_text(const RunContext& ctx, const std::string& name, const std::string& body) {
  fs::create_directories(ctx.out_dir);
  std::ofstream os(ctx.out_dir / name, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + (ctx.out_dir / name).string());
  os << provenance_header(ctx) << body;
}

kam::MassVector masses_from(const json& j, int n) {
  if (j.contains("masses")) {
    auto w = get_or<std::vector<double>>(j, "masses", {});
    if (static_cast<int>(w.size()) != n) throw ConfigError("explicit masses must have one entry per site");
    return kam::MassVector::explicit_list(w, get_or(j, "kappa", 1.0));
  }
  return kam::MassVector::exponential(get_or(j, "kappa", 1.0), n);
}

kam::Potential potential_from(const json& j) {
  const auto name = get_or<std::string>(j, "name", "duffing");
  if (name == "duffing") return kam::Potential::duffing(get_or(j, "alpha", 1.0), get_or(j, "beta", -1.0));
  if (name == "harmonic") return kam::Potential::harmonic(get_or(j, "omega", 1.0));
  if (name == "polynomial") return kam::Potential::polynomial(require<std::vector<double>>(j, "coeffs"));
  throw ConfigError("unknown potential '" + name + "'");
}

kam::HamiltonianModel mechanical_from(const json& j) {
  kam::HamiltonianModel m;
  m.dim = get_or(j, "dim", 1);
  m.sites = get_or(j, "sites", 2);
  m.kappa = get_or(j, "kappa", 1.0);
  m.epsilon = get_or(j, "epsilon", 0.0);
  m.potential = potential_from(section(j, "potential"));
  const json& c = section(j, "coupling");
  m.coupling.name = get_or<std::string>(c, "name", "none");
  m.coupling.coeffs = get_or<std::vector<double>>(c, "coeffs", {});
  if (m.coupling.name != "none" && m.coupling.name != "cos_difference" && m.coupling.name != "polynomial_difference")
    throw ConfigError("unknown coupling '" + m.coupling.name + "'");
  m.site_energies = get_or<std::vector<double>>(j, "site_energies", {});
  if (static_cast<int>(m.site_energies.size()) != m.sites) throw ConfigError("site_energies needs one entry per site");
  m.well_center = get_or(j, "well_center", 0.0);
  return m;
}

kam::NormParams norm_from(const json& j) {
  kam::NormParams p{get_or(j, "beta", 0.5), get_or(j, "rho", 1.0), get_or(j, "sigma", 1.0)};
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return p;
}

// Model resolved to (H0, xi, masses).
struct ResolvedModel {
  kam::TFSeries H0;
  std::vector<double> xi;
  kam::MassVector m;
  double eps = 0.0;
  bool closed_form = false;
  kam::LongRangeModel long_range;
};

ResolvedModel resolve_model(const RunContext& ctx) {
  const json& j = section(ctx.config, "model");
  const auto type = get_or<std::string>(j, "type", "long_range");
  ResolvedModel r;
  if (type == "long_range") {
    r.xi = require<std::vector<double>>(j, "xi");
    if (r.xi.empty()) throw ConfigError("model.xi must be nonempty");
    r.m = masses_from(j, static_cast<int>(r.xi.size()));
    r.eps = get_or(j, "eps", 0.0);
    r.long_range = {r.xi, r.m, r.eps, get_or(j, "quadratic", 1.0)};
    r.H0 = r.long_range.hamiltonian();
    r.closed_form = true;
  } else if (type == "series") {
    const fs::path p = resolve(ctx, require<std::string>(j, "path"));
    std::ifstream is(p);
    kam::SeriesHeader hd;
    try {
      r.H0 = kam::read_series(is, &hd);
    } catch (const std::exception& e) {
      throw ConfigError("cannot read series file " + p.string() + ": " + e.what());
    }
    r.m = kam::masses_from_header(hd);
    r.xi = require<std::vector<double>>(j, "xi");
    if (static_cast<int>(r.xi.size()) != hd.n_max) throw ConfigError("model.xi must have N_max entries");
    r.eps = get_or(j, "eps", 0.0);
  } else if (type == "mechanical") {
    kam::HamiltonianModel hm = mechanical_from(j);
    auto nf = kam::to_normal_form(hm, norm_from(section(j, "norm")));
    r.H0 = nf.H;
    r.xi = nf.xi0;
    r.m = hm.masses();
    r.eps = hm.epsilon;
  } else {
    throw ConfigError("unknown model type '" + type + "'");
  }
  return r;
}

void apply_overrides(RunContext& ctx, kam::KamSchedule& s, const json& ov) {
  if (ov.is_null()) return;
  if (!ov.is_object()) throw ConfigError("schedule.overrides must be an object");
  for (auto it = ov.begin(); it != ov.end(); ++it) {
    std::vector<double>* arr = nullptr;
    const std::string& k = it.key();
    if (k == "eps") arr = &s.eps;
    else if (k == "beta") arr = &s.beta;
    else if (k == "rho") arr = &s.rho;
    else if (k == "sigma") arr = &s.sigma;
    else if (k == "mu") arr = &s.mu;
    else if (k == "s") arr = &s.s;
    else if (k == "L") arr = &s.L;
    else throw ConfigError("unknown schedule override '" + k + "'");
    if (!it.value().is_object()) throw ConfigError("override '" + k + "' must map stage to value");
    for (auto e = it.value().begin(); e != it.value().end(); ++e) {
      std::size_t n = 0;
      try {
        n = std::stoul(e.key());
      } catch (...) {
        throw ConfigError("override stage '" + e.key() + "' is not an integer");
      }
      if (n >= arr->size()) throw ConfigError("override stage out of range for '" + k + "'");
      (*arr)[n] = e.value().get<double>();
      ctx.overrides.push_back(k + "[" + e.key() + "]=" + num((*arr)[n]));
    }
  }
}

kam::KamSchedule schedule_from(RunContext& ctx, double eps_default, int* stages_out = nullptr) {
  const json& j = section(ctx.config, "schedule");
  const double eps0 = get_or(j, "eps0", eps_default);
  const int stages = get_or(j, "stages", 4);
  if (stages < 1) throw ConfigError("schedule.stages must be positive");
  kam::KamSchedule s;
  try {
    s = kam::build_schedule(eps0, get_or(j, "beta0", 0.5), get_or(j, "rho", 1.0), get_or(j, "sigma", 1.0), stages,
                            get_or(j, "box_width", -1.0));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
  if (j.contains("overrides")) apply_overrides(ctx, s, j["overrides"]);
  if (stages_out) *stages_out = stages;
  return s;
}

kam::StepOptions step_options_from(const json& cfg) {
  kam::StepOptions o;
  const json& c = section(cfg, "caps");
  o.caps.max_alpha = get_or(c, "max_alpha", o.caps.max_alpha);
  o.caps.max_l = get_or(c, "max_l", o.caps.max_l);
  o.caps.max_support = get_or(c, "max_support", o.caps.max_support);
  o.max_lie_order = get_or(c, "lie_order", o.max_lie_order);
  o.lie_tol_factor = get_or(c, "lie_tol_factor", o.lie_tol_factor);
  o.strict_caps = get_or(c, "strict", o.strict_caps);
  return o;
}

double fitted_law(const std::vector<kam::StageRecord>& recs, double* r2) {
  std::vector<double> x, y;
  for (const auto& r : recs)
    if (r.norm_P > 0 && r.norm_P_next > 0) {
      x.push_back(std::log(r.norm_P));
      y.push_back(std::log(r.norm_P_next));
    }
  if (x.size() < 2) return std::nan("");
  auto f = kam::fit_line(x, y);
  if (r2) *r2 = f.r2;
  return f.slope;
}

std::string vec_str(const std::vector<int>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s + "]";
}

}  // namespace

void Table::add(std::vector<std::string> row) {
  if (row.size() != cols_.size()) throw std::logic_error("table row width mismatch");
  rows_.push_back(std::move(row));
}

void Table::write(const RunContext& ctx, const std::string& stem) const {
  std::ostringstream os;
  if (ctx.format == "jsonl") {
    for (const auto& r : rows_) {
      json o = json::object();
      for (std::size_t c = 0; c < cols_.size(); ++c) o[cols_[c]] = cell_json(r[c]);
      os << o.dump() << '\n';
    }
    write_text(ctx, stem + ".jsonl", os.str());
    return;
  }
  for (std::size_t c = 0; c < cols_.size(); ++c) os << (c ? "," : "") << csv_cell(cols_[c]);
  os << '\n';
  for (const auto& r : rows_) {
    for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << csv_cell(r[c]);
    os << '\n';
  }
  write_text(ctx, stem + ".csv", os.str());
}

std::string provenance_header(const RunContext& ctx) {
  std::ostringstream os;
  os << "# tool: " << kToolVersion << '\n';
  os << "# command: " << ctx.command << '\n';
  os << "# config_hash: " << ctx.config_hash << '\n';
  os << "# seed: " << ctx.seed << '\n';
  os << "# workers: " << ctx.workers << '\n';
  os << "# overrides: ";
  if (ctx.overrides.empty()) os << "none";
  for (std::size_t i = 0; i < ctx.overrides.size(); ++i) os << (i ? ";" : "") << ctx.overrides[i];
  os << '\n';
  const std::time_t now = std::time(nullptr);
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  os << "# timestamp: " << buf << '\n';
  return os.str();
}

int cmd_iterate(RunContext& ctx) {
  ResolvedModel mod = resolve_model(ctx);
  int stages = 0;
  kam::KamSchedule sched = schedule_from(ctx, mod.eps > 0 ? mod.eps : 1e-6, &stages);
  kam::StepOptions opt = step_options_from(ctx.config);
  kam::IterationResult res = kam::run_iteration(mod.H0, mod.xi, sched, mod.m, opt, stages);

  Table t({"n", "eps_n", "norm_P", "norm_G", "shift_inf_norm", "min_divisor", "L_n", "An_size", "wall_time_ms",
           "norm_Q", "norm_R_half", "norm_P_next", "terms_P", "terms_G"});
  for (const auto& r : res.records)
    t.add({inum(r.n), num(r.eps_n), num(r.norm_P), num(r.norm_G), num(r.shift_inf_norm), num(r.min_divisor),
           num(r.L_n), inum(static_cast<long long>(r.An_size)), ctx.timing ? num(r.wall_time_ms) : "NA",
           num(r.norm_Q), num(r.norm_R_half), num(r.norm_P_next), inum(static_cast<long long>(r.terms_P)),
           inum(static_cast<long long>(r.terms_G))});
  t.write(ctx, "iterate_stages");

  Table st({"site", "xi0", "xi"});
  for (std::size_t j = 0; j < res.state.xi.size(); ++j)
    st.add({inum(static_cast<long long>(j + 1)), num(res.state.xi0[j]), num(res.state.xi[j])});
  st.write(ctx, "iterate_state");

  kam::SeriesHeader hd;
  hd.n_max = mod.m.size();
  hd.mass_generator = mod.m.generator();
  hd.kappa = mod.m.kappa();
  if (hd.mass_generator != "exp") hd.masses = mod.m.weights();
  hd.norm = sched.params(std::min<int>(res.state.n, static_cast<int>(sched.beta.size()) - 1));
  std::ostringstream ser;
  // Full Hamiltonian at the current frequencies, so the file can be resumed as a series model.
  kam::write_series(ser, kam::normal_form(res.state.xi, mod.m) + res.state.P, hd);
  write_text(ctx, "iterate_checkpoint.series.jsonl", ser.str());

  bool trivial = true;
  for (const auto& r : res.records)
    if (r.norm_P > 0) trivial = false;
  double r2 = std::nan("");
  const double expo = fitted_law(res.records, &r2);
  std::string verdict = "trivial";
  if (!trivial) {
    bool within = true;
    for (const auto& r : res.records)
      if (r.norm_P_next > 10.0 * sched.eps.at(r.n + 1)) within = false;
    verdict = within ? "converging" : "not_converging";
  }
  Table sm({"stages", "verdict", "fitted_exponent", "fit_r2", "final_norm", "gate_ok"});
  sm.add({inum(stages), verdict, std::isnan(expo) ? "NA" : num(expo), std::isnan(r2) ? "NA" : num(r2),
          num(res.state.tracked_norm), sched.gate_ok ? "true" : "false"});
  sm.write(ctx, "iterate_summary");
  return 0;
}

int cmd_measure_scan(RunContext& ctx) {
  const json& c = section(ctx.config, "cube");
  kam::HilbertCube cube;
  cube.center.values = require<std::vector<double>>(c, "center");
  cube.center.a = get_or(c, "a", 0.0);
  cube.center.b = get_or(c, "b", 10.0);
  try {
    cube.center.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("cube: ") + e.what());
  }
  cube.ell = get_or(c, "ell", 0.5);
  cube.width_exponent = get_or(c, "width_exponent", 0.0);
  std::vector<double> ds;
  if (c.contains("d") && c["d"].is_array()) ds = c["d"].get<std::vector<double>>();
  else ds = {get_or(c, "d", 0.5)};
  for (double d : ds)
    if (!(d > 0 && d < 1)) throw ConfigError("cube.d must lie in (0,1)");
  const json& sj = section(ctx.config, "schedule");
  std::vector<double> grid = get_or<std::vector<double>>(ctx.config, "eps_grid", {});
  if (grid.empty()) grid = {get_or(sj, "eps0", 1e-6)};
  const int stages = get_or(sj, "stages", 1);
  const long long count = get_or<long long>(ctx.config, "count", 1000);
  if (count < 0) throw ConfigError("count must be nonnegative");
  const kam::MassVector m = masses_from(section(ctx.config, "masses"), static_cast<int>(cube.center.values.size()));

  Table t({"eps", "d", "stage", "n_samples", "survivors", "fraction", "ci_low", "ci_high", "pairs"});
  Table viol({"eps", "d", "stage", "A", "l", "divisor"});
  Table sm({"d", "fitted_exponent", "fit_r2", "points"});
  for (double d : ds) {
    cube.d = d;
    std::vector<double> lx, ly;
    for (double eps : grid) {
      kam::KamSchedule sched;
      try {
        sched = kam::build_schedule(eps, get_or(sj, "beta0", 0.5), get_or(sj, "rho", 1.0), get_or(sj, "sigma", 1.0),
                                    stages + 1);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("schedule: ") + e.what());
      }
      if (count == 0) continue;
      auto scan = kam::measure_scan(cube, sched, m, stages, static_cast<std::size_t>(count), ctx.seed, ctx.workers,
                                    get_or<std::size_t>(ctx.config, "max_violations", 100));
      for (std::size_t k = 0; k < scan.rows.size(); ++k) {
        const auto& r = scan.rows[k];
        t.add({num(eps), num(d), inum(r.stage), inum(static_cast<long long>(r.n_samples)),
               inum(static_cast<long long>(r.survivors)), num(r.fraction), num(r.ci_low), num(r.ci_high),
               inum(static_cast<long long>(scan.pair_counts[k]))});
      }
      for (const auto& v : scan.violations)
        viol.add({num(eps), num(d), inum(v.stage), vec_str(v.A), vec_str(v.l), num(v.divisor)});
      const double deficit = 1.0 - scan.rows.back().fraction;
      if (deficit > 0) {
        lx.push_back(std::log(eps));
        ly.push_back(std::log(deficit));
      }
    }
    if (count == 0) continue;
    if (lx.size() >= 2) {
      auto f = kam::fit_line(lx, ly);
      sm.add({num(d), num(f.slope), num(f.r2), inum(static_cast<long long>(lx.size()))});
    } else {
      sm.add({num(d), "NA", "NA", inum(static_cast<long long>(lx.size()))});
    }
  }
  t.write(ctx, "measure_scan");
  viol.write(ctx, "measure_violations");
  sm.write(ctx, "measure_summary");
  return 0;
}

int cmd_verify(RunContext& ctx) {
  ResolvedModel mod = resolve_model(ctx);
  if (!mod.closed_form) throw ConfigError("verify needs a long_range model");
  int stages = 0;
  kam::KamSchedule sched = schedule_from(ctx, mod.eps > 0 ? mod.eps : 1e-6, &stages);
  kam::StepOptions opt = step_options_from(ctx.config);
  kam::IterationResult res;
  if (mod.eps == 0.0) {
    res.state = kam::initial_state(mod.H0 - kam::normal_form(mod.xi, mod.m), mod.xi, sched, mod.m);
  } else {
    res = kam::run_iteration(mod.H0, mod.xi, sched, mod.m, opt, stages);
  }
  const json& fj = section(ctx.config, "flow");
  kam::FlowSpec spec;
  spec.h = get_or(fj, "h", 0.05);
  spec.T = get_or(fj, "T", 100.0);
  spec.integrator = get_or<std::string>(fj, "integrator", "implicit-midpoint");
  spec.tol = get_or(fj, "tol", spec.tol);
  if (!(spec.h > 0) || !(spec.T >= 0) || !(spec.tol > 0)) throw ConfigError("flow needs h > 0, T >= 0, tol > 0");
  if (spec.integrator != "implicit-midpoint" && spec.integrator != "yoshida4-midpoint")
    throw ConfigError("unknown integrator '" + spec.integrator + "'");
  const int samples = get_or(fj, "samples", 4);
  const int checkpoints = get_or(fj, "checkpoints", 20);
  const int N = static_cast<int>(mod.xi.size());
  std::vector<std::vector<double>> phi0;
  for (int k = 0; k < samples; ++k) {
    std::vector<double> p(N);
    for (int j = 0; j < N; ++j) p[j] = 2.0 * std::numbers::pi * kam::uniform01(ctx.seed, k, j);
    phi0.push_back(p);
  }
  auto emb = kam::assemble_torus_embedding(res.state, mod.m, opt.caps, get_or(fj, "embedding_order", 8));
  kam::LongRangeSystem sys(mod.long_range);
  auto rep = kam::verify_torus(sys, emb, spec, phi0, checkpoints);

  Table t({"t", "deviation", "action_defect", "phase_deviation"});
  Table plot({"x", "y", "series"});
  for (std::size_t c = 0; c < rep.times.size(); ++c) {
    t.add({num(rep.times[c]), num(rep.deviation[c]), num(rep.action_defect[c]), num(rep.phase_deviation[c])});
    plot.add({num(rep.times[c]), num(rep.deviation[c]), "deviation"});
    plot.add({num(rep.times[c]), num(rep.action_defect[c]), "action_defect"});
  }
  t.write(ctx, "verify_drift");
  plot.write(ctx, "verify_plot");
  Table sm({"stages", "sup_deviation", "sup_action_defect", "sup_phase_deviation", "energy_drift"});
  sm.add({inum(mod.eps == 0.0 ? 0 : stages), num(rep.sup_deviation), num(rep.sup_action_defect),
          num(rep.sup_phase_deviation), num(rep.energy_drift)});
  sm.write(ctx, "verify_summary");
  return 0;
}

int cmd_strip_scan(RunContext& ctx) {
  const json& j = section(ctx.config, "strip");
  kam::StripConfig c;
  c.N = get_or(j, "N", c.N);
  c.eps = get_or(j, "eps", c.eps);
  c.delta = get_or(j, "delta", c.delta);
  c.resonant_site = get_or(j, "resonant_site", c.resonant_site);
  c.detunings_sqrt_eps = get_or(j, "detunings_sqrt_eps", c.detunings_sqrt_eps);
  c.varrho = get_or(j, "varrho", c.varrho);
  c.ensemble = get_or(j, "ensemble", c.ensemble);
  c.action_radius = get_or(j, "action_radius", c.action_radius);
  c.T = get_or(j, "T", c.T);
  c.h = get_or(j, "h", c.h);
  c.seed = ctx.seed;
  c.workers = ctx.workers;
  if (c.N < 2 || c.ensemble < 1 || !(c.T > 0) || !(c.h > 0) || !(c.eps >= 0) || !(c.delta >= 0))
    throw ConfigError("strip config needs N >= 2, ensemble >= 1, T > 0, h > 0, eps >= 0, delta >= 0");
  std::vector<kam::StripRow> rows;
  try {
    rows = kam::resonant_strip_experiment(c);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  Table t({"site", "detuning", "detuning_sqrt_eps", "inside", "ftle", "ftle_baseline", "ftle_excess", "crossings",
           "indicator", "indicator_floor"});
  Table plot({"x", "y", "series"});
  for (const auto& r : rows) {
    t.add({inum(r.site), num(r.detuning), num(r.detuning_sqrt_eps), r.inside ? "1" : "0", num(r.ftle),
           num(r.ftle_baseline), num(r.ftle_excess), num(r.crossings), num(r.indicator), num(r.indicator_floor)});
    plot.add({num(r.detuning_sqrt_eps), num(r.indicator), r.inside ? "inside" : "outside"});
  }
  t.write(ctx, "strip_indicator");
  plot.write(ctx, "strip_plot");
  return 0;
}

int cmd_action_chart(RunContext& ctx) {
  const json& j = ctx.config;
  const kam::Potential V = potential_from(section(j, "potential"));
  const json& cj = section(j, "chart");
  const double lo = require<double>(cj, "h_lo"), hi = require<double>(cj, "h_hi");
  const int samples = get_or(cj, "samples", 21);
  const double center = get_or(cj, "center", 0.0);
  if (!(lo < hi) || samples < 2) throw ConfigError("chart needs h_lo < h_hi and samples >= 2");
  kam::QuadratureConfig q{get_or(cj, "nodes", 64), get_or(cj, "degree", 32)};
  kam::ActionAngleChart chart = kam::action_map(V, lo, hi, center, q);
  const double step = get_or(cj, "fd_step", 1e-3);
  Table t({"h", "L", "omega", "twist", "twist_fd", "halving_gap"});
  double min_twist = INFINITY;
  for (int k = 0; k < samples; ++k) {
    // Interior samples keep the finite-difference stencil inside the fitted range.
    const double h = lo + (hi - lo) * (k + 0.5) / samples;
    double gap = 0;
    const double tfd = chart.twist_fd(h, step, &gap);
    min_twist = std::min(min_twist, std::abs(tfd));
    t.add({num(h), num(chart.action(h)), num(chart.frequency(h)), num(chart.twist(h)), num(tfd), num(gap)});
  }
  t.write(ctx, "action_chart");
  Table sm({"fit_residual_action", "fit_residual_frequency", "min_abs_twist"});
  sm.add({num(chart.fit_residual_action()), num(chart.fit_residual_frequency()), num(min_twist)});
  sm.write(ctx, "action_chart_summary");
  if (j.contains("planar")) {
    const json& pj = section(j, "planar");
    auto hs = require<std::vector<double>>(pj, "h");
    auto gs = require<std::vector<double>>(pj, "G");
    kam::FrequencyChartConfig fc;
    fc.fd_step = get_or(pj, "fd_step", fc.fd_step);
    fc.singular_threshold = get_or(pj, "singular_threshold", fc.singular_threshold);
    fc.quad = q;
    const double pc = get_or(pj, "center", 1.0);
    Table pt({"h", "G", "L", "grad_L", "grad_G", "det", "richardson_gap", "singular"});
    for (double G : gs)
      for (double h : hs) {
        auto fp = kam::frequency_chart(V, h, G, pc, fc);
        pt.add({num(h), num(G), num(fp.L), num(fp.grad[0]), num(fp.grad[1]), num(fp.det), num(fp.richardson_gap),
                fp.singular ? "1" : "0"});
      }
    pt.write(ctx, "frequency_chart");
  }
  return 0;
}

int cmd_normal_form(RunContext& ctx) {
  const json& mj = section(ctx.config, "model");
  kam::HamiltonianModel hm = mechanical_from(mj);
  kam::NormalFormOptions o;
  const json& oj = section(ctx.config, "normal_form");
  o.grid = get_or(oj, "grid", o.grid);
  o.fourier_cap = get_or(oj, "fourier_cap", o.fourier_cap);
  o.action_step = get_or(oj, "action_step", o.action_step);
  o.tail_tolerance = get_or(oj, "tail_tolerance", o.tail_tolerance);
  o.drop = get_or(oj, "drop", o.drop);
  const kam::NormParams p = norm_from(section(mj, "norm"));
  kam::NormalFormResult nf;
  try {
    nf = kam::to_normal_form(hm, p, o);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const std::domain_error& e) {
    throw ConfigError(e.what());
  } catch (const std::runtime_error& e) {
    throw kam::EngineError("FFTAliasing", e.what());
  }
  kam::SeriesHeader hd;
  hd.n_max = hm.sites;
  hd.kappa = hm.kappa;
  hd.norm = p;
  std::ostringstream ser;
  kam::write_series(ser, nf.H, hd);
  write_text(ctx, "normal_form.series.jsonl", ser.str());
  Table st({"site", "action", "xi0", "twist"});
  for (int i = 0; i < hm.sites; ++i) st.add({inum(i + 1), num(nf.actions[i]), num(nf.xi0[i]), num(nf.twists[i])});
  st.write(ctx, "normal_form_sites");
  Table sm({"terms", "norm_P_tilde", "fft_tail", "constant"});
  sm.add({inum(static_cast<long long>(nf.H.size())), num(nf.norm_P_tilde), num(nf.fft_tail), num(nf.constant)});
  sm.write(ctx, "normal_form_summary");
  return 0;
}

int cmd_box_dim(RunContext& ctx) {
  const json& sj = section(ctx.config, "sequence");
  const auto type = get_or<std::string>(sj, "type", "power");
  std::vector<double> seq;
  if (type == "power") {
    const double g = require<double>(sj, "gamma");
    const long long n = get_or<long long>(sj, "n", 1000000);
    if (!(g > 0) || n < 1) throw ConfigError("power sequence needs gamma > 0 and n >= 1");
    seq.reserve(n);
    for (long long k = 1; k <= n; ++k) seq.push_back(std::pow(static_cast<double>(k), -g));
  } else if (type == "constant") {
    seq.assign(get_or<long long>(sj, "n", 1000), get_or(sj, "value", 1.0));
  } else if (type == "file") {
    std::ifstream is(resolve(ctx, require<std::string>(sj, "path")));
    std::string line;
    while (std::getline(is, line))
      if (!line.empty() && line[0] != '#') seq.push_back(std::stod(line));
  } else {
    throw ConfigError("unknown sequence type '" + type + "'");
  }
  std::vector<double> scales = get_or<std::vector<double>>(ctx.config, "scales", {});
  if (scales.empty()) scales = kam::auto_box_scales(seq, get_or(ctx.config, "scale_count", 12));
  kam::BoxDimension bd;
  try {
    bd = kam::box_dimension(seq, scales);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  Table t({"scale", "count"});
  for (std::size_t k = 0; k < bd.scales.size(); ++k) t.add({num(bd.scales[k]), num(bd.counts[k])});
  t.write(ctx, "box_counts");
  Table sm({"dimension", "fit_r2", "max_residual", "degenerate", "points"});
  sm.add({num(bd.dimension), num(bd.fit.r2), num(bd.fit.max_residual), bd.degenerate ? "true" : "false",
          inum(static_cast<long long>(seq.size()))});
  sm.write(ctx, "box_summary");
  return 0;
}

}  // namespace kamtool
