#include "grushin/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace grushin {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += fmt(v[i]);
  }
  return s;
}

struct Parser {
  std::map<std::string, std::string> kv;
  std::set<std::string> consumed;
  std::vector<std::string> errors;

  bool has(const std::string& k) const { return kv.count(k) != 0; }

  std::optional<std::string> take(const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) return std::nullopt;
    consumed.insert(k);
    return it->second;
  }

  void fail(const std::string& msg) { errors.push_back(msg); }

  double number(const std::string& k, double fallback, bool required = false) {
    const auto v = take(k);
    if (!v) {
      if (required) fail("missing required key '" + k + "'");
      return fallback;
    }
    try {
      std::size_t pos = 0;
      const double d = std::stod(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("trailing characters");
      return d;
    } catch (const std::exception&) {
      fail("key '" + k + "': cannot parse '" + *v + "' as a number");
      return fallback;
    }
  }

  long integer(const std::string& k, long fallback, bool required = false) {
    const double d = number(k, double(fallback), required);
    if (d != std::floor(d)) fail("key '" + k + "' must be an integer");
    return long(d);
  }

  bool boolean(const std::string& k, bool fallback) {
    const auto v = take(k);
    if (!v) return fallback;
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0") return false;
    fail("key '" + k + "': expected true/false");
    return fallback;
  }

  std::string word(const std::string& k, const std::string& fallback,
                   const std::vector<std::string>& allowed = {}, bool required = false) {
    const auto v = take(k);
    if (!v) {
      if (required) fail("missing required key '" + k + "'");
      return fallback;
    }
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), *v) == allowed.end()) {
      std::string msg = "key '" + k + "': '" + *v + "' is not one of {";
      for (std::size_t i = 0; i < allowed.size(); ++i)
        msg += (i ? ", " : "") + allowed[i];
      fail(msg + "}");
      return fallback;
    }
    return *v;
  }

  std::vector<double> double_list(const std::string& k, std::vector<double> fallback,
                                  bool required = false) {
    const auto v = take(k);
    if (!v) {
      if (required) fail("missing required key '" + k + "'");
      return fallback;
    }
    std::vector<double> out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        out.push_back(std::stod(item));
      } catch (const std::exception&) {
        fail("key '" + k + "': cannot parse '" + item + "' as a number");
        return fallback;
      }
    }
    if (out.empty()) {
      fail("key '" + k + "': empty list");
      return fallback;
    }
    return out;
  }
};

} // namespace

std::string command_name(Command c) {
  switch (c) {
    case Command::best_constant: return "best-constant";
    case Command::eigenvalue: return "eigenvalue";
    case Command::brezis_nirenberg: return "brezis-nirenberg";
    case Command::decay: return "decay";
    case Command::expansion: return "expansion";
    case Command::concentration: return "concentration";
    case Command::inequality_check: return "inequality-check";
  }
  return "?";
}

std::optional<Command> command_from_name(const std::string& name) {
  for (Command c : {Command::best_constant, Command::eigenvalue, Command::brezis_nirenberg,
                    Command::decay, Command::expansion, Command::concentration,
                    Command::inequality_check})
    if (command_name(c) == name) return c;
  return std::nullopt;
}

GrushinParams ExperimentConfig::params() const {
  if (command == Command::eigenvalue) return GrushinParams::make_relaxed(m, n, gamma, p);
  return GrushinParams::make(m, n, gamma, p);
}

Grid ExperimentConfig::grid() const { return build_grid(box, cells, params()); }

std::map<std::string, std::string> ExperimentConfig::echo() const {
  std::map<std::string, std::string> e;
  e["command"] = command_name(command);
  if (command != Command::inequality_check) {
    e["m"] = std::to_string(m);
    e["n"] = std::to_string(n);
    e["gamma"] = fmt(gamma);
    e["p"] = fmt(p);
    std::string b;
    for (std::size_t i = 0; i < box.size(); ++i) {
      if (i) b += ',';
      b += fmt(box[i].first) + ":" + fmt(box[i].second);
    }
    e["box"] = b;
    std::string c;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) c += ',';
      c += std::to_string(cells[i]);
    }
    e["cells"] = c;
    e["max_iters"] = std::to_string(solver.max_iters);
    e["grad_tol"] = fmt(solver.grad_tol);
    e["step_init"] = fmt(solver.step_init);
    e["armijo_c"] = fmt(solver.armijo_c);
    e["armijo_shrink"] = fmt(solver.armijo_shrink);
    e["delta_reg"] = fmt(solver.delta_reg);
    e["seed"] = std::to_string(solver.seed);
    e["precondition"] = solver.precondition ? "true" : "false";
    e["cg_iters"] = std::to_string(solver.cg_iters);
    e["cg_tol"] = fmt(solver.cg_tol);
    e["multilevel"] = solver.multilevel ? "true" : "false";
    e["recenter_every"] = std::to_string(solver.recenter_every);
    e["init_scale"] = fmt(solver.init_scale);
    e["gauge_beta"] = fmt(solver.gauge_beta);
    e["dump_field"] = dump_field ? "true" : "false";
  }
  switch (command) {
    case Command::best_constant:
      e["estimator"] = estimator;
      e["scale_lo"] = fmt(scale_lo);
      e["scale_hi"] = fmt(scale_hi);
      break;
    case Command::eigenvalue:
      break;
    case Command::brezis_nirenberg:
      e["lambda"] = fmt(lambda);
      e["lambda_mode"] = lambda_mode;
      e["q"] = fmt(q_exponent);
      e["s_estimate"] = fmt(s_estimate);
      break;
    case Command::decay:
      e["field_in"] = field_in;
      e["r_min"] = fmt(r_min);
      e["r_max"] = fmt(r_max);
      e["n_annuli"] = std::to_string(n_annuli);
      e["boundary_margin_cells"] = std::to_string(boundary_margin_cells);
      break;
    case Command::expansion:
      e["field_in"] = field_in;
      e["eps_list"] = join_doubles(eps_list);
      e["q"] = fmt(q_exponent);
      e["r_cut"] = fmt(r_cut);
      break;
    case Command::concentration:
      e["field_in"] = field_in;
      e["rho_list"] = join_doubles(rho_list);
      break;
    case Command::inequality_check:
      e["p_list"] = join_doubles(p_list);
      e["samples"] = std::to_string(samples);
      e["seed"] = std::to_string(solver.seed);
      e["seed2"] = std::to_string(seed2);
      e["m"] = std::to_string(m);
      e["n"] = std::to_string(n);
      break;
  }
  return e;
}

ExperimentConfig parse_config(const std::string& text, Command command) {
  Parser ps;
  std::stringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      ps.fail("line " + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      ps.fail("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    if (ps.kv.count(key)) ps.fail("duplicate key '" + key + "'");
    ps.kv[key] = value;
  }

  ExperimentConfig cfg;
  cfg.command = command;
  const bool needs_grid = command != Command::inequality_check;

  if (needs_grid || ps.has("m") || ps.has("n")) {
    cfg.m = int(ps.integer("m", 1, needs_grid));
    cfg.n = int(ps.integer("n", 1, needs_grid));
  }
  if (needs_grid) {
    cfg.gamma = ps.number("gamma", 1.0, true);
    cfg.p = ps.number("p", 2.0, true);
    if (const auto b = ps.take("box")) {
      std::stringstream ss(*b);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
          ps.fail("key 'box': entries must look like lo:hi");
          break;
        }
        try {
          cfg.box.emplace_back(std::stod(item.substr(0, colon)),
                               std::stod(item.substr(colon + 1)));
        } catch (const std::exception&) {
          ps.fail("key 'box': cannot parse '" + item + "'");
          break;
        }
      }
    } else {
      ps.fail("missing required key 'box'");
    }
    if (const auto c = ps.take("cells")) {
      std::stringstream ss(*c);
      std::string item;
      while (std::getline(ss, item, ',')) {
        try {
          cfg.cells.push_back(std::stoi(item));
        } catch (const std::exception&) {
          ps.fail("key 'cells': cannot parse '" + item + "'");
          break;
        }
      }
    } else {
      ps.fail("missing required key 'cells'");
    }

    cfg.solver.max_iters = int(ps.integer("max_iters", cfg.solver.max_iters));
    cfg.solver.grad_tol = ps.number("grad_tol", cfg.solver.grad_tol);
    cfg.solver.step_init = ps.number("step_init", cfg.solver.step_init);
    cfg.solver.armijo_c = ps.number("armijo_c", cfg.solver.armijo_c);
    cfg.solver.armijo_shrink = ps.number("armijo_shrink", cfg.solver.armijo_shrink);
    cfg.solver.delta_reg = ps.number("delta_reg", cfg.solver.delta_reg);
    cfg.solver.seed = std::uint64_t(ps.integer("seed", long(cfg.solver.seed)));
    cfg.solver.precondition = ps.boolean("precondition", cfg.solver.precondition);
    cfg.solver.cg_iters = int(ps.integer("cg_iters", cfg.solver.cg_iters));
    cfg.solver.cg_tol = ps.number("cg_tol", cfg.solver.cg_tol);
    cfg.solver.multilevel = ps.boolean("multilevel", cfg.solver.multilevel);
    cfg.solver.recenter_every = int(ps.integer("recenter_every", cfg.solver.recenter_every));
    cfg.solver.init_scale = ps.number("init_scale", cfg.solver.init_scale);
    cfg.solver.gauge_beta = ps.number("gauge_beta", cfg.solver.gauge_beta);
    cfg.dump_field = ps.boolean("dump_field", cfg.dump_field);
  }

  switch (command) {
    case Command::best_constant:
      cfg.estimator = ps.word("estimator", cfg.estimator, {"single", "extrapolated"});
      cfg.scale_lo = ps.number("scale_lo", cfg.scale_lo);
      cfg.scale_hi = ps.number("scale_hi", cfg.scale_hi);
      break;
    case Command::eigenvalue:
      break;
    case Command::brezis_nirenberg:
      cfg.lambda = ps.number("lambda", 0.0, true);
      cfg.lambda_mode = ps.word("lambda_mode", cfg.lambda_mode,
                                {"absolute", "fraction_of_lambda1"});
      cfg.q_exponent = ps.number("q", 0.0, true);
      cfg.s_estimate = ps.number("s_estimate", 0.0);
      break;
    case Command::decay:
      cfg.field_in = ps.word("field_in", "", {}, true);
      cfg.r_min = ps.number("r_min", 0.0, true);
      cfg.r_max = ps.number("r_max", 0.0, true);
      cfg.n_annuli = int(ps.integer("n_annuli", cfg.n_annuli));
      cfg.boundary_margin_cells =
          int(ps.integer("boundary_margin_cells", cfg.boundary_margin_cells));
      break;
    case Command::expansion:
      cfg.field_in = ps.word("field_in", "", {}, true);
      cfg.eps_list = ps.double_list("eps_list", cfg.eps_list);
      cfg.q_exponent = ps.number("q", 0.0, true);
      cfg.r_cut = ps.number("r_cut", 0.0, true);
      break;
    case Command::concentration:
      cfg.field_in = ps.word("field_in", "", {}, true);
      cfg.rho_list = ps.double_list("rho_list", {0.25, 0.5, 1.0, 2.0, 4.0, 8.0});
      break;
    case Command::inequality_check:
      cfg.p_list = ps.double_list("p_list", cfg.p_list);
      cfg.samples = ps.integer("samples", cfg.samples);
      cfg.solver.seed = std::uint64_t(ps.integer("seed", long(cfg.solver.seed)));
      cfg.seed2 = std::uint64_t(ps.integer("seed2", long(cfg.seed2)));
      break;
  }

  // semantic validation, run only when the basics parsed
  if (ps.errors.empty() && needs_grid) {
    const double ng = double(cfg.m) + (1.0 + cfg.gamma) * double(cfg.n);
    if (cfg.m < 1 || cfg.n < 1) ps.fail("m and n must be >= 1");
    if (cfg.m + cfg.n > kMaxDim) ps.fail("m + n must not exceed " + std::to_string(kMaxDim));
    if (!(cfg.gamma >= 0.0)) ps.fail("gamma must be >= 0");
    if (!(cfg.p > 1.0)) ps.fail("p must be > 1");
    if (command != Command::eigenvalue && !(cfg.p < ng))
      ps.fail("p must be < N_gamma = " + fmt(ng));
    if (int(cfg.box.size()) != cfg.m + cfg.n) ps.fail("box needs m+n entries");
    if (int(cfg.cells.size()) != cfg.m + cfg.n) ps.fail("cells needs m+n entries");
    for (const auto& [lo, hi] : cfg.box)
      if (!(hi > lo)) ps.fail("box entries must satisfy lo < hi");
    for (int c : cfg.cells)
      if (c < 4) ps.fail("cells must be >= 4 per axis");
    try {
      cfg.solver.validate();
    } catch (const ValidationError& e) {
      ps.fail(e.what());
    }
    if (command == Command::brezis_nirenberg && cfg.p < ng) {
      const double pstar = cfg.p * ng / (ng - cfg.p);
      if (!(cfg.lambda > 0.0))
        ps.fail("lambda must be > 0 (for q = p it must also lie below lambda_1)");
      if (!(cfg.q_exponent >= cfg.p && cfg.q_exponent < pstar))
        ps.fail("q must lie in [p, p_star) = [" + fmt(cfg.p) + ", " + fmt(pstar) + ")");
      if (cfg.lambda_mode == "fraction_of_lambda1" && !(cfg.lambda < 1.0) &&
          cfg.q_exponent == cfg.p)
        ps.fail("lambda (as a fraction of lambda_1) must be < 1 when q = p");
    }
    if (command == Command::expansion && cfg.p < ng) {
      const double pstar = cfg.p * ng / (ng - cfg.p);
      if (!(cfg.q_exponent >= 1.0 && cfg.q_exponent < pstar))
        ps.fail("q must lie in [1, p_star) = [1, " + fmt(pstar) + ")");
      if (!(cfg.r_cut > 0.0)) ps.fail("r_cut must be > 0");
      for (std::size_t k = 1; k < cfg.eps_list.size(); ++k)
        if (!(cfg.eps_list[k] < cfg.eps_list[k - 1]))
          ps.fail("eps_list must be strictly decreasing");
    }
    if (command == Command::decay) {
      if (!(cfg.r_min > 0.0 && cfg.r_max > cfg.r_min))
        ps.fail("need 0 < r_min < r_max");
      if (cfg.n_annuli < 2) ps.fail("n_annuli must be >= 2");
    }
  }
  if (ps.errors.empty() && command == Command::inequality_check) {
    for (double pv : cfg.p_list)
      if (!(pv > 1.0)) ps.fail("p_list entries must be > 1");
    if (cfg.samples < 1) ps.fail("samples must be >= 1");
  }

  // unknown keys are errors (strict mode); appended after the semantic
  // checks so that one stray key does not mask substantive problems
  for (const auto& [k, v] : ps.kv)
    if (!ps.consumed.count(k)) ps.errors.push_back("unknown key '" + k + "'");

  if (!ps.errors.empty()) {
    std::string msg = "configuration invalid (" + std::to_string(ps.errors.size()) +
                      " problem" + (ps.errors.size() > 1 ? "s" : "") + "):";
    for (const auto& e : ps.errors) msg += "\n  - " + e;
    throw ValidationError(msg, ps.errors);
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path, Command command) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), command);
}

} // namespace grushin
