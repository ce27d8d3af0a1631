// The six batch commands behind the hsrg executable. Each reads a RunConfig,
// writes its tables into the output directory and a manifest.json, and
// returns an exit code (0 ok, 4 bound violation under strict mode).
#pragma once

#include <exception>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hsrg/flow.hpp"
#include "hsrg/io.hpp"
#include "hsrg/propagator.hpp"
#include "hsrg/sampler.hpp"
#include "hsrg/trees.hpp"

namespace hsrg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitViolation = 4;

struct CommandOptions {
  std::filesystem::path out = "out";
  int workers = 1;
  bool strict = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> snapshot;  // flow: regenerate tables from a snapshot
};

struct CommandResult {
  int exit_code = kExitOk;
  std::vector<std::string> violations;
  Json report = Json::object();
};

/// Results in index order; the first exception raised by any task is rethrown.
template <class T>
std::vector<T> parallel_map(std::size_t n, int workers, const std::function<T(std::size_t)>& f) {
  std::vector<T> out(n);
  const std::size_t nw = std::min<std::size_t>(std::max(1, workers), std::max<std::size_t>(n, 1));
  if (nw <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
    return out;
  }
  std::vector<std::exception_ptr> errs(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < nw; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += nw) {
        try {
          out[i] = f(i);
        } catch (...) {
          errs[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return out;
}

namespace cmd {

inline BoundaryCondition boundary(const RunConfig& cfg) {
  const std::string kind = cfg.get<std::string>("physical.bc", "robin");
  if (kind == "dirichlet") return BoundaryCondition::dirichlet();
  if (kind == "neumann") return BoundaryCondition::neumann();
  return BoundaryCondition::robin(cfg.get<double>("physical.c", 1.0));
}

inline FlowParams flow_params(const RunConfig& cfg, double Lambda0) {
  FlowParams p;
  p.m = cfg.get<double>("physical.m", 1.0);
  p.g = cfg.get<double>("physical.coupling", 1.0);
  p.bc = boundary(cfg);
  p.Lambda0 = Lambda0;
  p.u_max = cfg.get<double>("numerical.u_max", 60.0);
  try {
    p.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return p;
}

inline std::vector<double> grid_or_list(const RunConfig& cfg, const std::string& key, int default_nodes) {
  if (cfg.has(key)) return cfg.list(key);
  const double m = cfg.get<double>("physical.m", 1.0);
  return GridHalfLine::graded(cfg.get<int>("numerical.grid_nodes", default_nodes),
                              cfg.get<double>("numerical.grid_ratio", 1.08), cfg.get<double>("numerical.zmax", 12.0) / m)
      .nodes;
}

inline void require_nonneg(const std::vector<double>& v, const std::string& what) {
  for (double x : v)
    if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError(what + " entries must be finite and >= 0");
}

inline Json manifest(const std::string& command, const RunConfig& cfg, const OutputSet& out, Json extra) {
  Json m = Json::object();
  m["tool"] = "hsrg";
  m["version"] = kVersion;
  m["command"] = command;
  m["config"] = cfg.echo();
  Json ov = Json::object();
  for (const auto& [k, v] : cfg.overrides()) ov[k] = v;
  m["overrides"] = ov;
  Json sums = Json::object();
  for (const auto& [k, v] : out.checksums()) sums[k] = v;
  m["checksums"] = sums;
  m["details"] = std::move(extra);
  return m;
}

inline void finish(CommandResult& r, const CommandOptions& o) {
  if (!r.violations.empty() && o.strict) r.exit_code = kExitViolation;
  Json v = Json::array();
  for (const auto& s : r.violations) v.push_back(s);
  r.report["violations"] = v;
}

}  // namespace cmd

// ---------------------------------------------------------------- propagator

inline CommandResult cmd_propagator(const RunConfig& cfg, const CommandOptions& o) {
  const double m = cfg.get<double>("physical.m", 1.0);
  const BoundaryCondition bc = cmd::boundary(cfg);
  const std::vector<double> ps = cfg.list("task.momenta", {0.0, 0.5, 1.0});
  const std::vector<double> zs = cfg.list("task.z", {0.0, 0.25, 0.5, 1.0, 2.0});
  const std::vector<double> zps = cfg.list("task.zp", {0.0, 0.25, 0.5, 1.0, 2.0});
  cmd::require_nonneg(ps, "task.momenta");
  cmd::require_nonneg(zs, "task.z");
  cmd::require_nonneg(zps, "task.zp");
  PropagatorSpec spec{m, bc, cfg.get<double>("task.lambda", 0.5), cfg.get<double>("numerical.lambda0", 10.0)};
  if (!(spec.Lambda > 0.0) || spec.Lambda > spec.Lambda0) throw ConfigError("task.lambda must lie in (0, lambda0]");
  struct Job {
    double p, z, zp;
  };
  std::vector<Job> jobs;
  for (double p : ps)
    for (double z : zs)
      for (double zp : zps) jobs.push_back({p, z, zp});
  const auto rows = parallel_map<std::vector<double>>(jobs.size(), o.workers, [&](std::size_t i) {
    const Job& j = jobs[i];
    return std::vector<double>{j.p,
                               j.z,
                               j.zp,
                               C_pz(bc, m, j.p, j.z, j.zp),
                               C_reg(spec, j.p, j.z, j.zp),
                               Cdot(spec, j.p, j.z, j.zp),
                               j.zp > 0.0 ? bc_residual(bc, m, j.p, j.zp) : std::nan(""),
                               j.zp > 0.0 ? C_reg_bc_residual(spec, j.p, j.zp) : std::nan("")};
  });
  CsvTable t("propagator/1", {"p", "z", "zp", "C_pz", "C_reg", "Cdot", "bc_residual", "bc_residual_reg"});
  for (const auto& r : rows) t.row(r);
  OutputSet out(o.out);
  out.write("propagator.csv", t.str());
  CommandResult res;
  double worst = 0.0, worst_reg = 0.0;
  for (const auto& r : rows) {
    if (!std::isnan(r[6])) worst = std::max(worst, std::abs(r[6]));
    if (!std::isnan(r[7])) worst_reg = std::max(worst_reg, std::abs(r[7]));
  }
  res.report["rows"] = rows.size();
  res.report["max_bc_residual"] = jnum(worst);
  res.report["max_bc_residual_reg"] = jnum(worst_reg);
  if (worst > 1e-12) res.violations.push_back("closed-form boundary residual above 1e-12");
  if (worst_reg > 1e-8) res.violations.push_back("regularized boundary residual above 1e-8");
  cmd::finish(res, o);
  Json d = res.report;
  d["spec"] = {{"m", m}, {"bc", to_string(bc.kind)}, {"c", bc.c}, {"Lambda", spec.Lambda}, {"Lambda0", spec.Lambda0}};
  out.write("manifest.json", cmd::manifest("propagator", cfg, out, d).dump(2) + "\n");
  return res;
}

// ---------------------------------------------------------------- flow

namespace cmd {

inline std::string counterterm_name(int l, std::size_t k) { return "counterterms_l" + std::to_string(l) + "_" + std::to_string(k) + ".csv"; }

/// Counterterm CSVs from a snapshot; used for fresh runs and for reloads alike.
inline void write_counterterm_tables(const Snapshot& s, OutputSet& out) {
  const auto& z = s.arrays.at("z");
  const auto& lambdas = s.arrays.at("lambdas");
  for (int l = 0; l <= 1; ++l)
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
      CsvTable t("counterterms/1", {"z", "a", "s", "d", "b", "c"});
      const std::string pre = "l" + std::to_string(l) + "_" + std::to_string(k) + "_";
      for (std::size_t i = 0; i < z.size(); ++i)
        t.row({z[i], s.arrays.at(pre + "a")[i], s.arrays.at(pre + "s")[i], s.arrays.at(pre + "d")[i],
               s.arrays.at(pre + "b")[i], s.arrays.at(pre + "c")[i]});
      out.write(counterterm_name(l, k), t.str());
    }
}

}  // namespace cmd

inline CommandResult cmd_flow(const RunConfig& cfg, const CommandOptions& o) {
  OutputSet out(o.out);
  CommandResult res;
  if (o.snapshot) {
    const Snapshot s = Snapshot::deserialize(read_file(*o.snapshot));
    cmd::write_counterterm_tables(s, out);
    res.report["reloaded"] = o.snapshot->string();
    cmd::finish(res, o);
    out.write("manifest.json", cmd::manifest("flow", cfg, out, res.report).dump(2) + "\n");
    return res;
  }
  const double Lambda0 = cfg.get<double>("numerical.lambda0", 50.0);
  const FlowParams fp = cmd::flow_params(cfg, Lambda0);
  auto model = std::make_shared<const OneLoopModel>(fp);
  std::vector<double> lambdas = cfg.list("task.lambdas", {0.0, 0.5, 1.0, 2.0});
  const std::vector<double> zs = cmd::grid_or_list(cfg, "task.z", 16);
  cmd::require_nonneg(lambdas, "task.lambdas");
  cmd::require_nonneg(zs, "task.z");
  for (double L : lambdas)
    if (L > Lambda0) throw ConfigError("task.lambdas entries must not exceed lambda0");

  Snapshot snap;
  snap.header = {{"format", "hsrg-flow"}, {"m", fp.m}, {"coupling", fp.g}, {"bc", to_string(fp.bc.kind)},
                 {"c", fp.bc.c}, {"Lambda0", fp.Lambda0}, {"u_max", fp.u_max}};
  snap.arrays["z"] = zs;
  snap.arrays["lambdas"] = lambdas;
  double bphz_table = 0.0;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    struct Row {
      double a0, c0, a1, c1;
    };
    const auto rows = parallel_map<Row>(zs.size(), o.workers, [&](std::size_t i) {
      const CountertermSet t0 = counterterm_table(*model, lambdas[k], 0, std::span<const double>(&zs[i], 1));
      const CountertermSet t1 = counterterm_table(*model, lambdas[k], 1, std::span<const double>(&zs[i], 1));
      return Row{t0.a[0], t0.c[0], t1.a[0], t1.c[0]};
    });
    for (int l = 0; l <= 1; ++l) {
      const std::string pre = "l" + std::to_string(l) + "_" + std::to_string(k) + "_";
      std::vector<double> a(zs.size()), c(zs.size()), zero(zs.size(), 0.0);
      for (std::size_t i = 0; i < zs.size(); ++i) {
        a[i] = l == 0 ? rows[i].a0 : rows[i].a1;
        c[i] = l == 0 ? rows[i].c0 : rows[i].c1;
        if (l == 1 && lambdas[k] == 0.0) bphz_table = std::max({bphz_table, std::abs(a[i]), std::abs(c[i])});
      }
      snap.arrays[pre + "a"] = a;
      snap.arrays[pre + "s"] = zero;
      snap.arrays[pre + "d"] = zero;
      snap.arrays[pre + "b"] = zero;
      snap.arrays[pre + "c"] = c;
    }
  }
  cmd::write_counterterm_tables(snap, out);
  out.write("snapshot.bin", snap.serialize());

  // Two-way integration at the requested roots.
  const std::vector<double> z1s = cfg.list("task.z1", {0.0, 0.5});
  cmd::require_nonneg(z1s, "task.z1");
  FlowOptions fo;
  fo.steps_per_unit = cfg.get<double>("numerical.steps_per_unit", 32.0);
  fo.relevant_steps_per_unit = cfg.get<double>("numerical.relevant_steps_per_unit", 64.0);
  fo.tolerance = cfg.get<double>("numerical.tolerance", 1e-6);
  fo.strict = true;
  std::optional<TestFunctionSpec> spec;
  if (cfg.get<bool>("task.remainder", false)) {
    std::vector<double> taus = cfg.list("task.taus", {0.3, 0.5, 0.4}), ys = cfg.list("task.anchors", {0.6, 0.2, 1.0});
    taus.resize(3, taus.empty() ? 0.3 : taus.back());
    ys.resize(3, ys.empty() ? 0.5 : ys.back());
    spec = TestFunctionSpec::plain(4, taus, ys, fp.robin());
  }
  std::vector<double> route_lambdas;
  for (double L : lambdas)
    if (L >= fp.lambda_min() || L == 0.0) route_lambdas.push_back(L);
  struct Job {
    double L, z;
  };
  std::vector<Job> jobs;
  for (double L : route_lambdas)
    for (double z : z1s) jobs.push_back({L, z});
  const auto pts = parallel_map<FlowPoint>(jobs.size(), o.workers, [&](std::size_t i) {
    const FlowState st = make_state(model, jobs[i].L);
    const std::vector<double> one{jobs[i].z};
    return integrate_flow(st, jobs[i].L, one, spec, fo).at(0);
  });
  std::vector<std::string> cols = {"Lambda", "z", "a_up", "a_closed", "a_err", "c_up", "c_closed", "c_err",
                                   "a_bare", "kappa", "bphz_a", "bphz_c"};
  if (spec) cols.insert(cols.end(), {"remainder", "remainder_err", "full_fold", "reconstruction_gap"});
  CsvTable routes("flow_routes/1", cols);
  double bphz_route = 0.0, recon = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const FlowPoint& p = pts[i];
    const double L = jobs[i].L;
    std::vector<double> r = {L,       p.z1,       p.a,     model->a_closed(L, p.z1), p.a_err, p.c, model->c_closed(L, p.z1),
                             p.c_err, p.a_bare, p.kappa, p.bphz_a,                 p.bphz_c};
    bphz_route = std::max({bphz_route, std::abs(p.bphz_a), std::abs(p.bphz_c)});
    if (spec) {
      const double gap = *p.full_fold - (model->c_closed(L, p.z1) * testfn_at_root(*spec, p.z1) + *p.remainder);
      recon = std::max(recon, std::abs(gap));
      r.insert(r.end(), {*p.remainder, p.remainder_err, *p.full_fold, gap});
    }
    routes.row(r);
  }
  out.write("flow_routes.csv", routes.str());
  res.report["bphz_table_max"] = jnum(bphz_table);
  res.report["bphz_route_max"] = jnum(bphz_route);
  if (spec) res.report["reconstruction_max"] = jnum(recon);
  if (bphz_table > 1e-8) res.violations.push_back("BPHZ table residual above 1e-8");
  if (bphz_route > 1e-8) res.violations.push_back("BPHZ two-way residual above 1e-8");
  if (spec && recon > 1e-8) res.violations.push_back("reconstruction gap above 1e-8");
  cmd::finish(res, o);
  Json d = res.report;
  d["grid"] = jarray(zs);
  d["schedule"] = {{"Lambda_min", fp.lambda_min()}, {"Lambda0", fp.Lambda0}, {"steps_per_unit", fo.steps_per_unit}, {"relevant_steps_per_unit", fo.relevant_steps_per_unit}};
  d["lambdas"] = jarray(lambdas);
  out.write("manifest.json", cmd::manifest("flow", cfg, out, d).dump(2) + "\n");
  return res;
}

// ---------------------------------------------------------------- trees

inline CommandResult cmd_trees(const RunConfig& cfg, const CommandOptions& o) {
  const int s_max = cfg.get<int>("task.s_max", 4), l_max = cfg.get<int>("task.l_max", 2);
  if (s_max < 1 || l_max < 0) throw ConfigError("task.s_max must be >= 1 and task.l_max >= 0");
  const std::string kind = cfg.get<std::string>("task.kind", "both");
  if (kind != "single" && kind != "twice" && kind != "both") throw ConfigError("task.kind must be single, twice or both");
  std::vector<TreeKind> kinds;
  if (kind != "twice") kinds.push_back(TreeKind::SingleRoot);
  if (kind != "single") kinds.push_back(TreeKind::TwiceRooted);

  OutputSet out(o.out);
  CommandResult res;
  std::string listing;
  CsvTable counts("tree_counts/1", {"s", "l", "twice_rooted", "count"});
  Json jc = Json::array();
  for (TreeKind k : kinds)
    for (int s = k == TreeKind::SingleRoot ? 2 : 2; s <= s_max; ++s)
      for (int l = 0; l <= l_max; ++l) {
        if (k == TreeKind::TwiceRooted && l == 0) continue;
        const auto trees = enumerate_trees(s, l, 64, k);
        counts.row({double(s), double(l), k == TreeKind::TwiceRooted ? 1.0 : 0.0, double(trees.size())});
        for (std::size_t i = 0; i < trees.size(); ++i)
          listing += std::string(k == TreeKind::SingleRoot ? "single" : "twice") + " s=" + std::to_string(s) +
                     " l=" + std::to_string(l) + " #" + std::to_string(i) + " " + trees[i].canonical() +
                     " v2=" + std::to_string(trees[i].v2()) + "\n";
        jc.push_back({{"s", s}, {"l", l}, {"twice_rooted", k == TreeKind::TwiceRooted}, {"count", trees.size()}});
      }
  out.write("trees.txt", listing);
  out.write("tree_counts.csv", counts.str());

  // Integrated weights for the small classes.
  const int ws = cfg.get<int>("task.weights_s_max", 3), wl = cfg.get<int>("task.weights_l_max", 1);
  WeightInput base;
  base.Lambda = cfg.get<double>("task.lambda", 1.0);
  base.Lambda0 = cfg.get<double>("numerical.lambda0", 100.0);
  base.delta = cfg.get<double>("numerical.delta", 0.1);
  const std::vector<double> z1l = cfg.list("task.z1", {0.5});
  base.z1 = z1l.empty() ? 0.5 : z1l.front();
  base.z2 = cfg.get<double>("task.z2", 1.0);
  const std::vector<double> taus = cfg.list("task.taus", {0.3}), ys = cfg.list("task.anchors", {1.0});
  if (taus.empty() || ys.empty()) throw ConfigError("task.taus and task.anchors need at least one entry");
  struct Job {
    TreeKind k;
    int s, l;
    Tree t;
    std::size_t idx;
  };
  std::vector<Job> jobs;
  for (TreeKind k : kinds)
    for (int s = 2; s <= std::min(ws, s_max); ++s)
      for (int l = 0; l <= std::min(wl, l_max); ++l) {
        if (k == TreeKind::TwiceRooted && l == 0) continue;
        const auto trees = enumerate_trees(s, l, 64, k);
        for (std::size_t i = 0; i < trees.size(); ++i) jobs.push_back({k, s, l, trees[i], i});
      }
  auto input_for = [&](const Job& j) {
    WeightInput in = base;
    const int n_ext = j.k == TreeKind::SingleRoot ? j.s - 1 : j.s - 2;
    for (int e = 0; e < n_ext; ++e) {
      in.taus.push_back(taus[std::min<std::size_t>(e, taus.size() - 1)]);
      in.anchors.push_back(ys[std::min<std::size_t>(e, ys.size() - 1)]);
    }
    return in;
  };
  const auto weights = parallel_map<double>(jobs.size(), o.workers,
                                            [&](std::size_t i) { return integrated_weight(jobs[i].t, input_for(jobs[i])).value; });
  CsvTable wt("tree_weights/1", {"s", "l", "twice_rooted", "index", "weight"});
  for (std::size_t i = 0; i < jobs.size(); ++i)
    wt.row({double(jobs[i].s), double(jobs[i].l), jobs[i].k == TreeKind::TwiceRooted ? 1.0 : 0.0, double(jobs[i].idx),
            weights[i]});
  out.write("tree_weights.csv", wt.str());
  res.report["counts"] = jc;
  cmd::finish(res, o);
  out.write("manifest.json", cmd::manifest("trees", cfg, out, res.report).dump(2) + "\n");
  return res;
}

// ---------------------------------------------------------------- bounds

struct BoundCase {
  int l, n, s;
};

inline std::vector<BoundCase> default_bound_cases() { return {{0, 4, 4}, {1, 2, 1}, {1, 2, 2}, {1, 4, 1}, {1, 4, 2}}; }

struct BoundsReport {
  std::vector<BoundSample> samples;
  Json json = Json::object();
  std::vector<std::string> violations;
};

/// Theorem-1 ratios over (case, Lambda0, Lambda, tau, y, z1); per case the
/// maximum over the lattice at each Lambda0 and the growth fits.
inline BoundsReport theorem1_lattice(const FlowParams& base, const std::vector<BoundCase>& cases,
                                     const std::vector<double>& ladder, const std::vector<double>& lambdas,
                                     const std::vector<double>& taus, const std::vector<double>& ys,
                                     const std::vector<double>& z1s, double delta, int workers) {
  if (ladder.empty()) throw ConfigError("the Lambda0 ladder is empty");
  struct Job {
    std::size_t c;
    double L0, L, tau, y, z1;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cases.size(); ++c)
    for (double L0 : ladder)
      for (double L : lambdas)
        for (double tau : cases[c].s > 1 ? taus : std::vector<double>{0.0})
          for (double y : cases[c].s > 1 ? ys : std::vector<double>{0.0})
            for (double z1 : z1s) jobs.push_back({c, L0, L, tau, y, z1});
  BoundsReport rep;
  rep.samples = parallel_map<BoundSample>(jobs.size(), workers, [&](std::size_t i) {
    const Job& j = jobs[i];
    FlowParams fp = base;
    fp.Lambda0 = j.L0;
    auto model = std::make_shared<const OneLoopModel>(fp);
    const FlowState st = make_state(model, j.L);
    const BoundCase& bc = cases[j.c];
    const TestFunctionSpec spec = bc.s == 1 ? TestFunctionSpec::constant(bc.n)
                                            : TestFunctionSpec::plain(bc.n, std::vector<double>(bc.s - 1, j.tau),
                                                                      std::vector<double>(bc.s - 1, j.y), fp.robin());
    BoundSample b = theorem1_ratio(st, bc.l, spec, j.z1, delta);
    b.tau = j.tau;
    b.y = j.y;
    return b;
  });
  Json jcases = Json::array();
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const BoundCase& bc = cases[c];
    std::vector<double> lx, ly, maxes;
    std::vector<double> ex, ey, tx, ty;
    for (double L0 : ladder) {
      double mx = 0.0;
      for (std::size_t i = 0; i < jobs.size(); ++i)
        if (jobs[i].c == c && jobs[i].L0 == L0) mx = std::max(mx, rep.samples[i].ratio);
      maxes.push_back(mx);
      lx.push_back(std::log(std::log(L0 / base.m)));
      ly.push_back(std::log(std::max(mx, 1e-300)));
    }
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].c != c || jobs[i].L0 != ladder.back() || rep.samples[i].ratio <= 0.0) continue;
      ex.push_back(std::log(std::log((jobs[i].L + base.m) / base.m) + 1.0));
      ey.push_back(std::log(rep.samples[i].ratio));
      if (bc.s > 1) {
        tx.push_back(std::log(1.0 / (std::sqrt(jobs[i].tau) * (jobs[i].L + base.m))));
        ty.push_back(std::log(rep.samples[i].ratio));
      }
    }
    Json jc = {{"l", bc.l}, {"n", bc.n}, {"s", bc.s}, {"ladder", jarray(ladder)}, {"max_ratio", jarray(maxes)}};
    double growth = 0.0;
    if (ladder.size() >= 2) {
      growth = fit_line(lx, ly).slope;
      jc["growth_vs_loglog"] = jnum(growth);
    }
    auto degree = [](const std::vector<double>& x, const std::vector<double>& y) {
      double lo = INFINITY, hi = -INFINITY;
      for (double v : x) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      return x.size() >= 2 && hi - lo > 1e-9 ? fit_line(x, y).slope : 0.0;
    };
    jc["log_degree"] = jnum(degree(ex, ey));
    if (bc.s > 1) jc["tau_degree"] = jnum(degree(tx, ty));
    if (bc.l == 0) {
      const double cap = std::pow(2.0, bc.s) * std::pow(1.0 + delta, 0.5 * bc.s);
      double mx = 0.0;
      for (double v : maxes) mx = std::max(mx, v);
      jc["tree_level_cap"] = jnum(cap);
      if (mx > cap * std::abs(base.g)) rep.violations.push_back("tree-level ratio exceeds 2^s (1+delta)^(s/2) |g|");
    } else if (ladder.size() >= 2 && growth >= 2.0) {
      rep.violations.push_back("ratio grows at least like log^2 across the ladder for l=1 n=" + std::to_string(bc.n) +
                               " s=" + std::to_string(bc.s));
    }
    jcases.push_back(jc);
  }
  rep.json["cases"] = jcases;
  return rep;
}

inline CommandResult cmd_bounds(const RunConfig& cfg, const CommandOptions& o) {
  const std::vector<double> ladder = cfg.list("task.ladder", {10.0, 100.0, 1000.0});
  if (ladder.empty()) throw ConfigError("task.ladder is empty");
  const FlowParams fp = cmd::flow_params(cfg, ladder.back());
  const std::vector<double> lambdas = cfg.list("task.lambdas", {0.5, 2.0});
  const std::vector<double> taus = cfg.list("task.taus", {0.05, 0.5});
  const std::vector<double> ys = cfg.list("task.anchors", {0.5});
  const std::vector<double> z1s = cfg.list("task.z1", {0.0, 0.5});
  for (double L : lambdas)
    if (!(L > 0.0)) throw ConfigError("task.lambdas entries must be > 0 for the envelope");
  for (double L0 : ladder)
    if (!(L0 > fp.m)) throw ConfigError("task.ladder entries must exceed m");
  const BoundsReport rep = theorem1_lattice(fp, default_bound_cases(), ladder, lambdas, taus, ys, z1s,
                                            cfg.get<double>("numerical.delta", 0.1), o.workers);
  OutputSet out(o.out);
  CsvTable t("bounds/1", {"l", "n", "s", "Lambda0", "Lambda", "tau", "y", "z1", "folded", "envelope", "ratio"});
  for (const auto& b : rep.samples)
    t.row({double(b.l), double(b.n), double(b.s), b.Lambda0, b.Lambda, b.tau, b.y, b.z1, b.folded, b.envelope, b.ratio});
  out.write("bounds.csv", t.str());
  CommandResult res;
  res.report = rep.json;
  res.violations = rep.violations;
  cmd::finish(res, o);
  out.write("bounds.json", res.report.dump(2) + "\n");
  out.write("manifest.json", cmd::manifest("bounds", cfg, out, Json::object()).dump(2) + "\n");
  return res;
}

// ---------------------------------------------------------------- converge

struct ConvergenceSeries {
  std::string name;
  int n = 4;
  std::vector<double> values;
  DecayFit fit;
};

/// Observables over the Lambda0 ladder: the BPHZ projections at Lambda = 0
/// (c at z1, a in the bulk, folded two-point kernel) and two Lambda0-sensitive
/// diagnostics (c at Lambda = m, folded four-point kernel at Lambda = 0).
inline std::vector<ConvergenceSeries> convergence_series(const FlowParams& base, const std::vector<double>& ladder,
                                                         double z1, double z_bulk, const TestFunctionSpec& spec4,
                                                         int workers) {
  struct Vals {
    double c0, abulk, f2, cm, f4;
  };
  const auto vals = parallel_map<Vals>(ladder.size(), workers, [&](std::size_t i) {
    FlowParams fp = base;
    fp.Lambda0 = ladder[i];
    auto model = std::make_shared<const OneLoopModel>(fp);
    const FlowState st0 = make_state(model, 0.0);
    const TestFunctionSpec spec2 = TestFunctionSpec::plain(2, {spec4.taus[0]}, {spec4.anchors[0]}, fp.robin());
    const double f2 = fold_at(st0.L12, LegFactors::from_spec(spec2), z1);
    const double f4 = fold_at(st0.L14, LegFactors::from_spec(spec4), z1);
    return Vals{model->c_closed(0.0, z1), model->a_closed(0.0, z_bulk), f2, model->c_closed(base.m, z1), f4};
  });
  std::vector<ConvergenceSeries> out(5);
  const std::pair<const char*, int> names[] = {
      {"c1_Lambda0_at_0", 4}, {"a1_bulk_at_0", 2}, {"folded_L12_at_0", 2}, {"c1_at_m", 4}, {"folded_L14_at_0", 4}};
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].name = names[i].first;
    out[i].n = names[i].second;
  }
  for (const auto& v : vals) {
    out[0].values.push_back(v.c0);
    out[1].values.push_back(v.abulk);
    out[2].values.push_back(v.f2);
    out[3].values.push_back(v.cm);
    out[4].values.push_back(v.f4);
  }
  for (auto& s : out) s.fit = fit_decay(ladder, s.values, base.m);
  return out;
}

inline CommandResult cmd_converge(const RunConfig& cfg, const CommandOptions& o) {
  const std::vector<double> ladder = cfg.list("task.ladder", {10.0, 20.0, 40.0, 80.0, 160.0});
  if (ladder.size() < 2) throw ConfigError("task.ladder needs at least two entries");
  for (std::size_t i = 1; i < ladder.size(); ++i)
    if (!(ladder[i] > ladder[i - 1])) throw ConfigError("task.ladder must increase");
  const FlowParams fp = cmd::flow_params(cfg, ladder.front());
  const std::vector<double> z1l = cfg.list("task.z1", {0.5});
  const double z1 = z1l.empty() ? 0.5 : z1l.front();
  const double zb = cfg.get<double>("task.z_bulk", 10.0 / fp.m);
  std::vector<double> taus = cfg.list("task.taus", {0.3, 0.5, 0.4}), ys = cfg.list("task.anchors", {0.6, 0.2, 1.0});
  taus.resize(3, taus.empty() ? 0.3 : taus.back());
  ys.resize(3, ys.empty() ? 0.5 : ys.back());
  const TestFunctionSpec spec4 = TestFunctionSpec::plain(4, taus, ys, fp.robin());
  const auto series = convergence_series(fp, ladder, z1, zb, spec4, o.workers);
  CommandResult res;
  Json js = Json::array();
  for (const auto& s : series) {
    std::vector<double> pred;
    for (double L0 : ladder) pred.push_back(std::pow(fp.m, 5 - s.n) / L0);
    js.push_back({{"observable", s.name},
                  {"n", s.n},
                  {"values", jarray(s.values)},
                  {"differences", jarray(s.fit.diffs)},
                  {"measurable", s.fit.measurable},
                  {"slope", jnum(s.fit.slope)},
                  {"r2", jnum(s.fit.r2)},
                  {"prediction_m^(5-n)/Lambda0", jarray(pred)}});
    if (s.fit.measurable && s.fit.slope > -1.0 + 0.15)
      res.violations.push_back(s.name + ": differences decay slower than 1/Lambda0");
  }
  res.report["ladder"] = jarray(ladder);
  res.report["z1"] = jnum(z1);
  res.report["z_bulk"] = jnum(zb);
  res.report["series"] = js;
  cmd::finish(res, o);
  OutputSet out(o.out);
  out.write("converge.json", res.report.dump(2) + "\n");
  out.write("manifest.json", cmd::manifest("converge", cfg, out, Json::object()).dump(2) + "\n");
  return res;
}

// ---------------------------------------------------------------- sample

inline CommandResult cmd_sample(const RunConfig& cfg, const CommandOptions& o) {
  const double m = cfg.get<double>("physical.m", 1.0);
  const BoundaryCondition bc = cmd::boundary(cfg);
  PropagatorSpec spec{m, bc, cfg.get<double>("task.lambda", 0.1), cfg.get<double>("numerical.lambda0", 10.0)};
  if (!(spec.Lambda > 0.0) || spec.Lambda > spec.Lambda0) throw ConfigError("task.lambda must lie in (0, lambda0]");
  const std::vector<double> ps = cfg.list("task.momenta", {0.0});
  if (ps.empty()) throw ConfigError("task.momenta needs an entry");
  const double p = ps.front();
  const GridHalfLine grid = GridHalfLine::graded(cfg.get<int>("numerical.grid_nodes", 32),
                                                 cfg.get<double>("numerical.grid_ratio", 1.08),
                                                 cfg.get<double>("numerical.zmax", 12.0) / m);
  const long count = cfg.get<long>("task.count", 100000);
  if (count < 0) throw ConfigError("task.count must be >= 0");
  const std::uint64_t seed = o.seed ? *o.seed : cfg.get<std::uint64_t>("task.seed", 1);
  const CovarianceMatrix cov = build_covariance(spec, grid, p);
  const SampleSet s = sample_fields(cov, static_cast<std::size_t>(count), seed, o.workers);
  const SampleStatistics st = sample_statistics(cov, s);
  CommandResult res;
  res.report["generator"] = "philox4x32-10";
  res.report["seed"] = seed;
  res.report["count"] = count;
  res.report["nodes"] = grid.size();
  res.report["lambda_max"] = jnum(cov.lambda_max);
  res.report["eigen_floor"] = jnum(cov.eigen_floor);
  res.report["weighted_eigen_floor"] = jnum(cov.weighted_floor);
  res.report["max_mean_sigma"] = jnum(st.max_mean_sigma);
  res.report["covariance_pass_fraction"] = jnum(st.covariance_pass_fraction);
  res.report["max_covariance_z"] = jnum(st.max_cov_z);
  if (count > 0 && st.covariance_pass_fraction < 0.95) res.violations.push_back("fewer than 95% of covariance entries within 3 sigma");
  if (!bc.robin_constant().is_dirichlet() && count > 1) {
    const RobinRegression rr = robin_regression(spec, p, static_cast<std::size_t>(count), seed ^ 0x5bd1e995ull, o.workers);
    res.report["robin"] = {{"c", jnum(rr.c)},           {"slope", jnum(rr.slope)}, {"population_slope", jnum(rr.population)},
                           {"stderr", jnum(rr.stderr_)}, {"h", jnum(rr.h)}};
    if (std::abs(rr.slope - rr.population) > 3.0 * rr.stderr_) res.violations.push_back("Robin regression outside 3 standard errors");
  }
  cmd::finish(res, o);
  OutputSet out(o.out);
  out.write("sample.json", res.report.dump(2) + "\n");
  if (cfg.get<bool>("output.samples_csv", false)) {
    std::vector<std::string> cols;
    for (std::size_t i = 0; i < grid.size(); ++i) cols.push_back("z" + std::to_string(i));
    CsvTable t("samples/1", cols);
    for (Eigen::Index r = 0; r < s.fields.rows(); ++r) {
      std::vector<double> row(grid.size());
      for (std::size_t i = 0; i < grid.size(); ++i) row[i] = s.fields(r, static_cast<Eigen::Index>(i));
      t.row(row);
    }
    out.write("samples.csv", t.str());
  }
  out.write("manifest.json", cmd::manifest("sample", cfg, out, {{"grid", jarray(grid.nodes)}}).dump(2) + "\n");
  return res;
}

/// Dispatch by name; unknown names are configuration errors.
inline CommandResult run_command(const std::string& name, const RunConfig& cfg, const CommandOptions& o) {
  if (name == "propagator") return cmd_propagator(cfg, o);
  if (name == "flow") return cmd_flow(cfg, o);
  if (name == "trees") return cmd_trees(cfg, o);
  if (name == "bounds") return cmd_bounds(cfg, o);
  if (name == "converge") return cmd_converge(cfg, o);
  if (name == "sample") return cmd_sample(cfg, o);
  throw ConfigError("unknown subcommand " + name);
}

/// Maps library exceptions to the documented exit codes.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ShapeError*>(&e) ||
      dynamic_cast<const DomainError*>(&e) || dynamic_cast<const EnumerationError*>(&e))
    return kExitConfig;
  return kExitNumerical;
}

}  // namespace hsrg
