// gigaqbx: command-line front end.
//
// Every subcommand prints one JSON document (or writes it to --out). Fields
// that depend on the machine live under "timings" only.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gigaqbx/costmodel.hpp"
#include "gigaqbx/driver.hpp"
#include "gigaqbx/geometry.hpp"
#include "gigaqbx/ilists.hpp"
#include "gigaqbx/io.hpp"
#include "gigaqbx/tree.hpp"

using namespace gigaqbx;
using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// option groups

struct GeometryOptions {
  std::string path;
  std::string side = "exterior";
  double alpha = 0.5;
};

struct EvalOptions {
  std::string kernel = "laplace";
  double k = 0.0;
  std::string variant = "s";
  int pqbx = 5, pfmm = 15, nmax = 64;
  std::string nmpole = "0";
  double tf = 0.9;
  std::string mode = "ts";
};

void add_geometry_options(CLI::App* app, GeometryOptions& g) {
  app->add_option("--geometry", g.path, "geometry JSON file written by `geom`")->required();
  app->add_option("--side", g.side, "side for QBX centers when the file has none")
      ->check(CLI::IsMember({"exterior", "interior"}));
  app->add_option("--alpha", g.alpha, "expansion radius as a fraction of the element size");
}

void add_eval_options(CLI::App* app, EvalOptions& e, bool with_kernel = true) {
  if (with_kernel) {
    app->add_option("--kernel", e.kernel)->check(CLI::IsMember({"laplace", "helmholtz"}));
    app->add_option("--k", e.k, "Helmholtz wavenumber");
    app->add_option("--variant", e.variant)->check(CLI::IsMember({"s", "sprime", "d"}));
  }
  app->add_option("--pqbx", e.pqbx, "QBX expansion order");
  app->add_option("--pfmm", e.pfmm, "FMM expansion order");
  app->add_option("--nmax", e.nmax, "maximum particles per leaf box");
  app->add_option("--nmpole", e.nmpole, "minimum sources for a List 3 far multipole (integer or inf)");
  app->add_option("--tf", e.tf, "target confinement factor");
  app->add_option("--mode", e.mode)->check(CLI::IsMember({"base", "ts", "direct"}));
}

std::size_t parse_nmpole(const std::string& s) {
  if (s == "inf") return kNoMultipoles;
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos == s.size() && v >= 0) return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
  }
  throw ValidationError("--nmpole must be a nonnegative integer or inf, got '" + s + "'");
}

EvalMode parse_mode(const std::string& s) {
  if (s == "base") return EvalMode::Baseline;
  if (s == "ts") return EvalMode::TargetSpecific;
  return EvalMode::DirectReference;
}

Variant parse_variant(const std::string& s) {
  if (s == "sprime") return Variant::TargetNormalDeriv;
  if (s == "d") return Variant::SourceNormalDeriv;
  return Variant::SingleLayer;
}

EvalParams make_params(const EvalOptions& e, const CLI::App* app) {
  EvalParams p;
  p.orders = {e.pqbx, e.pfmm};
  p.tree.nmax = e.nmax;
  p.tree.t_f = e.tf;
  p.nmpole = parse_nmpole(e.nmpole);
  p.mode = parse_mode(e.mode);
  const Variant v = parse_variant(e.variant);
  if (e.kernel == "helmholtz") {
    p.spec = KernelSpec::helmholtz(e.k, v);
  } else {
    const CLI::Option* kopt = app->get_option_no_throw("--k");
    if (kopt && kopt->count() > 0) throw ValidationError("--k is only valid with --kernel helmholtz");
    p.spec = KernelSpec::laplace(v);
  }
  p.validate();
  return p;
}

GeometryFile load_geometry(const GeometryOptions& g) {
  GeometryFile f = read_geometry(g.path);
  if (!f.centers) f.centers = place_qbx_centers(f.disc, g.side == "exterior" ? Side::Exterior : Side::Interior, g.alpha);
  return f;
}

// ---------------------------------------------------------------------------
// JSON helpers

json complex_array(const std::vector<complex_t>& v) {
  json a = json::array();
  for (auto z : v) a.push_back({z.real(), z.imag()});
  return a;
}

json point_json(const Point3& p) { return {p.x, p.y, p.z}; }

json params_json(const EvalParams& p) {
  json j;
  j["pqbx"] = p.orders.p_qbx;
  j["pfmm"] = p.orders.p_fmm;
  j["nmax"] = p.tree.nmax;
  j["nmpole"] = p.nmpole == kNoMultipoles ? json("inf") : json(p.nmpole);
  j["tf"] = p.tree.t_f;
  j["mode"] = mode_name(p.mode);
  j["kernel"] = p.spec.equation == Equation::Laplace ? "laplace" : "helmholtz";
  if (p.spec.equation == Equation::Helmholtz) j["k"] = p.spec.helmholtz_k;
  j["variant"] = variant_name(p.spec.variant);
  return j;
}

json counts_json(const InteractionCounts& c) {
  json by_stage = json::object(), total = json::object();
  for (int cat = 0; cat < kNumCategories; ++cat) total[kCategoryNames[cat]] = c.total(static_cast<Category>(cat));
  for (std::size_t s = 0; s < kStageNames.size(); ++s) {
    json row = json::object();
    for (int cat = 0; cat < kNumCategories; ++cat) row[kCategoryNames[cat]] = c.by_stage[s][cat];
    by_stage[kStageNames[s]] = row;
  }
  return {{"total", total}, {"by_stage", by_stage}};
}

InteractionCounts counts_from_json(const json& j) {
  InteractionCounts c;
  const json& by_stage = j.at("by_stage");
  for (std::size_t s = 0; s < kStageNames.size(); ++s) {
    if (!by_stage.contains(kStageNames[s])) continue;
    const json& row = by_stage.at(kStageNames[s]);
    for (int cat = 0; cat < kNumCategories; ++cat)
      if (row.contains(kCategoryNames[cat])) c.by_stage[s][cat] = row.at(kCategoryNames[cat]).get<std::uint64_t>();
  }
  return c;
}

json timings_json(const std::map<std::string, double>& t) {
  json j = json::object();
  for (const auto& [k, v] : t) j[k] = v;
  return j;
}

json constants_json(const CalibrationConstants& k) {
  json j = json::object();
  for (int c = 0; c < 10; ++c) j[kCategoryNames[c]] = k.c[c];
  return j;
}

CalibrationConstants constants_from_file(const std::string& path) {
  if (path.empty()) return CalibrationConstants::reference();
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open constants file: " + path);
  json j = json::parse(in);
  if (j.contains("constants")) j = j.at("constants");
  CalibrationConstants k;
  for (int c = 0; c < 10; ++c) {
    if (!j.contains(kCategoryNames[c])) throw ValidationError(std::string("constants file: missing '") + kCategoryNames[c] + "'");
    k.c[c] = j.at(kCategoryNames[c]).get<double>();
    if (!(k.c[c] >= 0.0)) throw ValidationError("constants must be nonnegative");
  }
  return k;
}

json report_json(const CostReport& r) {
  json cat = json::object(), stage = json::object();
  for (int c = 0; c < kNumCategories; ++c) cat[kCategoryNames[c]] = r.by_category[c];
  for (std::size_t s = 0; s < kStageNames.size(); ++s) stage[kStageNames[s]] = r.by_stage[s];
  return {{"pqbx", r.orders.p_qbx}, {"pfmm", r.orders.p_fmm}, {"by_category", cat}, {"by_stage", stage}, {"total", r.total}};
}

std::vector<complex_t> load_density(const std::string& spec, const Discretization& d) {
  std::vector<complex_t> out(d.num_nodes());
  if (spec == "one") {
    std::fill(out.begin(), out.end(), 1.0);
  } else if (spec == "smooth") {
    for (std::size_t i = 0; i < out.size(); ++i) {
      const Point3& x = d.nodes[i];
      out[i] = 1.0 + x.x * x.y + 0.5 * x.z;
    }
  } else {
    std::ifstream in(spec);
    if (!in) throw ValidationError("--density: expected one, smooth or a readable JSON file, got '" + spec + "'");
    const json j = json::parse(in);
    if (!j.is_array() || j.size() != out.size()) throw ValidationError("--density file must hold one value per node");
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = j[i].is_array() ? complex_t(j[i].at(0).get<double>(), j[i].at(1).get<double>()) : complex_t(j[i].get<double>());
  }
  return out;
}

std::vector<Point3> load_points(const std::string& path, const char* what) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw ValidationError(std::string("cannot open ") + what + " file: " + path);
  const json j = json::parse(in);
  std::vector<Point3> out;
  for (const auto& e : j) out.push_back({e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>()});
  return out;
}

void emit(const json& j, const std::string& out) {
  const std::string text = j.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out);
  if (!f) throw ValidationError("cannot write output file: " + out);
  f << text;
}

Point3 parse_point(const std::string& s, const char* flag) {
  Point3 p;
  char c1 = 0, c2 = 0;
  std::istringstream is(s);
  if (!(is >> p.x >> c1 >> p.y >> c2 >> p.z) || c1 != ',' || c2 != ',') {
    throw ValidationError(std::string(flag) + " expects x,y,z");
  }
  return p;
}

template <class T>
std::vector<T> parse_list(const std::string& s, T (*conv)(const std::string&), const char* flag) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(conv(item));
  if (out.empty()) throw ValidationError(std::string(flag) + " must list at least one value");
  return out;
}

int parse_int(const std::string& s) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError("expected an integer, got '" + s + "'");
}

/// Deterministic exterior test points around the bounding box.
std::vector<Point3> exterior_test_points(const Discretization& d, int n) {
  Point3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (const auto& x : d.nodes)
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], x[k]);
      hi[k] = std::max(hi[k], x[k]);
    }
  const Point3 mid = 0.5 * (lo + hi);
  const double rad = 0.5 * norm(hi - lo);
  std::vector<Point3> pts;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n, r = std::sqrt(1.0 - z * z);
    const Point3 dir{r * std::cos(golden * i), r * std::sin(golden * i), z};
    pts.push_back(mid + rad * (1.5 + 0.5 * (i % 3)) * dir);
  }
  return pts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GIGAQBX fast multipole method with target-specific QBX"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: GIGAQBX_THREADS or 1)");
  std::string out;

  // geom
  auto* geom = app.add_subcommand("geom", "generate a discretized geometry");
  std::string shape = "sphere", geom_side = "exterior";
  int refine = 1, quad = 4, tdeg = 3, urchin_k = 2, copies = 1;
  double radius = 1.0, geom_alpha = 0.5;
  bool with_centers = false;
  geom->add_option("--shape", shape)->check(CLI::IsMember({"sphere", "urchin", "torus-grid"}));
  geom->add_option("--refine", refine, "uniform refinement level");
  geom->add_option("--quad", quad, "quadrature order per element");
  geom->add_option("--target-degree", tdeg, "degree of the per-element target lattice");
  geom->add_option("--urchin-k", urchin_k, "urchin harmonic degree");
  geom->add_option("--copies", copies, "torus grid copies parameter");
  geom->add_option("--radius", radius, "sphere radius");
  geom->add_flag("--centers", with_centers, "store QBX centers in the file");
  geom->add_option("--side", geom_side)->check(CLI::IsMember({"exterior", "interior"}));
  geom->add_option("--alpha", geom_alpha);
  geom->add_option("--out", out, "geometry file to write")->required();

  // eval / direct
  GeometryOptions eval_geo;
  EvalOptions eval_opt;
  std::string density = "one", extra_targets_path, extra_normals_path;
  auto* eval = app.add_subcommand("eval", "evaluate a layer potential at the QBX targets");
  auto* direct = app.add_subcommand("direct", "global QBX reference evaluation");
  for (auto* sc : {eval, direct}) {
    add_geometry_options(sc, eval_geo);
    add_eval_options(sc, eval_opt);
    sc->add_option("--density", density, "one, smooth, or a JSON file with one value per node");
    sc->add_option("--targets", extra_targets_path, "JSON file of extra off-surface targets [[x,y,z],...]");
    sc->add_option("--target-normals", extra_normals_path, "JSON file of normals for the extra targets");
    sc->add_option("--out", out);
  }

  // green
  GeometryOptions green_geo;
  EvalOptions green_opt;
  std::string charge;
  auto* green = app.add_subcommand("green", "Green's identity residual for a point-charge field");
  add_geometry_options(green, green_geo);
  add_eval_options(green, green_opt);
  green->add_option("--charge", charge, "charge location x,y,z (default chosen from the bounding box)");
  green->add_option("--out", out);

  // solve
  GeometryOptions solve_geo;
  EvalOptions solve_opt;
  std::string solve_charge = "0.1,0.2,-0.15";
  double tol = 1e-6;
  int max_iter = 300, restart = 30;
  auto* solve = app.add_subcommand("solve", "exterior Neumann solve with a manufactured point charge");
  add_geometry_options(solve, solve_geo);
  add_eval_options(solve, solve_opt, false);
  solve->add_option("--charge", solve_charge, "interior charge location x,y,z");
  solve->add_option("--tol", tol, "relative GMRES residual reduction");
  solve->add_option("--max-iter", max_iter);
  solve->add_option("--restart", restart);
  solve->add_option("--out", out);

  // count
  GeometryOptions count_geo;
  EvalOptions count_opt;
  std::string dump_tree;
  auto* count = app.add_subcommand("count", "tree, interaction list sizes and interaction counts");
  add_geometry_options(count, count_geo);
  add_eval_options(count, count_opt, false);
  count->add_option("--dump-tree", dump_tree, "write one line per box to this file");
  count->add_option("--out", out);

  // cost
  std::string counts_path, constants_path;
  int cost_pqbx = 5, cost_pfmm = 15;
  auto* cost = app.add_subcommand("cost", "modeled time from interaction counts");
  cost->add_option("--counts", counts_path, "output of `count` or `eval`")->required();
  cost->add_option("--constants", constants_path, "calibration constants JSON (default: reference values)");
  cost->add_option("--pqbx", cost_pqbx);
  cost->add_option("--pfmm", cost_pfmm);
  cost->add_option("--out", out);

  // fit
  std::vector<std::string> run_paths;
  auto* fit = app.add_subcommand("fit", "fit calibration constants to timed `eval` runs");
  fit->add_option("--runs", run_paths, "one or more `eval` output files")->required();
  fit->add_option("--out", out);

  // sweep
  GeometryOptions sweep_geo;
  EvalOptions sweep_opt;
  std::string nmax_grid = "8,16,32,64,128,256", nmpole_grid = "0,inf", csv, sweep_constants;
  auto* sweep = app.add_subcommand("sweep", "model cost over an (nmax, nmpole) grid");
  add_geometry_options(sweep, sweep_geo);
  add_eval_options(sweep, sweep_opt, false);
  sweep->add_option("--nmax-grid", nmax_grid, "comma-separated nmax values");
  sweep->add_option("--nmpole-grid", nmpole_grid, "comma-separated nmpole values (inf allowed)");
  sweep->add_option("--constants", sweep_constants);
  sweep->add_option("--csv", csv, "CSV grid output");
  sweep->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (threads > 0) set_num_threads(threads);

    if (*geom) {
      Discretization d;
      if (shape == "sphere") {
        d = make_sphere(radius, refine, quad, tdeg);
      } else if (shape == "urchin") {
        d = make_urchin(urchin_k, refine, quad, tdeg);
      } else {
        d = make_torus_grid(copies, refine, quad, tdeg);
      }
      std::ofstream f(out);
      if (!f) throw ValidationError("cannot write output file: " + out);
      if (with_centers) {
        const auto c = place_qbx_centers(d, geom_side == "exterior" ? Side::Exterior : Side::Interior, geom_alpha);
        write_geometry(f, d, &c);
      } else {
        write_geometry(f, d);
      }
      json j{{"name", d.name},           {"nodes", d.num_nodes()},   {"targets", d.num_targets()},
             {"elements", d.num_elements()}, {"area", d.area()},     {"file", out}};
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    if (*eval || *direct) {
      const auto g = load_geometry(eval_geo);
      if (*direct) eval_opt.mode = "direct";
      const auto p = make_params(eval_opt, *eval ? eval : direct);
      const auto dens = load_density(density, g.disc);
      const auto extra = load_points(extra_targets_path, "targets");
      const auto extra_n = load_points(extra_normals_path, "target normals");
      const Evaluator ev(g.disc, *g.centers, extra, p, extra_n);
      const auto r = ev.apply(dens);
      json j;
      j["params"] = params_json(p);
      j["num_sources"] = g.disc.num_nodes();
      j["num_centers"] = g.centers->size();
      j["target_index"] = g.centers->target_index;
      j["values"] = complex_array(r.qbx_values);
      j["conventional_values"] = complex_array(r.conventional_values);
      if (p.mode != EvalMode::DirectReference) {
        j["counts"] = counts_json(r.counts);
        j["num_boxes"] = ev.tree().size();
        j["modeled_seconds"] = modeled_time(r.counts, p.orders, CalibrationConstants::reference()).total;
      }
      j["timings"] = timings_json(r.stage_timings);
      emit(j, out);
      return 0;
    }

    if (*green) {
      const auto g = load_geometry(green_geo);
      const auto p = make_params(green_opt, green);
      const auto field = g.centers->side == Side::Interior ? TestField::PointChargeOutside : TestField::PointChargeInside;
      std::optional<Point3> x0;
      if (!charge.empty()) x0 = parse_point(charge, "--charge");
      const auto r = greens_identity_residual(g.disc, *g.centers, p, field, x0);
      json j;
      j["params"] = params_json(p);
      j["side"] = g.centers->side == Side::Exterior ? "exterior" : "interior";
      j["charge"] = point_json(r.charge);
      j["residual"] = r.residual;
      j["max_u"] = r.max_u;
      j["timings"] = timings_json(r.stage_timings);
      emit(j, out);
      return 0;
    }

    if (*solve) {
      const auto g = load_geometry(solve_geo);
      const auto p = make_params(solve_opt, solve);
      const Point3 x0 = parse_point(solve_charge, "--charge");
      const auto dn = KernelSpec::laplace(Variant::TargetNormalDeriv);
      std::vector<complex_t> rhs(g.disc.num_targets());
      for (std::size_t i = 0; i < rhs.size(); ++i)
        rhs[i] = kernel_value(dn, g.disc.targets[i], g.disc.target_normals[i], x0, std::nullopt);
      const auto sol = solve_exterior_neumann(g.disc, *g.centers, p, rhs, tol, restart, max_iter);
      const auto pts = exterior_test_points(g.disc, 24);
      const auto u = single_layer_off_surface(g.disc, sol.density_nodes, pts);
      double err = 0.0, umax = 0.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto exact = kernel_value(KernelSpec::laplace(), pts[i], std::nullopt, x0, std::nullopt);
        err = std::max(err, std::abs(u[i] - exact));
        umax = std::max(umax, std::abs(exact));
      }
      json j;
      j["params"] = params_json(p);
      j["charge"] = point_json(x0);
      j["iterations"] = sol.iterations;
      j["residual_history"] = sol.residual_history;
      j["num_test_points"] = pts.size();
      j["relative_error"] = err / umax;
      j["timings"] = timings_json(sol.stage_timings);
      emit(j, out);
      return 0;
    }

    if (*count) {
      const auto g = load_geometry(count_geo);
      const auto p = make_params(count_opt, count);
      if (p.mode == EvalMode::DirectReference) throw ValidationError("count: --mode must be base or ts");
      const double t0 = process_seconds();
      const Octree tree = build_tree(g.disc, *g.centers, {}, p.tree);
      const double t1 = process_seconds();
      const auto lists = compute_lists(tree, p.nmpole);
      const double t2 = process_seconds();
      if (!dump_tree.empty()) {
        std::ofstream f(dump_tree);
        if (!f) throw ValidationError("cannot write tree dump: " + dump_tree);
        write_tree(f, tree);
      }
      json j;
      j["params"] = params_json(p);
      j["num_boxes"] = tree.size();
      j["max_level"] = tree.max_level;
      j["num_sources"] = g.disc.num_nodes();
      j["num_centers"] = g.centers->size();
      const std::pair<const char*, const BoxLists*> named[] = {
          {"list1", &lists.list1},           {"list2", &lists.list2},           {"list3", &lists.list3},
          {"list3close", &lists.list3close}, {"list3far", &lists.list3far},     {"list4", &lists.list4},
          {"list4close", &lists.list4close}, {"list4far", &lists.list4far}};
      for (const auto& [name, list] : named) j[std::string(name) + "_pairs"] = list->total();
      j["counts"] = counts_json(count_interactions(tree, lists, p.mode));
      j["mc"] = mc_statistic(g.centers->centers, g.centers->radii, g.disc.nodes, p.tree.t_f);
      j["partition_ok"] = verify_partition(tree, lists).ok();
      j["timings"] = {{"tree", t1 - t0}, {"lists", t2 - t1}};
      emit(j, out);
      return 0;
    }

    if (*cost) {
      std::ifstream in(counts_path);
      if (!in) throw ValidationError("cannot open counts file: " + counts_path);
      const json cj = json::parse(in);
      if (!cj.contains("counts")) throw ValidationError("counts file has no 'counts' object");
      ExpansionOrders o{cost_pqbx, cost_pfmm};
      if (cj.contains("params")) {
        if (!cost->count("--pqbx")) o.p_qbx = cj["params"].value("pqbx", o.p_qbx);
        if (!cost->count("--pfmm")) o.p_fmm = cj["params"].value("pfmm", o.p_fmm);
      }
      const auto k = constants_from_file(constants_path);
      const auto rep = modeled_time(counts_from_json(cj.at("counts")), o, k);
      json j;
      j["report"] = report_json(rep);
      j["constants"] = constants_json(k);
      j["direct_speedup_ratio"] = direct_speedup_ratio(k, o.p_qbx);
      j["nmpole_optimum"] = nmpole_optimum(k, o);
      emit(j, out);
      return 0;
    }

    if (*fit) {
      std::vector<TimedRun> runs;
      for (const auto& path : run_paths) {
        std::ifstream in(path);
        if (!in) throw ValidationError("cannot open run file: " + path);
        const json rj = json::parse(in);
        if (!rj.contains("counts") || !rj.contains("timings") || !rj.contains("params")) {
          throw ValidationError("run file " + path + " lacks counts, timings or params (use `eval` in base or ts mode)");
        }
        TimedRun run;
        run.counts = counts_from_json(rj.at("counts"));
        run.orders = {rj["params"].at("pqbx").get<int>(), rj["params"].at("pfmm").get<int>()};
        for (const auto& [name, v] : rj.at("timings").items()) run.stage_seconds[name] = v.get<double>();
        runs.push_back(run);
      }
      const auto res = fit_constants(runs);
      double measured = 0.0, modeled = 0.0;
      for (const auto& r : runs) {
        for (const char* s : kStageNames) measured += r.stage_seconds.count(s) ? r.stage_seconds.at(s) : 0.0;
        modeled += modeled_time(r.counts, r.orders, res.constants).total;
      }
      json j;
      j["constants"] = constants_json(res.constants);
      j["unused"] = res.unused;
      j["relative_residual"] = res.relative_residual;
      j["num_runs"] = runs.size();
      j["measured_seconds"] = measured;
      j["modeled_seconds"] = modeled;
      emit(j, out);
      return 0;
    }

    if (*sweep) {
      const auto g = load_geometry(sweep_geo);
      const auto p = make_params(sweep_opt, sweep);
      if (p.mode == EvalMode::DirectReference) throw ValidationError("sweep: --mode must be base or ts");
      const auto nmaxes = parse_list<int>(nmax_grid, parse_int, "--nmax-grid");
      const auto nmpoles = parse_list<std::size_t>(nmpole_grid, parse_nmpole, "--nmpole-grid");
      const auto k = constants_from_file(sweep_constants);
      const auto sw = balance_sweep(g.disc.nodes, g.centers->centers, g.centers->radii, nmaxes, nmpoles, p.tree.t_f,
                                    p.mode, p.orders, k);
      if (!csv.empty()) {
        std::ofstream f(csv);
        if (!f) throw ValidationError("cannot write CSV file: " + csv);
        write_sweep_csv(f, sw);
      }
      json pts = json::array();
      for (const auto& pt : sw.points)
        pts.push_back({{"nmax", pt.nmax},
                       {"nmpole", pt.nmpole == kNoMultipoles ? json("inf") : json(pt.nmpole)},
                       {"total", pt.report.total}});
      json j;
      j["params"] = params_json(p);
      j["points"] = pts;
      const auto& best = sw.points[sw.best];
      j["best"] = {{"nmax", best.nmax},
                   {"nmpole", best.nmpole == kNoMultipoles ? json("inf") : json(best.nmpole)},
                   {"report", report_json(best.report)}};
      emit(j, out);
      return 0;
    }
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed JSON input: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
