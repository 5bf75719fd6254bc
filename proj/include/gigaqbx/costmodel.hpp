#pragma once

// Flop-level cost model: interaction counting, modeled process time,
// calibration fitting, the M_C statistic and the nmpole optimum.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <ostream>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gigaqbx/ilists.hpp"
#include "gigaqbx/tree.hpp"

namespace gigaqbx {

enum class EvalMode { Baseline, TargetSpecific, DirectReference };

inline const char* mode_name(EvalMode m) {
  switch (m) {
    case EvalMode::Baseline: return "base";
    case EvalMode::TargetSpecific: return "ts";
    case EvalMode::DirectReference: return "direct";
  }
  return "?";
}

struct ExpansionOrders {
  int p_qbx = 5;
  int p_fmm = 15;
  void validate() const {
    if (p_qbx < 0 || p_fmm < 0) throw ValidationError("expansion orders must be nonnegative");
    if (p_qbx > 60 || p_fmm > 60) throw ValidationError("expansion orders above 60 are not supported");
  }
};

// Interaction categories. The last three have no row in the published model
// and are charged at borrowed rates (see `modeled_time`).
enum Category : int {
  kP2L = 0,
  kP2M,
  kP2QBXL,
  kTS,
  kL2L,
  kL2QBXL,
  kM2L,
  kM2M,
  kM2QBXL,
  kQBXL2P,
  kM2P,
  kP2P,
  kL2P,
  kNumCategories
};

inline constexpr std::array<const char*, kNumCategories> kCategoryNames{
    "p2l", "p2m", "p2qbxl", "ts", "l2l", "l2qbxl", "m2l", "m2m", "m2qbxl", "qbxl2p", "m2p", "p2p", "l2p"};

// Algorithm stages that carry modeled work, in execution order.
inline constexpr std::array<const char*, 10> kStageNames{"form_multipoles", "list1",     "m2l",      "list3close",
                                                         "list3far",        "list4close", "list4far", "l2l",
                                                         "l2qbxl",          "eval"};

struct InteractionCounts {
  // counts[stage][category]
  std::array<std::array<std::uint64_t, kNumCategories>, kStageNames.size()> by_stage{};

  std::uint64_t total(Category c) const {
    std::uint64_t s = 0;
    for (const auto& row : by_stage) s += row[c];
    return s;
  }
  bool operator==(const InteractionCounts&) const = default;
};

inline int stage_index(const std::string& name) {
  for (std::size_t i = 0; i < kStageNames.size(); ++i)
    if (name == kStageNames[i]) return static_cast<int>(i);
  throw ValidationError("unknown stage name: " + name);
}

/// Exact interaction counts of the FMM stages for `mode` (Baseline or
/// TargetSpecific). Direct-stage QBX work is counted per (source, center)
/// pair; conventional targets are counted as point-to-point pairs.
inline InteractionCounts count_interactions(const Octree& tree, const InteractionLists& il, EvalMode mode) {
  if (mode == EvalMode::DirectReference) throw ValidationError("count_interactions: DirectReference has no FMM stages");
  InteractionCounts c;
  auto& S = c.by_stage;
  const Category direct = mode == EvalMode::Baseline ? kP2QBXL : kTS;
  const int nb = static_cast<int>(tree.size());
  for (int b = 0; b < nb; ++b) {
    const Box& box = tree[b];
    if (!box.subtree_sources.empty()) {
      S[0][kP2M] += box.sources.size();
      if (box.parent >= 0) S[0][kM2M] += 1;
    }
    if (!il.needs_local(b)) continue;
    S[2][kM2L] += il.list2[b].size();
    for (int d : il.list4far[b]) S[6][kP2L] += tree[d].sources.size();
    if (box.parent >= 0) S[7][kL2L] += 1;

    const std::uint64_t nc = box.centers.size(), nt = box.targets.size();
    if (nc + nt == 0) continue;
    auto sources_in = [&](std::span<const int> boxes) {
      std::uint64_t s = 0;
      for (int d : boxes) s += tree[d].sources.size();
      return s;
    };
    const std::uint64_t s1 = sources_in(il.list1[b]), s3 = sources_in(il.list3close[b]),
                        s4 = sources_in(il.list4close[b]);
    S[1][direct] += nc * s1;
    S[3][direct] += nc * s3;
    S[5][direct] += nc * s4;
    S[1][kP2P] += nt * s1;
    S[3][kP2P] += nt * s3;
    S[5][kP2P] += nt * s4;
    S[4][kM2QBXL] += nc * il.list3far[b].size();
    S[4][kM2P] += nt * il.list3far[b].size();
    S[8][kL2QBXL] += nc;
    S[9][kQBXL2P] += nc;
    S[9][kL2P] += nt;
  }
  return c;
}

struct CalibrationConstants {
  // seconds per modeled flop, indexed by the ten published categories
  std::array<double, 10> c{};

  double& operator[](Category k) { return c[k]; }
  double operator[](Category k) const { return c[k]; }

  /// Values fitted for (p_qbx, p_fmm) = (5, 15) in the reference study.
  static CalibrationConstants reference() {
    CalibrationConstants k;
    k.c = {1.10e-08, 1.24e-08, 1.42e-08, 9.45e-09, 5.94e-09, 4.72e-09, 3.24e-09, 5.35e-09, 3.37e-09, 6.74e-07};
    return k;
  }
};

namespace detail {

/// Modeled flops per interaction and the constant that prices them.
inline std::pair<double, Category> flops_per_interaction(Category cat, const ExpansionOrders& o) {
  const double nq = (1.0 + o.p_qbx) * (1.0 + o.p_qbx), nf = (1.0 + o.p_fmm) * (1.0 + o.p_fmm);
  const double sq = 1.0 + o.p_qbx, sf = 1.0 + o.p_fmm;
  const double hetero = nf * sf + sf * nq + nq * sq;
  switch (cat) {
    case kP2L: return {nf, kP2L};
    case kP2M: return {nf, kP2M};
    case kP2QBXL: return {nq, kP2QBXL};
    case kTS: return {sq, kTS};
    case kL2L: return {3.0 * nf * sf, kL2L};
    case kL2QBXL: return {hetero, kL2QBXL};
    case kM2L: return {3.0 * nf * sf, kM2L};
    case kM2M: return {3.0 * nf * sf, kM2M};
    case kM2QBXL: return {hetero, kM2QBXL};
    case kQBXL2P: return {nq, kQBXL2P};
    // extensions: multipole and local evaluation at conventional targets
    // behave like expansion formation at FMM order; a point-to-point pair is
    // one target-specific term
    case kM2P: return {nf, kP2L};
    case kP2P: return {1.0, kTS};
    case kL2P: return {nf, kQBXL2P};
    default: break;
  }
  throw ValidationError("unknown cost category");
}

}  // namespace detail

struct CostReport {
  ExpansionOrders orders;
  double n_qbx = 0.0, n_fmm = 0.0;
  std::array<double, kNumCategories> by_category{};
  std::array<double, kStageNames.size()> by_stage{};
  double total = 0.0;
};

inline CostReport modeled_time(const InteractionCounts& counts, const ExpansionOrders& orders,
                               const CalibrationConstants& k) {
  orders.validate();
  CostReport r;
  r.orders = orders;
  r.n_qbx = (1.0 + orders.p_qbx) * (1.0 + orders.p_qbx);
  r.n_fmm = (1.0 + orders.p_fmm) * (1.0 + orders.p_fmm);
  for (std::size_t s = 0; s < kStageNames.size(); ++s) {
    for (int cat = 0; cat < kNumCategories; ++cat) {
      const auto n = counts.by_stage[s][cat];
      if (n == 0) continue;
      const auto [flops, constant] = detail::flops_per_interaction(static_cast<Category>(cat), orders);
      const double t = static_cast<double>(n) * flops * k[constant];
      r.by_category[cat] += t;
      r.by_stage[s] += t;
    }
  }
  r.total = std::accumulate(r.by_category.begin(), r.by_category.end(), 0.0);
  return r;
}

/// Direct-stage cost ratio Baseline/TargetSpecific per (source, center) pair.
inline double direct_speedup_ratio(const CalibrationConstants& k, int p_qbx) {
  return k[kP2QBXL] * (1.0 + p_qbx) * (1.0 + p_qbx) / (k[kTS] * (1.0 + p_qbx));
}

/// Source count at which a List 3 far box costs the same through its
/// multipole as through target-specific direct evaluation.
inline double nmpole_optimum(const CalibrationConstants& k, const ExpansionOrders& o) {
  if (!(k[kTS] > 0.0)) throw ValidationError("nmpole_optimum: c_ts must be positive");
  const double q = 1.0 + o.p_qbx, f = 1.0 + o.p_fmm;
  return k[kM2QBXL] / k[kTS] * (f * f * f + q * q * f + q * q * q) / q;
}

// ---------------------------------------------------------------------------
// Calibration

struct TimedRun {
  InteractionCounts counts;
  ExpansionOrders orders;
  std::map<std::string, double> stage_seconds;  // keyed by kStageNames
};

struct FitResult {
  CalibrationConstants constants;
  std::vector<std::string> unused;  // constants with no modeled work in any run
  double relative_residual = 0.0;   // ||A c - t|| / ||t||
  std::vector<double> stage_residuals;
};

/// Lawson-Hanson nonnegative least squares: min ||A x - b||, x >= 0.
inline Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int max_iter = 0) {
  const int n = static_cast<int>(A.cols());
  if (max_iter <= 0) max_iter = 30 * (n + 1);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<char> passive(n, 0);
  const double tol = 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()) * std::max(1.0, b.cwiseAbs().maxCoeff());
  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<int> idx;
    for (int j = 0; j < n; ++j)
      if (passive[j]) idx.push_back(j);
    z.setZero(n);
    if (idx.empty()) return;
    Eigen::MatrixXd Ap(A.rows(), idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) Ap.col(static_cast<int>(j)) = A.col(idx[j]);
    const Eigen::VectorXd zp = Ap.colPivHouseholderQr().solve(b);
    for (std::size_t j = 0; j < idx.size(); ++j) z[idx[j]] = zp[static_cast<int>(j)];
  };
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd w = A.transpose() * (b - A * x);
    int jmax = -1;
    double wmax = tol;
    for (int j = 0; j < n; ++j)
      if (!passive[j] && w[j] > wmax) wmax = w[j], jmax = j;
    if (jmax < 0) break;
    passive[jmax] = 1;
    for (int inner = 0; inner < max_iter; ++inner) {
      Eigen::VectorXd z;
      solve_passive(z);
      bool feasible = true;
      for (int j = 0; j < n; ++j)
        if (passive[j] && z[j] <= 0.0) feasible = false;
      if (feasible) {
        x = z;
        break;
      }
      double alpha = 1.0;
      for (int j = 0; j < n; ++j)
        if (passive[j] && z[j] <= 0.0) alpha = std::min(alpha, x[j] / (x[j] - z[j]));
      x += alpha * (z - x);
      for (int j = 0; j < n; ++j)
        if (passive[j] && x[j] <= 1e-15 * std::max(1.0, x.cwiseAbs().maxCoeff())) {
          passive[j] = 0;
          x[j] = 0.0;
        }
    }
  }
  return x;
}

/// Fits calibration constants to per-stage timings of several runs. Each
/// (run, stage) pair contributes one equation. Constants without modeled work
/// are reported in `unused` and left at zero.
inline FitResult fit_constants(std::span<const TimedRun> runs) {
  if (runs.empty()) throw ValidationError("fit_constants: no runs given");
  constexpr int nc = 10;
  std::vector<std::array<double, nc>> rows;
  std::vector<double> rhs;
  for (const auto& run : runs) {
    for (std::size_t s = 0; s < kStageNames.size(); ++s) {
      std::array<double, nc> row{};
      for (int cat = 0; cat < kNumCategories; ++cat) {
        const auto n = run.counts.by_stage[s][cat];
        if (n == 0) continue;
        const auto [flops, constant] = detail::flops_per_interaction(static_cast<Category>(cat), run.orders);
        row[constant] += static_cast<double>(n) * flops;
      }
      const auto it = run.stage_seconds.find(kStageNames[s]);
      const double t = it == run.stage_seconds.end() ? 0.0 : it->second;
      if (!(t >= 0.0)) throw ValidationError("fit_constants: stage timings must be nonnegative");
      rows.push_back(row);
      rhs.push_back(t);
    }
  }
  FitResult res;
  std::vector<int> used;
  for (int j = 0; j < nc; ++j) {
    bool any = false;
    for (const auto& r : rows) any = any || r[j] != 0.0;
    if (any) {
      used.push_back(j);
    } else {
      res.unused.push_back(kCategoryNames[j]);
    }
  }
  if (used.empty()) throw ValidationError("fit_constants: runs contain no modeled work");
  const int m = static_cast<int>(rows.size()), n = static_cast<int>(used.size());
  Eigen::MatrixXd A(m, n);
  Eigen::VectorXd b(m);
  Eigen::VectorXd scale(n);
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s = std::max(s, rows[i][used[j]]);
    scale[j] = s;
    for (int i = 0; i < m; ++i) A(i, j) = rows[i][used[j]] / s;
  }
  for (int i = 0; i < m; ++i) b[i] = rhs[i];
  // identifiability: each constant needs its own direction in the design
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  if (qr.rank() < n) {
    std::string names;
    const Eigen::MatrixXd K = Eigen::FullPivLU<Eigen::MatrixXd>(A).kernel();
    for (int j = 0; j < n; ++j)
      if (K.row(j).cwiseAbs().maxCoeff() > 1e-8) names += std::string(names.empty() ? "" : ", ") + kCategoryNames[used[j]];
    throw ValidationError("fit_constants: design matrix is rank deficient; unidentifiable constants: " + names);
  }
  const Eigen::VectorXd x = nnls(A, b);
  for (int j = 0; j < n; ++j) res.constants.c[used[j]] = x[j] / scale[j];
  const Eigen::VectorXd r = A * x - b;
  res.relative_residual = b.norm() > 0 ? r.norm() / b.norm() : r.norm();
  res.stage_residuals.assign(r.data(), r.data() + r.size());
  return res;
}

// ---------------------------------------------------------------------------
// M_C statistic

/// Average number of sources inside the l-infinity ball of radius
/// 4 sqrt(3) r_c / t_f around each center.
inline double mc_statistic(std::span<const Point3> centers, std::span<const double> radii,
                           std::span<const Point3> sources, double t_f) {
  if (!(t_f > 0.0)) throw ValidationError("mc_statistic: t_f must be positive");
  if (radii.size() != centers.size()) throw ValidationError("mc_statistic: centers/radii length mismatch");
  if (centers.empty()) return 0.0;
  std::vector<Point3> sorted(sources.begin(), sources.end());
  std::sort(sorted.begin(), sorted.end(), [](const Point3& a, const Point3& b) { return a.x < b.x; });
  std::vector<double> xs(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) xs[i] = sorted[i].x;
  std::uint64_t total = 0;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double h = 4.0 * std::sqrt(3.0) * radii[c] / t_f;
    const Point3& x = centers[c];
    auto lo = std::lower_bound(xs.begin(), xs.end(), x.x - h);
    auto hi = std::upper_bound(xs.begin(), xs.end(), x.x + h);
    for (auto it = lo; it != hi; ++it) {
      const Point3& s = sorted[static_cast<std::size_t>(it - xs.begin())];
      if (std::fabs(s.y - x.y) <= h && std::fabs(s.z - x.z) <= h) ++total;
    }
  }
  return static_cast<double>(total) / static_cast<double>(centers.size());
}

// ---------------------------------------------------------------------------
// Parameter sweeps

struct SweepPoint {
  int nmax = 0;
  std::size_t nmpole = 0;
  CostReport report;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::size_t best = 0;  // index of the smallest modeled total
};

/// Rebuilds tree and lists for every (nmax, nmpole) pair and models the cost
/// of one evaluation. Points are ordered nmax-major.
inline SweepResult balance_sweep(std::span<const Point3> sources, std::span<const Point3> centers,
                                 std::span<const double> radii, std::span<const int> nmax_grid,
                                 std::span<const std::size_t> nmpole_grid, double t_f, EvalMode mode,
                                 const ExpansionOrders& orders, const CalibrationConstants& constants) {
  if (nmax_grid.empty() || nmpole_grid.empty()) throw ValidationError("balance_sweep: empty parameter grid");
  SweepResult res;
  for (int nmax : nmax_grid) {
    const Octree tree = build_tree(sources, centers, radii, {}, TreeParams{.nmax = nmax, .t_f = t_f});
    for (std::size_t nmpole : nmpole_grid) {
      const auto lists = compute_lists(tree, nmpole);
      res.points.push_back({nmax, nmpole, modeled_time(count_interactions(tree, lists, mode), orders, constants)});
    }
  }
  for (std::size_t i = 1; i < res.points.size(); ++i)
    if (res.points[i].report.total < res.points[res.best].report.total) res.best = i;
  return res;
}

/// CSV grid: nmax, nmpole, modeled seconds per category, total.
inline void write_sweep_csv(std::ostream& os, const SweepResult& sweep) {
  os << "nmax,nmpole";
  for (const char* name : kCategoryNames) os << ',' << name;
  os << ",total\n";
  char buf[64];
  for (const auto& pt : sweep.points) {
    os << pt.nmax << ',';
    if (pt.nmpole == kNoMultipoles) {
      os << "inf";
    } else {
      os << pt.nmpole;
    }
    for (double v : pt.report.by_category) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g\n", pt.report.total);
    os << buf;
  }
}

}  // namespace gigaqbx
