#pragma once

// GIGAQBX evaluation pipeline, the global-QBX reference evaluator, Green's
// identity check and an exterior Neumann solve.
//
// Each QBX center c owned by box b accumulates three parts:
//   near: sources in List 1, List 3 close and List 4 close of b
//   W:    multipoles of List 3 far boxes of b, translated to c
//   far:  the box local expansion of b (List 2 and List 4 far of b and its
//         ancestors), translated to c
// and its potential is (near + W) + far. In Baseline mode the near part is
// a spherical-harmonic QBX local formed from the sources; in TargetSpecific
// mode it is accumulated pair by pair with target-specific expansions.

#include <time.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gigaqbx/costmodel.hpp"
#include "gigaqbx/expansion.hpp"
#include "gigaqbx/geometry.hpp"
#include "gigaqbx/ilists.hpp"
#include "gigaqbx/kernels.hpp"
#include "gigaqbx/parallel.hpp"
#include "gigaqbx/tree.hpp"
#include "gigaqbx/tsqbx.hpp"

namespace gigaqbx {

struct EvalParams {
  ExpansionOrders orders;
  TreeParams tree;
  std::size_t nmpole = 0;
  EvalMode mode = EvalMode::TargetSpecific;
  KernelSpec spec = KernelSpec::laplace();

  void validate() const {
    orders.validate();
    tree.validate();
    spec.validate();
    if (spec.equation == Equation::Helmholtz && mode != EvalMode::DirectReference) {
      throw ValidationError("Helmholtz evaluation is only supported in DirectReference mode");
    }
  }
};

struct PotentialResult {
  // per QBX center (which serves on-surface target centers.target_index[i])
  std::vector<complex_t> qbx_values, qbx_near, qbx_w, qbx_far;
  // per conventional target
  std::vector<complex_t> conventional_values, conventional_near, conventional_w, conventional_far;
  std::map<std::string, double> stage_timings;  // process CPU seconds
  InteractionCounts counts;                     // work actually performed
};

/// Process CPU time in seconds (summed over threads).
inline double process_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_PROCESS_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

/// Tree, lists and geometry for repeated evaluation with different
/// densities or kernel variants.
class Evaluator {
 public:
  Evaluator(const Discretization& disc, const QbxCenterSet& centers, std::span<const Point3> extra_targets,
            const EvalParams& params, std::span<const Point3> extra_target_normals = {})
      : params_(params) {
    params.validate();
    if (centers.radii.size() != centers.size() || centers.target_index.size() != centers.size()) {
      throw ValidationError("evaluate: inconsistent center arrays");
    }
    if (!extra_target_normals.empty() && extra_target_normals.size() != extra_targets.size()) {
      throw ValidationError("evaluate: extra target normals length mismatch");
    }
    if (disc.normals.size() != disc.nodes.size() || disc.weights.size() != disc.nodes.size()) {
      throw ValidationError("evaluate: inconsistent discretization arrays");
    }
    node_weights_ = disc.weights;
    centers_ = centers.centers;
    for (std::size_t i = 0; i < centers.size(); ++i) {
      const int t = centers.target_index[i];
      if (t < 0 || static_cast<std::size_t>(t) >= disc.num_targets()) {
        throw ValidationError("evaluate: center target index out of range");
      }
      qbx_targets_.push_back(disc.targets[t]);
      qbx_target_normals_.push_back(disc.target_normals[t]);
    }
    conv_targets_.assign(extra_targets.begin(), extra_targets.end());
    conv_normals_.assign(extra_target_normals.begin(), extra_target_normals.end());

    const double t0 = process_seconds();
    if (params.mode != EvalMode::DirectReference) {
      tree_ = build_tree(disc.nodes, centers.centers, centers.radii, extra_targets, params.tree);
      const double t1 = process_seconds();
      lists_ = compute_lists(tree_, params.nmpole);
      setup_timings_["tree"] = t1 - t0;
      setup_timings_["lists"] = process_seconds() - t1;
      order_ = tree_.source_order;
    } else {
      order_.resize(disc.num_nodes());
      for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    }
    src_.resize(order_.size());
    src_normals_.resize(order_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) {
      src_[i] = disc.nodes[order_[i]];
      src_normals_[i] = disc.normals[order_[i]];
    }
  }

  const Octree& tree() const { return tree_; }
  const InteractionLists& lists() const { return lists_; }
  const EvalParams& params() const { return params_; }
  const std::map<std::string, double>& setup_timings() const { return setup_timings_; }

  PotentialResult apply(std::span<const complex_t> density) const { return apply(density, params_.spec); }

  /// Evaluates with `spec` in place of the configured kernel (same geometry).
  PotentialResult apply(std::span<const complex_t> density, const KernelSpec& spec) const {
    EvalParams p = params_;
    p.spec = spec;
    p.validate();
    if (density.size() != node_weights_.size()) throw ValidationError("evaluate: density length must equal node count");
    if (spec.needs_target_normal() && conv_normals_.size() != conv_targets_.size()) {
      throw ValidationError("evaluate: target normals required for conventional targets");
    }
    std::vector<complex_t> w(order_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) w[i] = density[order_[i]] * node_weights_[order_[i]];
    PotentialResult res;
    res.stage_timings = setup_timings_;
    if (p.mode == EvalMode::DirectReference) {
      direct_reference(spec, w, res);
    } else {
      fmm(spec, w, res);
    }
    return res;
  }

 private:
  EvalParams params_;
  Octree tree_;
  InteractionLists lists_;
  std::map<std::string, double> setup_timings_;
  std::vector<int> order_;  // storage position -> node index
  std::vector<Point3> src_, src_normals_;
  std::vector<double> node_weights_;
  std::vector<Point3> centers_, qbx_targets_, qbx_target_normals_;
  std::vector<Point3> conv_targets_, conv_normals_;

  Point3 conv_normal(std::size_t i) const { return conv_normals_.empty() ? Point3{} : conv_normals_[i]; }

  /// Rejects sources at the center or inside the QBX ball.
  void check_pair(std::size_t center, std::size_t pos) const {
    const double R = norm(src_[pos] - centers_[center]);
    const double r = norm(qbx_targets_[center] - centers_[center]);
    if (R == 0.0) throw SingularPairError("source coincides with a QBX center", center, order_[pos]);
    if (r > R * (1.0 + 1e-12)) throw SingularPairError("source inside a QBX ball", center, order_[pos]);
  }

  void direct_reference(const KernelSpec& spec, const std::vector<complex_t>& w, PotentialResult& res) const {
    const double t0 = process_seconds();
    const bool dipole = spec.needs_source_normal();
    const int p = params_.orders.p_qbx;
    res.qbx_values.assign(centers_.size(), 0.0);
    parallel_for(centers_.size(), [&](std::size_t c) {
      TsWorkspace ws;
      complex_t acc = 0.0;
      for (std::size_t j = 0; j < src_.size(); ++j) {
        check_pair(c, j);
        acc += w[j] * detail::ts_pair(spec, p, src_[j], dipole ? src_normals_[j] : Point3{}, centers_[c],
                                      qbx_targets_[c], qbx_target_normals_[c], ws);
      }
      res.qbx_values[c] = acc;
    });
    res.qbx_near = res.qbx_values;
    res.qbx_w.assign(centers_.size(), 0.0);
    res.qbx_far.assign(centers_.size(), 0.0);
    res.conventional_values = direct_sum(spec, src_, w, src_normals_, conv_targets_, conv_normals_);
    res.conventional_near = res.conventional_values;
    res.conventional_w.assign(conv_targets_.size(), 0.0);
    res.conventional_far.assign(conv_targets_.size(), 0.0);
    res.stage_timings["direct"] = process_seconds() - t0;
  }

  void fmm(const KernelSpec& spec, const std::vector<complex_t>& w, PotentialResult& res) const {
    const Octree& T = tree_;
    const InteractionLists& IL = lists_;
    const int nb = static_cast<int>(T.size());
    const int pf = params_.orders.p_fmm, pq = params_.orders.p_qbx;
    const bool dipole = spec.needs_source_normal();
    const bool tderiv = spec.needs_target_normal();
    const bool ts_mode = params_.mode == EvalMode::TargetSpecific;
    const std::size_t nc = centers_.size(), nt = conv_targets_.size();
    auto& S = res.counts.by_stage;

    std::vector<int> level_start(T.max_level + 2, nb);
    for (int b = nb - 1; b >= 0; --b) level_start[T[b].level] = b;
    level_start[T.max_level + 1] = nb;
    std::vector<int> target_boxes, local_boxes;
    for (int b = 0; b < nb; ++b) {
      if (T.is_target_box(b)) target_boxes.push_back(b);
      if (IL.needs_local(b)) local_boxes.push_back(b);
    }
    auto timed = [&](const char* name, auto&& body) {
      const double t0 = process_seconds();
      body();
      res.stage_timings[name] = process_seconds() - t0;
    };

    // Stage 2: multipoles, leaves first, then children pulled level by level
    std::vector<CoefficientVector> M(nb);
    timed("form_multipoles", [&] {
      parallel_for(static_cast<std::size_t>(nb), [&](std::size_t ub) {
        const Box& box = T.boxes[ub];
        if (box.subtree_sources.empty()) return;
        M[ub] = CoefficientVector(pf, box.center, ExpansionKind::Multipole);
        specfun::HarmonicTable tab;
        for (int j = box.sources.begin; j < box.sources.end; ++j)
          p2m_accumulate(M[ub], src_[j], w[j], src_normals_[j], dipole, tab);
      });
      for (int lev = T.max_level - 1; lev >= 0; --lev) {
        const int lo = level_start[lev], hi = level_start[lev + 1];
        parallel_for(static_cast<std::size_t>(hi - lo), [&](std::size_t i) {
          const int b = lo + static_cast<int>(i);
          if (M[b].coeffs.empty()) return;
          for (int c : T[b].children)
            if (c >= 0 && !M[c].coeffs.empty()) M[b] += m2m(M[c], T[b].center, pf);
        });
      }
      for (int b = 0; b < nb; ++b) {
        if (T[b].subtree_sources.empty()) continue;
        S[0][kP2M] += T[b].sources.size();
        if (T[b].parent >= 0) S[0][kM2M] += 1;
      }
    });

    res.qbx_near.assign(nc, 0.0);
    res.qbx_w.assign(nc, 0.0);
    res.qbx_far.assign(nc, 0.0);
    res.conventional_near.assign(nt, 0.0);
    res.conventional_w.assign(nt, 0.0);
    res.conventional_far.assign(nt, 0.0);
    std::vector<CoefficientVector> near_exp;
    if (!ts_mode) {
      near_exp.resize(nc);
      for (std::size_t c = 0; c < nc; ++c) near_exp[c] = CoefficientVector(pq, centers_[c], ExpansionKind::Local);
    }

    // Stages 3, 5(a), 6(a): direct interactions from leaf lists
    auto direct_stage = [&](int stage, const BoxLists& list) {
      std::atomic<std::uint64_t> qbx_pairs{0}, point_pairs{0};
      parallel_for(target_boxes.size(), [&](std::size_t i) {
        const int b = target_boxes[i];
        const auto boxes = list[b];
        TsWorkspace ws;
        specfun::HarmonicTable tab;
        std::uint64_t nq = 0, np = 0;
        for (int c : T.owned_centers(b)) {
          complex_t acc = 0.0;
          for (int d : boxes) {
            for (int j = T[d].sources.begin; j < T[d].sources.end; ++j) {
              check_pair(c, j);
              if (ts_mode) {
                acc += w[j] * detail::ts_pair(spec, pq, src_[j], src_normals_[j], centers_[c], qbx_targets_[c],
                                              qbx_target_normals_[c], ws);
              } else {
                p2l_accumulate(near_exp[c], src_[j], w[j], src_normals_[j], dipole, tab);
              }
            }
            nq += T[d].sources.size();
          }
          res.qbx_near[c] += acc;
        }
        for (int t : T.owned_targets(b)) {
          complex_t acc = 0.0;
          for (int d : boxes) {
            for (int j = T[d].sources.begin; j < T[d].sources.end; ++j) {
              if (conv_targets_[t] == src_[j]) throw SingularPairError("target coincides with a source", t, order_[j]);
              acc += w[j] * detail::kernel_unchecked(spec, conv_targets_[t], conv_normal(t), src_[j], src_normals_[j]);
            }
            np += T[d].sources.size();
          }
          res.conventional_near[t] += acc;
        }
        qbx_pairs += nq;
        point_pairs += np;
      });
      S[stage][ts_mode ? kTS : kP2QBXL] += qbx_pairs.load();
      S[stage][kP2P] += point_pairs.load();
    };

    timed("list1", [&] { direct_stage(1, IL.list1); });

    // Stage 4: multipole-to-local from List 2
    std::vector<CoefficientVector> loc(nb);
    for (int b : local_boxes) loc[b] = CoefficientVector(pf, T[b].center, ExpansionKind::Local);
    timed("m2l", [&] {
      parallel_for(local_boxes.size(), [&](std::size_t i) {
        const int b = local_boxes[i];
        for (int d : IL.list2[b]) loc[b] += m2l(M[d], T[b].center, pf, pf);
      });
      for (int b : local_boxes) S[2][kM2L] += IL.list2[b].size();
    });

    timed("list3close", [&] { direct_stage(3, IL.list3close); });

    // Stage 5(b): List 3 far multipoles at centers and conventional targets
    std::vector<CoefficientVector> w_exp(nc);
    timed("list3far", [&] {
      parallel_for(target_boxes.size(), [&](std::size_t i) {
        const int b = target_boxes[i];
        specfun::HarmonicTable tab;
        for (int c : T.owned_centers(b)) {
          w_exp[c] = CoefficientVector(pq, centers_[c], ExpansionKind::Local);
          for (int d : IL.list3far[b]) w_exp[c] += m2qbxl(M[d], centers_[c], pf, pq);
        }
        for (int t : T.owned_targets(b)) {
          complex_t acc = 0.0;
          for (int d : IL.list3far[b]) acc += eval_multipole(M[d], conv_targets_[t], tderiv, conv_normal(t), tab);
          res.conventional_w[t] = acc;
        }
      });
      for (int b : target_boxes) {
        S[4][kM2QBXL] += T[b].centers.size() * IL.list3far[b].size();
        S[4][kM2P] += T[b].targets.size() * IL.list3far[b].size();
      }
    });

    timed("list4close", [&] { direct_stage(5, IL.list4close); });

    // Stage 6(b): List 4 far sources into box locals
    timed("list4far", [&] {
      parallel_for(local_boxes.size(), [&](std::size_t i) {
        const int b = local_boxes[i];
        specfun::HarmonicTable tab;
        for (int d : IL.list4far[b])
          for (int j = T[d].sources.begin; j < T[d].sources.end; ++j)
            p2l_accumulate(loc[b], src_[j], w[j], src_normals_[j], dipole, tab);
      });
      for (int b : local_boxes)
        for (int d : IL.list4far[b]) S[6][kP2L] += T[d].sources.size();
    });

    // Stage 7: downward pass, parents before children
    timed("l2l", [&] {
      for (int lev = 1; lev <= T.max_level; ++lev) {
        const int lo = level_start[lev], hi = level_start[lev + 1];
        parallel_for(static_cast<std::size_t>(hi - lo), [&](std::size_t i) {
          const int b = lo + static_cast<int>(i);
          if (!IL.needs_local(b)) return;
          loc[b] += l2l(loc[T[b].parent], T[b].center, pf);
        });
      }
      for (int b : local_boxes)
        if (T[b].parent >= 0) S[7][kL2L] += 1;
    });

    // Stage 8: box locals to QBX centers
    std::vector<CoefficientVector> far_exp(nc);
    timed("l2qbxl", [&] {
      parallel_for(target_boxes.size(), [&](std::size_t i) {
        const int b = target_boxes[i];
        for (int c : T.owned_centers(b)) far_exp[c] = l2qbxl(loc[b], centers_[c], pf, pq);
      });
      S[8][kL2QBXL] += nc;
    });

    // Stage 9: evaluate and sum
    timed("eval", [&] {
      parallel_for(target_boxes.size(), [&](std::size_t i) {
        const int b = target_boxes[i];
        specfun::HarmonicTable tab;
        for (int c : T.owned_centers(b)) {
          const Point3& t = qbx_targets_[c];
          const Point3& tn = qbx_target_normals_[c];
          if (!ts_mode) res.qbx_near[c] = eval_local(near_exp[c], t, tderiv, tn, tab);
          res.qbx_w[c] = eval_local(w_exp[c], t, tderiv, tn, tab);
          res.qbx_far[c] = eval_local(far_exp[c], t, tderiv, tn, tab);
        }
        for (int t : T.owned_targets(b))
          res.conventional_far[t] = eval_local(loc[b], conv_targets_[t], tderiv, conv_normal(t), tab);
      });
      S[9][kQBXL2P] += nc;
      S[9][kL2P] += nt;
    });

    res.qbx_values.resize(nc);
    for (std::size_t c = 0; c < nc; ++c) res.qbx_values[c] = (res.qbx_near[c] + res.qbx_w[c]) + res.qbx_far[c];
    res.conventional_values.resize(nt);
    for (std::size_t t = 0; t < nt; ++t) {
      res.conventional_values[t] = (res.conventional_near[t] + res.conventional_w[t]) + res.conventional_far[t];
    }
  }
};

/// One-shot evaluation of the layer potential with density given per node.
inline PotentialResult evaluate(const Discretization& disc, const QbxCenterSet& centers,
                                std::span<const complex_t> density, std::span<const Point3> extra_targets,
                                const EvalParams& params, std::span<const Point3> extra_target_normals = {}) {
  return Evaluator(disc, centers, extra_targets, params, extra_target_normals).apply(density);
}

/// Global QBX with every source formed into every center's expansion.
inline PotentialResult direct_reference(const Discretization& disc, const QbxCenterSet& centers,
                                        std::span<const complex_t> density, const EvalParams& params,
                                        std::span<const Point3> extra_targets = {},
                                        std::span<const Point3> extra_target_normals = {}) {
  EvalParams p = params;
  p.mode = EvalMode::DirectReference;
  return Evaluator(disc, centers, extra_targets, p, extra_target_normals).apply(density);
}

// ---------------------------------------------------------------------------
// Green's identity

enum class TestField { PointChargeOutside, PointChargeInside };

struct GreenResult {
  double residual = 0.0;  // max |S(du/dnu) - D(u) - sigma u| / max |u|
  double max_u = 0.0;
  Point3 charge;
  std::map<std::string, double> stage_timings;
};

inline Point3 default_charge_location(const Discretization& disc, TestField field) {
  Point3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (const auto& x : disc.nodes)
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], x[k]);
      hi[k] = std::max(hi[k], x[k]);
    }
  const Point3 mid = 0.5 * (lo + hi);
  const double rad = 0.5 * norm(hi - lo);
  if (field == TestField::PointChargeOutside) return mid + 1.5 * rad * Point3{0.6, 0.48, 0.64};
  // star-shaped surfaces around their box center
  return mid + 0.01 * rad * Point3{0.3, 0.2, -0.1};
}

/// Green's identity for the field u of a unit point charge on the opposite
/// side of the surface from the centers. With one-sided limits on the
/// evaluation side, S(du/dnu) - D(u) = u (interior) or -u (exterior).
inline GreenResult greens_identity_residual(const Discretization& disc, const QbxCenterSet& centers,
                                            const EvalParams& params, TestField field,
                                            std::optional<Point3> charge = std::nullopt) {
  const bool outside = field == TestField::PointChargeOutside;
  if (outside != (centers.side == Side::Interior)) {
    throw ValidationError("green: the test charge must sit on the side opposite the QBX centers");
  }
  const Point3 x0 = charge.value_or(default_charge_location(disc, field));
  KernelSpec sl = params.spec, dl = params.spec, dn = params.spec;
  sl.variant = Variant::SingleLayer;
  dl.variant = Variant::SourceNormalDeriv;
  dn.variant = Variant::TargetNormalDeriv;
  std::vector<complex_t> u(disc.num_nodes()), dudn(disc.num_nodes());
  for (std::size_t i = 0; i < disc.num_nodes(); ++i) {
    u[i] = kernel_value(sl, disc.nodes[i], std::nullopt, x0, std::nullopt);
    dudn[i] = kernel_value(dn, disc.nodes[i], disc.normals[i], x0, std::nullopt);
  }
  const Evaluator ev(disc, centers, {}, params);
  const auto s = ev.apply(dudn, sl);
  const auto d = ev.apply(u, dl);
  const double sigma = outside ? 1.0 : -1.0;
  GreenResult g;
  g.charge = x0;
  std::vector<complex_t> ut(centers.size());
  for (std::size_t i = 0; i < centers.size(); ++i) {
    ut[i] = kernel_value(sl, disc.targets[centers.target_index[i]], std::nullopt, x0, std::nullopt);
    g.max_u = std::max(g.max_u, std::abs(ut[i]));
  }
  for (std::size_t i = 0; i < centers.size(); ++i)
    g.residual = std::max(g.residual, std::abs(s.qbx_values[i] - d.qbx_values[i] - sigma * ut[i]));
  g.residual /= g.max_u;
  for (const auto& [k, v] : s.stage_timings) g.stage_timings[k] += v;
  for (const auto& [k, v] : d.stage_timings) g.stage_timings[k] += v;
  return g;
}

// ---------------------------------------------------------------------------
// Restarted GMRES and the exterior Neumann problem

struct GmresResult {
  Eigen::VectorXcd x;
  int iterations = 0;
  bool converged = false;
  std::vector<double> residual_history;  // relative residual norms
};

/// Restarted GMRES for A x = b from x = 0, stopping at ||r|| <= tol ||b||.
template <class Op>
GmresResult gmres(const Op& apply, const Eigen::VectorXcd& b, double tol, int restart, int max_iter) {
  const Eigen::Index n = b.size();
  GmresResult res;
  res.x = Eigen::VectorXcd::Zero(n);
  const double bnorm = b.norm();
  res.residual_history.push_back(bnorm > 0 ? 1.0 : 0.0);
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  while (res.iterations < max_iter) {
    const Eigen::VectorXcd r = b - apply(res.x);
    double beta = r.norm();
    if (beta <= tol * bnorm) {
      res.converged = true;
      break;
    }
    const int m = std::min(restart, max_iter - res.iterations);
    Eigen::MatrixXcd V(n, m + 1);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
    std::vector<complex_t> cs(m), sn(m);
    Eigen::VectorXcd g = Eigen::VectorXcd::Zero(m + 1);
    g[0] = beta;
    V.col(0) = r / beta;
    int k = 0;
    for (; k < m; ++k) {
      Eigen::VectorXcd v = apply(V.col(k));
      for (int i = 0; i <= k; ++i) {  // modified Gram-Schmidt
        H(i, k) = V.col(i).dot(v);
        v -= H(i, k) * V.col(i);
      }
      H(k + 1, k) = v.norm();
      if (std::abs(H(k + 1, k)) > 0.0) V.col(k + 1) = v / H(k + 1, k);
      // Givens rotations [c s; -conj(s) c] with real c
      for (int i = 0; i < k; ++i) {
        const complex_t t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
        H(i + 1, k) = -std::conj(sn[i]) * H(i, k) + cs[i] * H(i + 1, k);
        H(i, k) = t;
      }
      const double a = std::abs(H(k, k)), bb = std::abs(H(k + 1, k));
      const double rho = std::hypot(a, bb);
      if (a == 0.0) {
        cs[k] = 0.0;
        sn[k] = 1.0;
      } else {
        cs[k] = a / rho;
        sn[k] = (H(k, k) / a) * std::conj(H(k + 1, k)) / rho;
      }
      H(k, k) = cs[k] * H(k, k) + sn[k] * H(k + 1, k);
      H(k + 1, k) = 0.0;
      g[k + 1] = -std::conj(sn[k]) * g[k];
      g[k] = cs[k] * g[k];
      ++res.iterations;
      const double rel = std::abs(g[k + 1]) / bnorm;
      res.residual_history.push_back(rel);
      if (rel <= tol || bb == 0.0) {
        ++k;
        break;
      }
    }
    const Eigen::VectorXcd y =
        H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    res.x += V.leftCols(k) * y;
    if (res.residual_history.back() <= tol) {
      res.converged = (b - apply(res.x)).norm() <= 10 * tol * bnorm;
      if (res.converged) break;
    }
  }
  return res;
}

struct NeumannSolution {
  std::vector<complex_t> density_targets;  // unknowns at on-surface targets
  std::vector<complex_t> density_nodes;    // interpolated to quadrature nodes
  int iterations = 0;
  std::vector<double> residual_history;
  std::map<std::string, double> stage_timings;
};

/// Interpolates per-target values to quadrature nodes element by element.
inline std::vector<complex_t> targets_to_nodes(const Discretization& disc, std::span<const complex_t> at_targets) {
  if (!disc.has_layout()) throw ValidationError("interpolation needs the element layout of the discretization");
  if (at_targets.size() != disc.num_targets()) throw ValidationError("interpolation: wrong number of target values");
  const Eigen::MatrixXd P = target_to_node_interpolation(disc.target_degree, triangle_rule(disc.quad_order));
  const int nn = disc.nodes_per_element, nt = disc.targets_per_element;
  std::vector<complex_t> out(disc.num_nodes());
  for (std::size_t e = 0; e < disc.num_elements(); ++e) {
    Eigen::VectorXcd v(nt);
    for (int j = 0; j < nt; ++j) v[j] = at_targets[e * nt + j];
    const Eigen::VectorXcd r = P.cast<complex_t>() * v;
    for (int i = 0; i < nn; ++i) out[e * nn + i] = r[i];
  }
  return out;
}

/// Solves g = S'_ext mu (the exterior limit of the normal derivative of the
/// single layer, i.e. S' - 1/2 on the surface) for mu at the targets.
inline NeumannSolution solve_exterior_neumann(const Discretization& disc, const QbxCenterSet& centers,
                                              const EvalParams& params, std::span<const complex_t> g,
                                              double tol = 1e-6, int restart = 30, int max_iter = 300) {
  if (params.spec.equation != Equation::Laplace) throw ValidationError("solve: only the Laplace problem is supported");
  if (centers.side != Side::Exterior) throw ValidationError("solve: exterior QBX centers are required");
  if (g.size() != disc.num_targets()) throw ValidationError("solve: boundary data must be given at every target");
  std::vector<int> center_of(disc.num_targets(), -1);
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const int t = centers.target_index[i];
    if (t < 0 || static_cast<std::size_t>(t) >= disc.num_targets() || center_of[t] >= 0) {
      throw ValidationError("solve: centers must serve each target exactly once");
    }
    center_of[t] = static_cast<int>(i);
  }
  for (int c : center_of)
    if (c < 0) throw ValidationError("solve: centers must serve each target exactly once");
  EvalParams p = params;
  p.spec = KernelSpec::laplace(Variant::TargetNormalDeriv);
  const Evaluator ev(disc, centers, {}, p);
  NeumannSolution sol;
  sol.stage_timings = ev.setup_timings();
  auto op = [&](const Eigen::VectorXcd& mu) {
    const auto nodes = targets_to_nodes(disc, std::span<const complex_t>(mu.data(), static_cast<std::size_t>(mu.size())));
    const auto r = ev.apply(nodes);
    for (const auto& [k, v] : r.stage_timings)
      if (k != "tree" && k != "lists") sol.stage_timings[k] += v;
    Eigen::VectorXcd out(mu.size());
    for (std::size_t t = 0; t < center_of.size(); ++t) out[static_cast<Eigen::Index>(t)] = r.qbx_values[center_of[t]];
    return out;
  };
  Eigen::VectorXcd rhs(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) rhs[static_cast<Eigen::Index>(i)] = g[i];
  const auto gm = gmres(op, rhs, tol, restart, max_iter);
  if (!gm.converged) {
    throw NumericalError("solve: GMRES did not reach the requested residual reduction within " +
                         std::to_string(max_iter) + " iterations");
  }
  sol.density_targets.assign(gm.x.data(), gm.x.data() + gm.x.size());
  sol.density_nodes = targets_to_nodes(disc, sol.density_targets);
  sol.iterations = gm.iterations;
  sol.residual_history = gm.residual_history;
  return sol;
}

/// S[mu] at points away from the surface by plain quadrature.
inline std::vector<complex_t> single_layer_off_surface(const Discretization& disc, std::span<const complex_t> mu_nodes,
                                                       std::span<const Point3> points) {
  if (mu_nodes.size() != disc.num_nodes()) throw ValidationError("density length must equal node count");
  std::vector<complex_t> w(disc.num_nodes());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = mu_nodes[i] * disc.weights[i];
  return direct_sum(KernelSpec::laplace(), disc.nodes, w, {}, points, {});
}

}  // namespace gigaqbx
