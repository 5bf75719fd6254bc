#pragma once

// Octree over sources, conventional targets and QBX centers.
//
// Boxes are stored in level order (parents precede children). Sources are
// permuted depth-first so that every box's subtree sources form one contiguous
// range; only leaves own sources. Centers and conventional targets are grouped
// by owning box, which may be a non-leaf when a center's ball does not fit
// the child's target confinement region.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <vector>

#include "gigaqbx/geometry.hpp"
#include "gigaqbx/point.hpp"

namespace gigaqbx {

struct TreeParams {
  int nmax = 64;
  double t_f = 0.9;
  int max_depth = 30;

  void validate() const {
    if (nmax < 1) throw ValidationError("nmax must be positive");
    if (!(t_f >= 0.0) || !std::isfinite(t_f)) throw ValidationError("t_f must be a nonnegative real");
    if (max_depth < 1 || max_depth > 60) throw ValidationError("max_depth must lie in [1, 60]");
  }
};

struct IndexRange {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  bool empty() const { return end == begin; }
};

struct Box {
  Point3 center;
  double half_width = 0.0;
  int level = 0;
  int parent = -1;
  std::array<int, 8> children{-1, -1, -1, -1, -1, -1, -1, -1};
  int num_children = 0;
  std::array<std::int64_t, 3> coord{0, 0, 0};  // integer position at this level
  IndexRange sources;          // owned sources (nonempty only for leaves)
  IndexRange subtree_sources;  // sources owned by the box and its descendants
  IndexRange targets;          // owned conventional targets
  IndexRange centers;          // owned QBX centers

  bool is_leaf() const { return num_children == 0; }
};

struct Ball {
  Point3 center;
  double radius = 0.0;
};

struct Octree {
  std::vector<Box> boxes;
  TreeParams params;
  int max_level = 0;
  // permutations: position -> original particle index
  std::vector<int> source_order;
  std::vector<int> target_order;
  std::vector<int> center_order;
  // particle data in original order
  std::vector<Point3> source_points;
  std::vector<Point3> target_points;
  std::vector<Point3> center_points;
  std::vector<double> center_radii;

  std::size_t size() const { return boxes.size(); }
  const Box& operator[](int b) const { return boxes[static_cast<std::size_t>(b)]; }
  const Box& root() const { return boxes.front(); }

  std::span<const int> owned_sources(int b) const { return range(source_order, (*this)[b].sources); }
  std::span<const int> subtree_sources(int b) const { return range(source_order, (*this)[b].subtree_sources); }
  std::span<const int> owned_targets(int b) const { return range(target_order, (*this)[b].targets); }
  std::span<const int> owned_centers(int b) const { return range(center_order, (*this)[b].centers); }

  bool is_target_box(int b) const { return !(*this)[b].targets.empty() || !(*this)[b].centers.empty(); }

 private:
  static std::span<const int> range(const std::vector<int>& v, IndexRange r) {
    return std::span<const int>(v).subspan(static_cast<std::size_t>(r.begin), static_cast<std::size_t>(r.size()));
  }
};

inline Ball tcr(const Box& box, double t_f) { return {box.center, std::sqrt(3.0) * box.half_width * (1.0 + t_f)}; }

/// Whether the closed regions of two boxes intersect (shared face, edge,
/// corner, or containment). Exact in integer coordinates.
inline bool boxes_adjacent(const Box& a, const Box& b) {
  const int L = std::max(a.level, b.level);
  const std::int64_t sa = std::int64_t{1} << (L - a.level), sb = std::int64_t{1} << (L - b.level);
  for (int k = 0; k < 3; ++k) {
    const std::int64_t alo = a.coord[k] * sa, ahi = alo + sa;
    const std::int64_t blo = b.coord[k] * sb, bhi = blo + sb;
    if (alo > bhi || blo > ahi) return false;
  }
  return true;
}

/// Same-level boxes with integer offset at most k in every coordinate.
inline bool are_colleagues(const Box& a, const Box& b, int k) {
  if (a.level != b.level) return false;
  for (int i = 0; i < 3; ++i)
    if (std::abs(a.coord[i] - b.coord[i]) > k) return false;
  return true;
}

/// k-colleagues of box `b` (same-level boxes inside its k-near neighborhood),
/// including `b`, in ascending id order.
inline std::vector<int> knear_colleagues(const Octree& tree, int b, int k) {
  if (b < 0 || static_cast<std::size_t>(b) >= tree.size()) throw ValidationError("knear_colleagues: invalid box id");
  if (k < 0) throw ValidationError("knear_colleagues: k must be nonnegative");
  const Box& box = tree[b];
  if (box.parent < 0) return {b};
  std::vector<int> out;
  for (int pc : knear_colleagues(tree, box.parent, std::max(k, 1))) {
    for (int c : tree[pc].children)
      if (c >= 0 && are_colleagues(tree[c], box, k)) out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct PrecChecks {
  bool a_prec_tcr_b = false;  // a < TCR(b)
  bool tcr_a_prec_b = false;  // TCR(a) < b
};

namespace detail {

/// l-infinity distance from a point to a closed box (zero inside).
inline double linf_distance_to_box(const Point3& x, const Box& b) {
  double d = 0.0;
  for (int k = 0; k < 3; ++k) d = std::max(d, std::fabs(x[k] - b.center[k]) - b.half_width);
  return std::max(d, 0.0);
}

}  // namespace detail

/// a < TCR(b): the center of a lies outside TCR(b) by at least 3|a|.
inline bool prec_box_tcr(const Box& a, const Box& b, double t_f) {
  return norm(a.center - b.center) - tcr(b, t_f).radius >= 3.0 * a.half_width;
}

/// TCR(a) < b, using the sufficient l-infinity check.
inline bool prec_tcr_box(const Box& a, const Box& b, double t_f) {
  return detail::linf_distance_to_box(a.center, b) >= 3.0 * a.half_width * (1.0 + t_f);
}

inline PrecChecks prec_checks(const Box& a, const Box& b, double t_f) {
  return {prec_box_tcr(a, b, t_f), prec_tcr_box(a, b, t_f)};
}

/// Builds the octree. `centers`/`radii` describe QBX balls; `targets` are
/// conventional (non-QBX) targets.
inline Octree build_tree(std::span<const Point3> sources, std::span<const Point3> centers, std::span<const double> radii,
                         std::span<const Point3> targets, const TreeParams& params) {
  params.validate();
  if (radii.size() != centers.size()) throw ValidationError("build_tree: centers/radii length mismatch");
  if (sources.empty() && centers.empty() && targets.empty()) throw ValidationError("build_tree: no particles");

  Octree tree;
  tree.params = params;
  tree.source_points.assign(sources.begin(), sources.end());
  tree.target_points.assign(targets.begin(), targets.end());
  tree.center_points.assign(centers.begin(), centers.end());
  tree.center_radii.assign(radii.begin(), radii.end());

  Point3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  auto grow = [&](const Point3& x, double r) {
    if (!is_finite(x) || !std::isfinite(r)) throw ValidationError("build_tree: non-finite particle");
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], x[k] - r);
      hi[k] = std::max(hi[k], x[k] + r);
    }
  };
  for (const auto& x : sources) grow(x, 0.0);
  for (const auto& x : targets) grow(x, 0.0);
  for (std::size_t i = 0; i < centers.size(); ++i) {
    if (!(radii[i] >= 0.0)) throw ValidationError("build_tree: negative center radius");
    grow(centers[i], radii[i]);
  }
  double extent = 0.0;
  for (int k = 0; k < 3; ++k) extent = std::max(extent, hi[k] - lo[k]);
  const double scale = std::max({std::fabs(lo.x), std::fabs(lo.y), std::fabs(lo.z), std::fabs(hi.x), std::fabs(hi.y),
                                 std::fabs(hi.z), extent});
  Box root;
  root.center = 0.5 * (lo + hi);
  root.half_width = 0.5 * extent * (1.0 + 1e-9) + 1e-9 * std::max(scale, 1e-300);

  struct Owned {
    std::vector<int> src, tgt, ctr;
    std::size_t count() const { return src.size() + tgt.size() + ctr.size(); }
  };
  std::vector<Owned> owned(1);
  for (int i = 0; i < static_cast<int>(sources.size()); ++i) owned[0].src.push_back(i);
  for (int i = 0; i < static_cast<int>(targets.size()); ++i) owned[0].tgt.push_back(i);
  for (int i = 0; i < static_cast<int>(centers.size()); ++i) owned[0].ctr.push_back(i);
  tree.boxes.push_back(root);

  auto child_of = [](const Box& b, const Point3& x) {
    return (x.x >= b.center.x ? 1 : 0) | (x.y >= b.center.y ? 2 : 0) | (x.z >= b.center.z ? 4 : 0);
  };

  for (std::size_t bi = 0; bi < tree.boxes.size(); ++bi) {
    if (owned[bi].count() <= static_cast<std::size_t>(params.nmax)) continue;
    const Box parent = tree.boxes[bi];
    const double chw = 0.5 * parent.half_width;
    const double child_tcr = std::sqrt(3.0) * chw * (1.0 + params.t_f);
    std::array<Owned, 8> split;
    Owned stay;
    for (int i : owned[bi].src) split[child_of(parent, sources[i])].src.push_back(i);
    for (int i : owned[bi].tgt) split[child_of(parent, targets[i])].tgt.push_back(i);
    for (int i : owned[bi].ctr) {
      const int k = child_of(parent, centers[i]);
      const Point3 cc = parent.center + Point3{(k & 1) ? chw : -chw, (k & 2) ? chw : -chw, (k & 4) ? chw : -chw};
      if (norm(centers[i] - cc) + radii[i] <= child_tcr) {
        split[k].ctr.push_back(i);
      } else {
        stay.ctr.push_back(i);
      }
    }
    if (stay.count() == owned[bi].count()) continue;  // nothing would move
    if (parent.level >= params.max_depth) {
      throw NumericalError("build_tree: depth cap reached before nmax could be met (coincident particles?)");
    }
    for (int k = 0; k < 8; ++k) {
      if (split[k].count() == 0) continue;
      Box child;
      child.half_width = chw;
      child.center = parent.center + Point3{(k & 1) ? chw : -chw, (k & 2) ? chw : -chw, (k & 4) ? chw : -chw};
      child.level = parent.level + 1;
      child.parent = static_cast<int>(bi);
      for (int d = 0; d < 3; ++d) child.coord[d] = 2 * parent.coord[d] + ((k >> d) & 1);
      const int id = static_cast<int>(tree.boxes.size());
      tree.boxes[bi].children[k] = id;
      tree.boxes[bi].num_children++;
      tree.boxes.push_back(child);
      owned.push_back(std::move(split[k]));
      tree.max_level = std::max(tree.max_level, child.level);
    }
    owned[bi] = std::move(stay);
  }

  // centers and targets grouped by owning box id
  for (std::size_t b = 0; b < tree.boxes.size(); ++b) {
    Box& box = tree.boxes[b];
    box.centers.begin = static_cast<int>(tree.center_order.size());
    tree.center_order.insert(tree.center_order.end(), owned[b].ctr.begin(), owned[b].ctr.end());
    box.centers.end = static_cast<int>(tree.center_order.size());
    box.targets.begin = static_cast<int>(tree.target_order.size());
    tree.target_order.insert(tree.target_order.end(), owned[b].tgt.begin(), owned[b].tgt.end());
    box.targets.end = static_cast<int>(tree.target_order.size());
  }

  // sources in depth-first order
  std::vector<std::pair<int, bool>> stack{{0, false}};
  while (!stack.empty()) {
    auto [b, done] = stack.back();
    stack.pop_back();
    Box& box = tree.boxes[b];
    if (done) {
      box.subtree_sources.end = static_cast<int>(tree.source_order.size());
      continue;
    }
    box.subtree_sources.begin = static_cast<int>(tree.source_order.size());
    box.sources.begin = box.subtree_sources.begin;
    tree.source_order.insert(tree.source_order.end(), owned[b].src.begin(), owned[b].src.end());
    box.sources.end = static_cast<int>(tree.source_order.size());
    stack.push_back({b, true});
    for (int k = 7; k >= 0; --k)
      if (box.children[k] >= 0) stack.push_back({box.children[k], false});
  }
  return tree;
}

inline Octree build_tree(const Discretization& disc, const QbxCenterSet& centers, std::span<const Point3> extra_targets,
                         const TreeParams& params) {
  return build_tree(disc.nodes, centers.centers, centers.radii, extra_targets, params);
}

/// One line per box: "id level cx cy cz hw parent nsrc ntgt nctr".
inline void write_tree(std::ostream& os, const Octree& tree) {
  char buf[256];
  for (std::size_t b = 0; b < tree.size(); ++b) {
    const Box& x = tree.boxes[b];
    std::snprintf(buf, sizeof buf, "%zu %d %.17g %.17g %.17g %.17g %d %d %d %d\n", b, x.level, x.center.x, x.center.y,
                  x.center.z, x.half_width, x.parent, x.sources.size(), x.targets.size(), x.centers.size());
    os << buf;
  }
}

}  // namespace gigaqbx
