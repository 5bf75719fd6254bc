#pragma once

// Interaction lists 1, 2, 3 (close/far) and 4 (close/far).
//
// Adjacency is closed-box intersection. Lists hold only boxes whose subtree
// owns sources, each sorted by ascending box id. Since only leaves own
// sources, every source box is a leaf.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "gigaqbx/parallel.hpp"
#include "gigaqbx/tree.hpp"

namespace gigaqbx {

inline constexpr std::size_t kNoMultipoles = std::numeric_limits<std::size_t>::max();

/// Per-box ranges over one shared index array.
struct BoxLists {
  std::vector<int> starts{0};
  std::vector<int> items;

  std::span<const int> operator[](int b) const {
    return std::span<const int>(items).subspan(static_cast<std::size_t>(starts[b]),
                                               static_cast<std::size_t>(starts[b + 1] - starts[b]));
  }
  std::size_t num_boxes() const { return starts.size() - 1; }
  std::size_t total() const { return items.size(); }

  static BoxLists from_nested(std::vector<std::vector<int>>& nested) {
    BoxLists out;
    out.starts.reserve(nested.size() + 1);
    for (auto& v : nested) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      out.items.insert(out.items.end(), v.begin(), v.end());
      out.starts.push_back(static_cast<int>(out.items.size()));
    }
    return out;
  }
};

struct InteractionLists {
  std::size_t nmpole = 0;
  std::vector<char> target_box;       // owns centers or conventional targets
  std::vector<char> target_ancestor;  // strict ancestor of a target box
  BoxLists list1, list2, list3, list3close, list3far, list4, list4close, list4far;

  bool needs_local(int b) const { return target_box[b] || target_ancestor[b]; }
};

namespace detail {

inline std::vector<std::vector<int>> all_colleagues(const Octree& tree, int k) {
  std::vector<std::vector<int>> col(tree.size());
  col[0] = {0};
  for (std::size_t b = 1; b < tree.size(); ++b) {
    const Box& box = tree.boxes[b];
    for (int pc : col[box.parent])
      for (int c : tree[pc].children)
        if (c >= 0 && are_colleagues(tree[c], box, k)) col[b].push_back(c);
    std::sort(col[b].begin(), col[b].end());
  }
  return col;
}

}  // namespace detail

inline InteractionLists compute_lists(const Octree& tree, std::size_t nmpole) {
  const int nb = static_cast<int>(tree.size());
  const double tf = tree.params.t_f;
  InteractionLists il;
  il.nmpole = nmpole;
  il.target_box.assign(nb, 0);
  il.target_ancestor.assign(nb, 0);
  for (int b = nb - 1; b >= 0; --b) {
    if (tree.is_target_box(b)) il.target_box[b] = 1;
    const int p = tree[b].parent;
    if (p >= 0 && (il.target_box[b] || il.target_ancestor[b])) il.target_ancestor[p] = 1;
  }
  auto has_sources = [&](int d) { return !tree[d].subtree_sources.empty(); };
  auto is_source_leaf = [&](int d) { return tree[d].is_leaf() && !tree[d].sources.empty(); };

  const auto colleagues = detail::all_colleagues(tree, 2);
  std::vector<std::vector<int>> l1(nb), l2(nb), l3(nb), l3c(nb), l3f(nb), l4(nb), l4c(nb), l4f(nb);

  parallel_for(static_cast<std::size_t>(nb), [&](std::size_t ub) {
    const int b = static_cast<int>(ub);
    const Box& box = tree[b];
    if (!il.needs_local(b)) return;

    if (il.target_box[b]) {
      // List 1: leaves intersecting b (covers b's own leaf descendants)
      std::vector<int> stack{0};
      while (!stack.empty()) {
        const int d = stack.back();
        stack.pop_back();
        if (!has_sources(d) || !boxes_adjacent(tree[d], box)) continue;
        if (tree[d].is_leaf()) {
          l1[b].push_back(d);
        } else {
          for (int c : tree[d].children)
            if (c >= 0) stack.push_back(c);
        }
      }

      // List 3: first non-adjacent box along each descent from a colleague
      for (int col : colleagues[b]) {
        std::vector<int> st;
        for (int c : tree[col].children)
          if (c >= 0) st.push_back(c);
        while (!st.empty()) {
          const int d = st.back();
          st.pop_back();
          if (!has_sources(d)) continue;
          if (!boxes_adjacent(tree[d], box)) {
            l3[b].push_back(d);
          } else {
            for (int c : tree[d].children)
              if (c >= 0) st.push_back(c);
          }
        }
      }

      // List 3 far candidates and the close leaves around them
      for (int d0 : l3[b]) {
        std::vector<int> st{d0};
        while (!st.empty()) {
          const int d = st.back();
          st.pop_back();
          if (!has_sources(d)) continue;
          if (prec_box_tcr(tree[d], box, tf)) {
            if (static_cast<std::size_t>(tree[d].subtree_sources.size()) >= nmpole) {
              l3f[b].push_back(d);
            } else {
              std::vector<int> leaves{d};
              while (!leaves.empty()) {
                const int e = leaves.back();
                leaves.pop_back();
                if (is_source_leaf(e)) l3c[b].push_back(e);
                for (int c : tree[e].children)
                  if (c >= 0) leaves.push_back(c);
              }
            }
          } else if (tree[d].is_leaf()) {
            l3c[b].push_back(d);
          } else {
            for (int c : tree[d].children)
              if (c >= 0) st.push_back(c);
          }
        }
      }
    }

    if (box.parent >= 0) {
      // List 2: children of the parent's colleagues, well separated from b
      for (int pc : colleagues[box.parent])
        for (int c : tree[pc].children)
          if (c >= 0 && has_sources(c) && !are_colleagues(tree[c], box, 2)) l2[b].push_back(c);

      // List 4, first clause: coarser colleagues of ancestors touching the parent only
      const Box& parent = tree[box.parent];
      for (int a = box.parent; a >= 0; a = tree[a].parent)
        for (int d : colleagues[a])
          if (d != a && is_source_leaf(d) && boxes_adjacent(tree[d], parent) && !boxes_adjacent(tree[d], box)) {
            l4[b].push_back(d);
          }
    }
    // List 4, second clause: non-adjacent same-level source leaves
    for (int d : colleagues[b])
      if (d != b && is_source_leaf(d) && !boxes_adjacent(tree[d], box)) l4[b].push_back(d);
  });

  // List 4 close/far top-down: parents are finalized before children
  for (int b = 0; b < nb; ++b) {
    if (!il.needs_local(b)) continue;
    std::vector<int> cand = l4[b];
    if (tree[b].parent >= 0) cand.insert(cand.end(), l4c[tree[b].parent].begin(), l4c[tree[b].parent].end());
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    for (int d : cand) (prec_tcr_box(tree[b], tree[d], tf) ? l4f[b] : l4c[b]).push_back(d);
  }

  il.list1 = BoxLists::from_nested(l1);
  il.list2 = BoxLists::from_nested(l2);
  il.list3 = BoxLists::from_nested(l3);
  il.list3close = BoxLists::from_nested(l3c);
  il.list3far = BoxLists::from_nested(l3f);
  il.list4 = BoxLists::from_nested(l4);
  il.list4close = BoxLists::from_nested(l4c);
  il.list4far = BoxLists::from_nested(l4f);
  return il;
}

struct PartitionViolation {
  int source = 0;         // original source index
  int target = 0;         // original center or conventional-target index
  bool qbx_center = true;
  int count = 0;          // times the source was accounted (expected 1)
};

struct PartitionReport {
  std::vector<PartitionViolation> violations;
  std::size_t checked_centers = 0;
  std::size_t checked_targets = 0;
  bool ok() const { return violations.empty(); }
};

/// Checks that every source reaches every center and conventional target
/// exactly once through the direct lists, List 3 far, and the far field
/// gathered by the box's local expansion.
inline PartitionReport verify_partition(const Octree& tree, const InteractionLists& il) {
  PartitionReport rep;
  const std::size_t ns = tree.source_order.size();
  std::vector<int> diff(ns + 1), count(ns);
  for (int b = 0; b < static_cast<int>(tree.size()); ++b) {
    if (!tree.is_target_box(b)) continue;
    std::fill(diff.begin(), diff.end(), 0);
    auto mark = [&](int d) {
      diff[tree[d].subtree_sources.begin]++;
      diff[tree[d].subtree_sources.end]--;
    };
    for (int d : il.list1[b]) mark(d);
    for (int d : il.list3close[b]) mark(d);
    for (int d : il.list4close[b]) mark(d);
    for (int d : il.list3far[b]) mark(d);
    for (int w = b; w >= 0; w = tree[w].parent) {
      for (int d : il.list2[w]) mark(d);
      for (int d : il.list4far[w]) mark(d);
    }
    int run = 0;
    for (std::size_t i = 0; i < ns; ++i) count[i] = (run += diff[i]);
    for (std::size_t i = 0; i < ns; ++i) {
      if (count[i] == 1) continue;
      for (int c : tree.owned_centers(b)) rep.violations.push_back({tree.source_order[i], c, true, count[i]});
      for (int t : tree.owned_targets(b)) rep.violations.push_back({tree.source_order[i], t, false, count[i]});
    }
    rep.checked_centers += tree.owned_centers(b).size();
    rep.checked_targets += tree.owned_targets(b).size();
  }
  return rep;
}

}  // namespace gigaqbx
