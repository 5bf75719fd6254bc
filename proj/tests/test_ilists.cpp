#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "gigaqbx/ilists.hpp"

using namespace gigaqbx;

namespace {

struct Particles {
  std::vector<Point3> sources, centers, targets;
  std::vector<double> radii;
};

Particles random_particles(std::mt19937_64& rng, int ns, int nc, int nt, double rmax, bool clustered) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), ur(0.0, rmax);
  std::normal_distribution<double> g(0.0, 0.15);
  auto point = [&] {
    if (!clustered) return Point3{u(rng), u(rng), u(rng)};
    // points near a sphere: surface-like distribution with strong refinement
    Point3 v{g(rng), g(rng), g(rng)};
    return normalized(v) * (0.7 + 0.02 * u(rng));
  };
  Particles p;
  for (int i = 0; i < ns; ++i) p.sources.push_back(point());
  for (int i = 0; i < nc; ++i) {
    p.centers.push_back(point());
    p.radii.push_back(ur(rng));
  }
  for (int i = 0; i < nt; ++i) p.targets.push_back(point());
  return p;
}

Octree build(const Particles& p, int nmax, double tf) {
  return build_tree(p.sources, p.centers, p.radii, p.targets, {.nmax = nmax, .t_f = tf});
}

bool is_ancestor(const Octree& t, int a, int d) {
  for (int w = t[d].parent; w >= 0; w = t[w].parent)
    if (w == a) return true;
  return false;
}

std::set<int> source_set(const Octree& t, std::span<const int> boxes) {
  std::set<int> s;
  for (int d : boxes)
    for (int i : t.subtree_sources(d)) s.insert(i);
  return s;
}

}  // namespace

TEST(Lists, SingleBox) {
  Particles p;
  p.sources = {{0, 0, 0}, {1, 1, 1}};
  p.centers = {{0.5, 0.5, 0.5}};
  p.radii = {0.1};
  const auto t = build(p, 10, 0.9);
  const auto il = compute_lists(t, 0);
  ASSERT_EQ(il.list1[0].size(), 1u);
  EXPECT_EQ(il.list1[0][0], 0);
  EXPECT_EQ(il.list2.total() + il.list3.total() + il.list3far.total() + il.list3close.total() + il.list4.total() +
                il.list4close.total() + il.list4far.total(),
            0u);
  EXPECT_TRUE(verify_partition(t, il).ok());
}

TEST(Lists, TwoLevelUniformTree) {
  Particles p;
  for (int k = 0; k < 8; ++k) {
    const Point3 c{(k & 1) ? 1.0 : -1.0, (k & 2) ? 1.0 : -1.0, (k & 4) ? 1.0 : -1.0};
    p.sources.push_back(c);
    p.targets.push_back(0.9 * c);
  }
  const auto t = build(p, 2, 0.9);
  ASSERT_EQ(t.size(), 9u);
  const auto il = compute_lists(t, 0);
  for (int b = 1; b < 9; ++b) {
    EXPECT_EQ(std::vector<int>(il.list1[b].begin(), il.list1[b].end()), (std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8}));
    EXPECT_TRUE(il.list2[b].empty());
    EXPECT_TRUE(il.list3[b].empty());
    EXPECT_TRUE(il.list4[b].empty());
  }
  EXPECT_TRUE(verify_partition(t, il).ok());
}

TEST(Lists, ExactlyOnceOnRandomTrees) {
  std::mt19937_64 rng(9);
  int nonempty_far = 0;
  for (int trial = 0; trial < 12; ++trial) {
    const auto p = random_particles(rng, 300, 150, 50, 0.08, trial % 2 == 1);
    const int nmax = trial % 3 == 0 ? 1 : 8;
    const auto t = build(p, nmax, trial % 4 < 2 ? 0.5 : 0.9);
    for (std::size_t nmpole : {std::size_t{0}, std::size_t{10}, kNoMultipoles}) {
      const auto il = compute_lists(t, nmpole);
      const auto rep = verify_partition(t, il);
      EXPECT_TRUE(rep.ok()) << "trial " << trial << " nmpole " << nmpole << ": " << rep.violations.size();
      EXPECT_EQ(rep.checked_centers, p.centers.size());
      EXPECT_EQ(rep.checked_targets, p.targets.size());
      nonempty_far += il.list3far.total() > 0 && il.list4far.total() > 0 && il.list2.total() > 0;
    }
  }
  EXPECT_GT(nonempty_far, 3);  // the lists actually get exercised
}

TEST(Lists, FaultInjectionFlagsDroppedBox) {
  std::mt19937_64 rng(10);
  const auto p = random_particles(rng, 500, 100, 0, 0.05, false);
  const auto t = build(p, 8, 0.9);
  auto il = compute_lists(t, 0);
  // drop a list1 entry from some center-owning box, other than the box itself
  int victim_box = -1, dropped = -1;
  for (int b = 0; b < static_cast<int>(t.size()) && victim_box < 0; ++b) {
    if (t.owned_centers(b).empty()) continue;
    for (int d : il.list1[b])
      if (d != b) {
        victim_box = b;
        dropped = d;
        break;
      }
  }
  ASSERT_GE(victim_box, 0);
  std::vector<std::vector<int>> nested(t.size());
  for (int b = 0; b < static_cast<int>(t.size()); ++b)
    for (int d : il.list1[b])
      if (!(b == victim_box && d == dropped)) nested[b].push_back(d);
  il.list1 = BoxLists::from_nested(nested);
  const auto rep = verify_partition(t, il);
  std::set<int> flagged_sources;
  for (const auto& v : rep.violations) {
    EXPECT_EQ(v.count, 0);
    flagged_sources.insert(v.source);
  }
  const auto sub = t.owned_sources(dropped);
  EXPECT_EQ(flagged_sources, std::set<int>(sub.begin(), sub.end()));
  EXPECT_EQ(rep.violations.size(), sub.size() * t.owned_centers(victim_box).size());
}

TEST(Lists, DemotedCandidatesCoverSameSources) {
  std::mt19937_64 rng(12);
  int checked = 0;
  for (int trial = 0; trial < 6; ++trial) {
    const auto p = random_particles(rng, 1500, 300, 0, 0.02, trial % 2 == 0);
    const auto t = build(p, 8, 0.9);
    if (t.max_level < 4) continue;
    const auto far0 = compute_lists(t, 0), farinf = compute_lists(t, kNoMultipoles), mid = compute_lists(t, 30);
    for (int b = 0; b < static_cast<int>(t.size()); ++b) {
      if (!t.is_target_box(b)) continue;
      EXPECT_TRUE(farinf.list3far[b].empty());
      // leaves moved into List 3 close when every candidate is demoted
      std::vector<int> demoted;
      std::set<int> close0(far0.list3close[b].begin(), far0.list3close[b].end());
      for (int d : farinf.list3close[b])
        if (!close0.count(d)) demoted.push_back(d);
      EXPECT_EQ(source_set(t, far0.list3far[b]), source_set(t, demoted));
      // intermediate threshold: far and close together cover the same sources
      auto all_mid = source_set(t, mid.list3far[b]);
      for (int i : source_set(t, mid.list3close[b])) all_mid.insert(i);
      auto all0 = source_set(t, far0.list3far[b]);
      for (int i : source_set(t, far0.list3close[b])) all0.insert(i);
      EXPECT_EQ(all_mid, all0);
      for (int d : mid.list3far[b]) EXPECT_GE(t[d].subtree_sources.size(), 30);
      checked += !far0.list3far[b].empty();
    }
  }
  EXPECT_GT(checked, 10);
}

TEST(Lists, SeparationInvariants) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 4; ++trial) {
    const auto p = random_particles(rng, 1000, 300, 100, 0.03, trial % 2 == 0);
    const double tf = 0.9;
    const auto t = build(p, 8, tf);
    const auto il = compute_lists(t, 0);
    for (int b = 0; b < static_cast<int>(t.size()); ++b) {
      const Box& box = t[b];
      const double rt = tcr(box, tf).radius;
      for (int d : il.list3far[b]) {
        // d < TCR(b), exact l2 form
        EXPECT_GE(norm(t[d].center - box.center) - rt, 3 * t[d].half_width);
        for (int e : il.list3far[b]) EXPECT_FALSE(is_ancestor(t, d, e)) << "two candidates on one chain";
        for (int e : il.list3close[b]) EXPECT_FALSE(is_ancestor(t, d, e));
      }
      for (int d : il.list4far[b]) {
        // TCR(b) < d with the exact l2 distance from b's center to box d
        double s = 0.0;
        for (int k = 0; k < 3; ++k) {
          const double x = std::max(0.0, std::fabs(box.center[k] - t[d].center[k]) - t[d].half_width);
          s += x * x;
        }
        EXPECT_GE(std::sqrt(s), 3 * box.half_width * (1 + tf));
      }
      for (int d : il.list2[b]) {
        EXPECT_EQ(t[d].level, box.level);
        EXPECT_GT(norm_inf(t[d].center - box.center), 4.5 * box.half_width);
      }
      std::set<int> c4(il.list4close[b].begin(), il.list4close[b].end());
      for (int d : il.list4far[b]) EXPECT_FALSE(c4.count(d));
      for (int d : il.list1[b]) EXPECT_TRUE(t[d].is_leaf());
      for (int d : il.list3close[b]) EXPECT_TRUE(t[d].is_leaf());
      for (int d : il.list4close[b]) EXPECT_TRUE(t[d].is_leaf());
    }
  }
}
