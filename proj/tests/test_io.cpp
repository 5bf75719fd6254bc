#include <gtest/gtest.h>

#include <sstream>

#include "gigaqbx/io.hpp"

using namespace gigaqbx;

TEST(GeometryFile, RoundTripIsExact) {
  const auto d = make_urchin(2, 0, 3);
  const auto c = place_qbx_centers(d, Side::Interior, 0.4);
  std::ostringstream os;
  write_geometry(os, d, &c);
  const auto g = parse_geometry(os.str());
  EXPECT_EQ(g.disc.nodes, d.nodes);
  EXPECT_EQ(g.disc.weights, d.weights);
  EXPECT_EQ(g.disc.normals, d.normals);
  EXPECT_EQ(g.disc.element_id, d.element_id);
  EXPECT_EQ(g.disc.element_size, d.element_size);
  EXPECT_EQ(g.disc.targets, d.targets);
  EXPECT_EQ(g.disc.target_normals, d.target_normals);
  EXPECT_EQ(g.disc.nodes_per_element, d.nodes_per_element);
  ASSERT_TRUE(g.centers.has_value());
  EXPECT_EQ(g.centers->centers, c.centers);
  EXPECT_EQ(g.centers->radii, c.radii);
  EXPECT_EQ(g.centers->target_index, c.target_index);
  EXPECT_EQ(g.centers->side, Side::Interior);
  // writing again gives the same bytes
  std::ostringstream os2;
  write_geometry(os2, g.disc, &*g.centers);
  EXPECT_EQ(os.str(), os2.str());
}

TEST(GeometryFile, RejectsMalformedInput) {
  EXPECT_THROW(parse_geometry("not json"), ValidationError);
  EXPECT_THROW(parse_geometry("{\"nodes\": []}"), ValidationError);
  const std::string bad_weight =
      R"({"nodes": [[0,0,0]], "weights": [-1], "normals": [[0,0,1]], "element_id": [0], "element_size": [1],
          "targets": [], "target_normals": [], "target_element_id": []})";
  EXPECT_THROW(parse_geometry(bad_weight), ValidationError);
  const std::string minimal =
      R"({"nodes": [[0,0,0]], "weights": [0.5], "normals": [[0,0,1]], "element_id": [0], "element_size": [1],
          "targets": [[0,0,0.1]], "centers": [[0,0,0.2]], "radii": [0.1], "target_index": [0]})";
  const auto g = parse_geometry(minimal);
  EXPECT_EQ(g.disc.num_nodes(), 1u);
  EXPECT_FALSE(g.disc.has_layout());
  EXPECT_EQ(g.centers->side, Side::Exterior);
}
