#pragma once

// Geometry files: JSON with the discretization arrays and optional QBX
// centers. Floats are written with 17 significant digits so a round trip
// reproduces every value bit for bit.

#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gigaqbx/geometry.hpp"

namespace gigaqbx {

struct GeometryFile {
  Discretization disc;
  std::optional<QbxCenterSet> centers;
};

namespace detail {

inline void write_double(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  os << buf;
}

inline void write_points(std::ostream& os, const char* key, const std::vector<Point3>& v) {
  os << "  \"" << key << "\": [";
  for (std::size_t i = 0; i < v.size(); ++i) {
    os << (i ? ",\n    [" : "\n    [");
    write_double(os, v[i].x);
    os << ", ";
    write_double(os, v[i].y);
    os << ", ";
    write_double(os, v[i].z);
    os << ']';
  }
  os << (v.empty() ? "]" : "\n  ]");
}

inline void write_doubles(std::ostream& os, const char* key, const std::vector<double>& v) {
  os << "  \"" << key << "\": [";
  for (std::size_t i = 0; i < v.size(); ++i) {
    os << (i % 4 ? ", " : (i ? ",\n    " : "\n    "));
    write_double(os, v[i]);
  }
  os << (v.empty() ? "]" : "\n  ]");
}

inline void write_ints(std::ostream& os, const char* key, const std::vector<int>& v) {
  os << "  \"" << key << "\": [";
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ']';
}

inline std::vector<Point3> read_points(const nlohmann::json& j, const char* key) {
  std::vector<Point3> out;
  if (!j.contains(key)) return out;
  if (!j.at(key).is_array()) throw ValidationError(std::string("geometry file: '") + key + "' must be an array");
  for (const auto& e : j.at(key)) {
    if (!e.is_array() || e.size() != 3) throw ValidationError(std::string("geometry file: '") + key + "' entries must be [x, y, z]");
    out.push_back({e[0].get<double>(), e[1].get<double>(), e[2].get<double>()});
  }
  return out;
}

template <class T>
std::vector<T> read_array(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return {};
  if (!j.at(key).is_array()) throw ValidationError(std::string("geometry file: '") + key + "' must be an array");
  return j.at(key).get<std::vector<T>>();
}

}  // namespace detail

inline void write_geometry(std::ostream& os, const Discretization& d, const QbxCenterSet* centers = nullptr) {
  os << "{\n  \"format\": \"gigaqbx-geometry\",\n  \"version\": 1,\n";
  os << "  \"name\": " << nlohmann::json(d.name).dump() << ",\n";
  os << "  \"quad_order\": " << d.quad_order << ",\n  \"target_degree\": " << d.target_degree << ",\n";
  os << "  \"nodes_per_element\": " << d.nodes_per_element << ",\n";
  os << "  \"targets_per_element\": " << d.targets_per_element << ",\n";
  detail::write_points(os, "nodes", d.nodes);
  os << ",\n";
  detail::write_doubles(os, "weights", d.weights);
  os << ",\n";
  detail::write_points(os, "normals", d.normals);
  os << ",\n";
  detail::write_ints(os, "element_id", d.element_id);
  os << ",\n";
  detail::write_doubles(os, "element_size", d.element_size);
  os << ",\n";
  detail::write_points(os, "targets", d.targets);
  os << ",\n";
  detail::write_points(os, "target_normals", d.target_normals);
  os << ",\n";
  detail::write_ints(os, "target_element_id", d.target_element_id);
  if (centers) {
    os << ",\n";
    detail::write_points(os, "centers", centers->centers);
    os << ",\n";
    detail::write_doubles(os, "radii", centers->radii);
    os << ",\n";
    detail::write_ints(os, "target_index", centers->target_index);
    os << ",\n  \"side\": \"" << (centers->side == Side::Exterior ? "exterior" : "interior") << '"';
  }
  os << "\n}\n";
}

inline GeometryFile parse_geometry(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("geometry file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("geometry file must hold a JSON object");
  for (const char* key : {"nodes", "weights", "normals", "element_id", "element_size", "targets"})
    if (!j.contains(key)) throw ValidationError(std::string("geometry file: missing '") + key + "'");
  GeometryFile g;
  try {
    Discretization& d = g.disc;
    d.name = j.value("name", std::string("file"));
    d.quad_order = j.value("quad_order", 0);
    d.target_degree = j.value("target_degree", 0);
    d.nodes_per_element = j.value("nodes_per_element", 0);
    d.targets_per_element = j.value("targets_per_element", 0);
    d.nodes = detail::read_points(j, "nodes");
    d.weights = detail::read_array<double>(j, "weights");
    d.normals = detail::read_points(j, "normals");
    d.element_id = detail::read_array<int>(j, "element_id");
    d.element_size = detail::read_array<double>(j, "element_size");
    d.targets = detail::read_points(j, "targets");
    d.target_normals = detail::read_points(j, "target_normals");
    d.target_element_id = detail::read_array<int>(j, "target_element_id");
    if (j.contains("centers")) {
      QbxCenterSet c;
      c.centers = detail::read_points(j, "centers");
      c.radii = detail::read_array<double>(j, "radii");
      c.target_index = detail::read_array<int>(j, "target_index");
      const std::string side = j.value("side", std::string("exterior"));
      if (side != "exterior" && side != "interior") throw ValidationError("geometry file: side must be exterior or interior");
      c.side = side == "exterior" ? Side::Exterior : Side::Interior;
      if (c.radii.size() != c.centers.size() || c.target_index.size() != c.centers.size()) {
        throw ValidationError("geometry file: centers, radii and target_index lengths differ");
      }
      for (int t : c.target_index)
        if (t < 0 || static_cast<std::size_t>(t) >= d.targets.size())
          throw ValidationError("geometry file: target_index out of range");
      g.centers = std::move(c);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("geometry file: ") + e.what());
  }
  // files written by hand may omit the target metadata
  if (g.disc.target_normals.empty() && !g.disc.targets.empty()) {
    if (g.centers) {
      g.disc.target_normals.assign(g.disc.targets.size(), Point3{});
      g.disc.target_element_id.assign(g.disc.targets.size(), 0);
    } else {
      throw ValidationError("geometry file: target_normals are needed to place QBX centers");
    }
  }
  g.disc.validate();
  return g;
}

inline GeometryFile read_geometry(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open geometry file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_geometry(ss.str());
}

}  // namespace gigaqbx
