#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "carnot/errors.hpp"
#include "carnot/frame.hpp"

namespace carnot {

/// Frame from a JSON object with keys name, dim_n, depth_m, degrees, alpha,
/// coordinate_radius, fields (N lists of N polynomial strings in x1..xN) and
/// optionally layer_dims (cumulative). Unknown keys are rejected.
inline Frame frame_from_json(const nlohmann::json& j, const std::string& origin = "frame") {
  static const std::set<std::string> known{"name",  "dim_n",  "depth_m",          "degrees",
                                           "alpha", "fields", "coordinate_radius", "layer_dims"};
  if (!j.is_object()) throw ConfigError(origin + ": top level must be an object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError(origin + ": unknown key '" + k + "'");
  for (const char* k : {"dim_n", "depth_m", "degrees", "fields"})
    if (!j.contains(k)) throw ConfigError(origin + ": missing key '" + std::string(k) + "'");
  try {
    const std::string name = j.value("name", origin);
    const int n = j.at("dim_n").get<int>();
    const int depth = j.at("depth_m").get<int>();
    const auto degrees = j.at("degrees").get<std::vector<int>>();
    const auto fields = j.at("fields").get<std::vector<std::vector<std::string>>>();
    const double alpha = j.value("alpha", 1.0);
    const double radius = j.value("coordinate_radius", 1.0);
    if (n < 1) throw ConfigError(origin + ": dim_n must be positive");
    if (static_cast<int>(fields.size()) != n)
      throw ConfigError(origin + ": dim_n = " + std::to_string(n) + " but " + std::to_string(fields.size()) +
                        " fields given");
    Frame f = Frame::parse(name, depth, degrees, fields, alpha, radius);
    if (j.contains("layer_dims")) {
      const auto dims = j.at("layer_dims").get<std::vector<int>>();
      if (dims != f.layer_dims()) {
        std::ostringstream os;
        os << origin << ": layer_dims (";
        for (std::size_t m = 0; m < dims.size(); ++m) os << (m ? "," : "") << dims[m];
        os << ") disagree with the cumulative degree counts (";
        for (std::size_t m = 0; m < f.layer_dims().size(); ++m) os << (m ? "," : "") << f.layer_dims()[m];
        os << ")";
        throw ConfigError(os.str());
      }
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

inline Frame load_frame_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("'" + path + "' is neither a built-in frame nor a readable frame file");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return frame_from_json(j, path);
}

inline nlohmann::json frame_to_json(const Frame& f) {
  nlohmann::json fields = nlohmann::json::array();
  for (int i = 0; i < f.dim(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < f.dim(); ++k) row.push_back(f.coefficient(i, k).to_string());
    fields.push_back(row);
  }
  return {{"name", f.name()},       {"dim_n", f.dim()},   {"depth_m", f.depth()},
          {"degrees", f.degrees()}, {"alpha", f.alpha()}, {"coordinate_radius", f.coordinate_radius()},
          {"fields", fields},       {"layer_dims", f.layer_dims()}};
}

/// Built-in frame name or path to a JSON frame file.
inline Frame resolve_frame(const std::string& spec) {
  return is_builtin_frame(spec) ? builtin_frame(spec) : load_frame_file(spec);
}

}  // namespace carnot
