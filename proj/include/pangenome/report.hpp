#pragma once

#include <ostream>
#include <string>

#include "json.hpp"
#include "pangenome/params.hpp"
#include "pangenome/rng.hpp"

namespace pangenome {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

// A run's machine-readable record.  `results` is deterministic given the
// command line and seed; wall time and other non-reproducible bits stay
// outside it so results can be compared byte for byte.
struct RunReport {
  std::string command;
  Json params = Json::object();
  Json results = Json::object();
  Json diagnostics = Json::object();
  RngSpec seed;
  double wall_time_seconds = 0.0;

  Json to_json() const {
    Json j = Json::object();
    j["command"] = command;
    j["version"] = kVersion;
    j["params"] = params;
    j["seed"] = Json{{"seed", seed.seed}, {"stream_id", seed.stream_id}};
    j["results"] = results;
    j["diagnostics"] = diagnostics;
    j["wall_time_seconds"] = wall_time_seconds;
    return j;
  }
};

namespace detail {

// Scalars are rendered through the JSON serializer so CSV and JSON carry
// bit-identical value text.
inline std::string csv_scalar(const Json& v) {
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : s) {
        if (c == '"') quoted += '"';
        quoted += c;
      }
      quoted += '"';
      return quoted;
    }
    return s;
  }
  return v.dump();
}

inline void csv_flatten(const Json& v, const std::string& prefix,
                        std::ostream& out) {
  if (v.is_object()) {
    for (const auto& [key, value] : v.items())
      csv_flatten(value, prefix.empty() ? key : prefix + "." + key, out);
  } else if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i)
      csv_flatten(v[i], prefix + "[" + std::to_string(i + 1) + "]", out);
  } else {
    out << prefix << ',' << csv_scalar(v) << '\n';
  }
}

}  // namespace detail

// CSV rendering of the results block.  A results object holding a `table`
// (array of uniform row objects) becomes a columnar table; everything else is
// flattened to name,value rows.  Values are serializer-identical to JSON.
inline void write_results_csv(const Json& results, std::ostream& out) {
  if (results.contains("table") && results["table"].is_array() &&
      !results["table"].empty()) {
    const Json& table = results["table"];
    bool first = true;
    for (const auto& [key, value] : table[0].items()) {
      if (!first) out << ',';
      out << key;
      first = false;
      (void)value;
    }
    out << '\n';
    for (const auto& row : table) {
      first = true;
      for (const auto& [key, value] : row.items()) {
        if (!first) out << ',';
        out << detail::csv_scalar(value);
        first = false;
        (void)key;
      }
      out << '\n';
    }
    return;
  }
  out << "name,value\n";
  detail::csv_flatten(results, "", out);
}

}  // namespace pangenome
