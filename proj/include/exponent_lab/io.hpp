#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "exponent_lab/network.hpp"

namespace exponent_lab {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

inline std::string format_double(double x) {
  if (std::isnan(x)) return "null";
  if (std::isinf(x)) return x > 0 ? "\"inf\"" : "\"-inf\"";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Infinite values are stored as the string "inf" since JSON has no literal.
inline json number_or_inf(double x) {
  if (std::isinf(x)) return x > 0 ? json("inf") : json("-inf");
  if (std::isnan(x)) return json(nullptr);
  return json(x);
}

inline double read_number(const json& j) {
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "inf") return kInfinity;
    if (s == "-inf") return -kInfinity;
    throw InputError("expected a number, got string '" + s + "'");
  }
  if (j.is_null()) return std::nan("");
  return j.get<double>();
}

// Conductances go out with 17 significant digits so the round trip is exact.
inline std::string network_to_json(const Network& net, const json& provenance = json::object()) {
  std::ostringstream os;
  os << "{\"n\":" << net.size() << ",\"root\":" << net.root() << ",\"edges\":[";
  bool first = true;
  for (const Edge& e : net.edges()) {
    if (!first) os << ',';
    first = false;
    os << '[' << e.u << ',' << e.v << ',' << format_double(e.c) << ']';
  }
  os << "],\"boundary\":[";
  first = true;
  for (VertexId b : net.boundary()) {
    if (!first) os << ',';
    first = false;
    os << b;
  }
  os << "],\"provenance\":" << provenance.dump() << "}\n";
  return os.str();
}

inline Network network_from_json(const json& j) {
  try {
    if (!j.is_object()) throw InputError("network JSON must be an object");
    for (const char* key : {"n", "root", "edges"})
      if (!j.contains(key)) throw InputError(std::string("network JSON lacks \"") + key + "\"");
    auto n = j.at("n").get<long long>();
    if (n <= 0) throw InputError("network JSON has n <= 0");
    std::vector<Edge> edges;
    edges.reserve(j.at("edges").size());
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 3) throw InputError("each edge must be [u, v, c]");
      edges.push_back({e[0].get<VertexId>(), e[1].get<VertexId>(), read_number(e[2])});
    }
    std::vector<VertexId> boundary;
    if (j.contains("boundary"))
      for (const auto& b : j.at("boundary")) boundary.push_back(b.get<VertexId>());
    return Network(static_cast<std::size_t>(n), std::move(edges), j.at("root").get<VertexId>(), boundary);
  } catch (const json::exception& ex) {
    throw InputError(std::string("malformed network JSON: ") + ex.what());
  }
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json_file(const std::filesystem::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::parse_error& ex) {
    throw InputError("cannot parse " + p.string() + ": " + ex.what());
  }
}

inline Network read_network(const std::filesystem::path& p) { return network_from_json(read_json_file(p)); }

// Temp file in the destination directory, then rename.
inline void write_atomic(const std::filesystem::path& p, const std::string& content) {
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, p, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw InputError("cannot move output into place at " + p.string() + ": " + ec.message());
  }
}

inline json edge_weight_to_json(const EdgeWeight& w) {
  json arr = json::array();
  for (double x : w.values) arr.push_back(number_or_inf(x));
  return arr;
}

}  // namespace exponent_lab
