#pragma once

// ASCII point clouds: optional "# key: value" header lines followed by one
// point per line, "x y z [intensity]".

#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "emberpipe/errors.hpp"
#include "emberpipe/geometry.hpp"

namespace emberpipe {

struct CloudFile {
  PointCloud cloud;
  std::map<std::string, std::string> header;
};

inline CloudFile read_cloud(std::istream& in) {
  CloudFile out;
  std::string line;
  std::size_t lineno = 0;
  bool with_intensity = false, decided = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      const auto colon = line.find(':', first);
      if (colon == std::string::npos) continue;
      auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      out.header[trim(line.substr(first + 1, colon - first - 1))] = trim(line.substr(colon + 1));
      continue;
    }
    std::istringstream ss(line);
    double v[4];
    int n = 0;
    while (n < 4 && ss >> v[n]) ++n;
    std::string rest;
    if (n < 3 || (ss >> rest)) throw ParseError("cloud: expected 'x y z [intensity]'", lineno);
    if (!decided) {
      with_intensity = n == 4;
      decided = true;
    } else if (with_intensity != (n == 4)) {
      throw ParseError("cloud: inconsistent column count", lineno);
    }
    out.cloud.points.emplace_back(v[0], v[1], v[2]);
    if (with_intensity) out.cloud.intensity.push_back(v[3]);
  }
  if (auto it = out.header.find("frame_id"); it != out.header.end()) out.cloud.frame_id = it->second;
  if (auto it = out.header.find("stamp"); it != out.header.end()) {
    try {
      out.cloud.stamp = std::stod(it->second);
    } catch (const std::exception&) {
      throw ParseError("cloud: bad stamp '" + it->second + "'");
    }
  }
  return out;
}

inline CloudFile read_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_cloud(in);
}

inline void write_cloud(std::ostream& out, const PointCloud& cloud,
                        const std::map<std::string, std::string>& extra = {}) {
  if (!cloud.frame_id.empty()) out << "# frame_id: " << cloud.frame_id << '\n';
  out << "# stamp: " << std::setprecision(17) << cloud.stamp << '\n';
  for (const auto& [k, v] : extra) out << "# " << k << ": " << v << '\n';
  out << std::setprecision(9);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z();
    if (cloud.has_intensity()) out << ' ' << cloud.intensity[i];
    out << '\n';
  }
}

inline void write_cloud(const std::string& path, const PointCloud& cloud,
                        const std::map<std::string, std::string>& extra = {}) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_cloud(out, cloud, extra);
}

}  // namespace emberpipe
