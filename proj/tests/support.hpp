#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "msglab/bytes.hpp"

namespace testsupport {

inline std::string fixture_path(const std::string& name) {
  return std::string(MSGLAB_FIXTURE_DIR) + "/" + name;
}

inline std::string profile_path(const std::string& name) {
  return std::string(MSGLAB_PROFILE_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// `name=hex` per line; '#' starts a comment.
inline std::map<std::string, msglab::Bytes> load_vectors(
    const std::string& path) {
  std::map<std::string, msglab::Bytes> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = msglab::hex_decode(line.substr(eq + 1));
  }
  return out;
}

}  // namespace testsupport
