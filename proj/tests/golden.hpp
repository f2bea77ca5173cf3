#pragma once

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "factgenius/prompts.hpp"

namespace golden {

inline std::string render(const factgenius::ChatMessages& messages) {
  std::string out;
  for (const auto& m : messages) {
    out += "=== ";
    out += factgenius::to_string(m.role);
    out += " ===\n";
    out += m.content;
    out += "\n";
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Returns the checked-in golden; with FACTGENIUS_UPDATE_GOLDENS=1 it is
/// rewritten from `actual` first.
inline std::string expect(const std::string& name, const std::string& actual) {
  const std::string path = std::string(GOLDEN_DIR) + "/" + name;
  if (const char* update = std::getenv("FACTGENIUS_UPDATE_GOLDENS"); update && std::string(update) == "1") {
    std::ofstream(path, std::ios::binary) << actual;
  }
  return read_file(path);
}

}  // namespace golden
