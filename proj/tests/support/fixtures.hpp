#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace tbx::testing {

inline std::filesystem::path fixtures_dir() { return TBX_FIXTURES_DIR; }

inline std::string read_fixture(const std::string& name) {
  std::ifstream in(fixtures_dir() / name, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace tbx::testing
