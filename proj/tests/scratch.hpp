#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>

namespace test_support {

// Per-test scratch directory under the system temp dir, wiped on destruction.
struct Scratch {
  std::filesystem::path path;

  explicit Scratch(const std::string& name) {
    path = std::filesystem::temp_directory_path() /
           ("osanet-test-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~Scratch() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }

  Scratch(const Scratch&) = delete;
  Scratch& operator=(const Scratch&) = delete;

  std::filesystem::path operator/(const std::string& leaf) const { return path / leaf; }
};

}  // namespace test_support
