#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "autoform/error.hpp"

namespace autoform {

namespace fs = std::filesystem;

/// A per-episode directory. Every path handed to a tool is resolved against
/// it and refused if it would land outside.
class Workspace {
 public:
  explicit Workspace(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_);
    root_ = fs::weakly_canonical(root_);
  }

  const fs::path& root() const { return root_; }

  /// Throws ValidationError("... outside workspace") for absolute paths,
  /// `..` components, and symlinks escaping the root.
  fs::path resolve(std::string_view relative) const {
    if (relative.empty()) throw ValidationError("empty path");
    fs::path rel(relative);
    if (rel.is_absolute() || rel.has_root_name() || rel.has_root_directory()) {
      throw ValidationError("path '" + std::string(relative) + "' is outside workspace");
    }
    for (const auto& part : rel) {
      if (part == "..") {
        throw ValidationError("path '" + std::string(relative) + "' is outside workspace");
      }
    }
    fs::path full = fs::weakly_canonical(root_ / rel);
    auto [root_end, full_it] = std::mismatch(root_.begin(), root_.end(), full.begin(), full.end());
    if (root_end != root_.end()) {
      throw ValidationError("path '" + std::string(relative) + "' is outside workspace");
    }
    return full;
  }

  /// Writes `content` byte-exactly; returns the byte count.
  std::size_t write(std::string_view relative, std::string_view content) const {
    fs::path p = resolve(relative);
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot open " + p.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw StorageError("short write on " + p.string());
    return content.size();
  }

  std::string read(std::string_view relative) const {
    fs::path p = resolve(relative);
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("file '" + std::string(relative) + "' does not exist");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  bool exists(std::string_view relative) const { return fs::exists(resolve(relative)); }

 private:
  fs::path root_;
};

}  // namespace autoform
