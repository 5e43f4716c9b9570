#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "hprobe/io.hpp"
#include "hprobe/linalg.hpp"

namespace hprobe::cli {

inline constexpr const char* kToolVersion = "0.3.0";

/// Store root: --store, else $HPROBE_STORE, else ./hprobe-store.
std::filesystem::path store_root(const std::string& flag);

ojson read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const ojson& j);

/// One invocation of a subcommand: holds the store lock, records inputs and
/// outputs, and writes the manifest on success.
class Run {
 public:
  Run(std::string command, std::filesystem::path store, ojson config, std::uint64_t seed);

  const std::filesystem::path& store() const { return store_; }
  const ojson& config() const { return config_; }
  std::string config_hash() const;

  void input(const std::filesystem::path& path);
  void output(const std::filesystem::path& path, std::string_view bytes);
  void output_json(const std::filesystem::path& path, const ojson& j);
  /// Records a file some other writer produced.
  void produced(const std::filesystem::path& path) { outputs_.push_back(path.string()); }

  /// Writes manifests/{command}-{config hash prefix}.json; returns its path.
  std::filesystem::path finish();

 private:
  std::string command_;
  std::filesystem::path store_;
  ojson config_;
  std::uint64_t seed_;
  std::unique_ptr<FileLock> lock_;
  ojson inputs_ = ojson::object();
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace hprobe::cli
