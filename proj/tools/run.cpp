#include "run.hpp"

#include <cstdlib>

#include "hprobe/error.hpp"
#include "hprobe/hash.hpp"

namespace hprobe::cli {

namespace fs = std::filesystem;

fs::path store_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("HPROBE_STORE"); env && *env) return env;
  return "hprobe-store";
}

ojson read_json(const fs::path& path) {
  if (!fs::exists(path)) throw InputError("missing input file " + path.string());
  try {
    return ojson::parse(read_file(path));
  } catch (const nlohmann::json::exception& ex) {
    throw DataIntegrityError(path.string() + " is not valid JSON: " + ex.what());
  }
}

void write_json(const fs::path& path, const ojson& j) {
  fs::create_directories(path.parent_path());
  write_file_atomic(path, j.dump(2) + "\n");
}

Run::Run(std::string command, fs::path store, ojson config, std::uint64_t seed)
    : command_(std::move(command)),
      store_(std::move(store)),
      config_(std::move(config)),
      seed_(seed),
      start_(std::chrono::steady_clock::now()) {
  fs::create_directories(store_);
  lock_ = std::make_unique<FileLock>(store_ / ".lock");
}

std::string Run::config_hash() const { return sha256_hex(config_.dump()); }

void Run::input(const fs::path& path) {
  if (!fs::exists(path)) throw InputError("missing input file " + path.string());
  inputs_[path.string()] = sha256_file(path);
}

void Run::output(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, bytes);
  outputs_.push_back(path.string());
}

void Run::output_json(const fs::path& path, const ojson& j) { output(path, j.dump(2) + "\n"); }

fs::path Run::finish() {
  ojson m;
  m["command"] = command_;
  m["tool_version"] = kToolVersion;
  m["config"] = config_;
  m["config_hash"] = config_hash();
  m["seed"] = seed_;
  m["inputs"] = inputs_;
  m["outputs"] = outputs_;
  m["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  const fs::path p = store_ / "manifests" / (command_ + "-" + config_hash().substr(0, 12) + ".json");
  write_json(p, m);
  return p;
}

}  // namespace hprobe::cli
