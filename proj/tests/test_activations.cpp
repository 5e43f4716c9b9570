#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "hprobe/activations.hpp"
#include "hprobe/error.hpp"
#include "hprobe/rng.hpp"

using namespace hprobe;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("hprobe-act-" + std::to_string(Rng(reinterpret_cast<std::uintptr_t>(this)).next()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ActivationFile sample_file(int n_layers, int d, std::uint64_t seed) {
  ActivationFile f;
  f.model_tag = "stub-7";
  for (int l = 0; l < n_layers; ++l) f.layers.push_back(3 * l + 1);
  for (const auto& a : align_path("ex-a", {4, 1, 4, 2})) f.alignment.push_back(a);
  f.alignment.push_back({"ex-a", -1, -1, 0});
  for (const auto& a : align_path("ex-b", {0, 3})) f.alignment.push_back(a);
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(f.alignment.size());
  for (int l = 0; l < n_layers; ++l) {
    Matrix m(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      // Values exactly representable in f32 so the round trip can be bitwise.
      for (Eigen::Index j = 0; j < d; ++j) m(i, j) = static_cast<double>(static_cast<float>(rng.normal()));
    }
    f.data.push_back(m);
  }
  return f;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::uint64_t le64(const std::string& s, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[at + static_cast<std::size_t>(i)]);
  return v;
}

}  // namespace

TEST_CASE("align_path numbers revisits") {
  const auto rows = align_path("e", {4, 1, 4, 2, 4});
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].visitation == 0);
  CHECK(rows[2].visitation == 1);
  CHECK(rows[4].visitation == 2);
  CHECK(rows[1].visitation == 0);
  CHECK(rows[3].path_index == 3);
  CHECK(rows[3].node_label == 2);
}

TEST_CASE("HPAK round trip is bitwise") {
  TempDir tmp;
  const ActivationFile f = sample_file(3, 37, 11);
  const fs::path p = tmp.path / "acts.hpak";
  write_hpak(p, f);
  const ActivationFile g = read_hpak(p);
  CHECK(g.model_tag == f.model_tag);
  CHECK(g.layers == f.layers);
  CHECK(g.alignment == f.alignment);
  REQUIRE(g.data.size() == f.data.size());
  for (std::size_t l = 0; l < f.data.size(); ++l) {
    REQUIRE(g.data[l].rows() == f.data[l].rows());
    REQUIRE(g.data[l].cols() == f.data[l].cols());
    CHECK(std::memcmp(g.data[l].data(), f.data[l].data(), sizeof(double) * static_cast<std::size_t>(f.data[l].size())) == 0);
  }

  const ActivationSet one = read_hpak_layer(p, 4);
  CHECK(one.layer == 4);
  CHECK((one.rows.array() == f.data[1].array()).all());
  CHECK(read_hpak_header(p).data.empty());
  CHECK_THROWS_AS(read_hpak_layer(p, 2), InputError);
}

TEST_CASE("HPAK byte layout") {
  TempDir tmp;
  const ActivationFile f = sample_file(2, 5, 3);
  const fs::path p = tmp.path / "acts.hpak";
  write_hpak(p, f);
  const std::string bytes = slurp(p);
  CHECK(bytes.substr(0, 8) == std::string("HPAK\0\0\0\1", 8));
  const std::uint64_t hlen = le64(bytes, 8);
  const auto header = nlohmann::json::parse(bytes.substr(16, hlen));
  CHECK(header["format_version"] == 1);
  CHECK(header["dtype"] == "f32le");
  CHECK(header["row_count"] == f.alignment.size());
  CHECK(header["hidden_dim"] == 5);
  const std::uint64_t payload = (16 + hlen + 63) / 64 * 64;
  const auto offsets = header["layer_offsets"].get<std::vector<std::uint64_t>>();
  REQUIRE(offsets.size() == 2);
  for (auto off : offsets) CHECK(off % 64 == 0);
  const std::uint64_t block = f.alignment.size() * 5 * 4;
  CHECK(bytes.size() == payload + offsets[1] + block);

  // First value of layer 1, decoded by hand.
  float v = 0.0f;
  std::uint32_t u = 0;
  for (int i = 3; i >= 0; --i) u = (u << 8) | static_cast<unsigned char>(bytes[payload + offsets[1] + static_cast<std::size_t>(i)]);
  std::memcpy(&v, &u, 4);
  CHECK(static_cast<double>(v) == f.data[1](0, 0));
}

TEST_CASE("HPAK rejects damaged files") {
  TempDir tmp;
  const fs::path p = tmp.path / "acts.hpak";
  write_hpak(p, sample_file(2, 8, 5));
  const std::string bytes = slurp(p);

  const fs::path cut = tmp.path / "cut.hpak";
  std::ofstream(cut, std::ios::binary) << bytes.substr(0, bytes.size() - 4);
  CHECK_THROWS_AS(read_hpak(cut), DataIntegrityError);

  std::string bad = bytes;
  bad[0] = 'X';
  const fs::path magic = tmp.path / "magic.hpak";
  std::ofstream(magic, std::ios::binary) << bad;
  CHECK_THROWS_AS(read_hpak(magic), DataIntegrityError);

  CHECK_THROWS_AS(read_hpak(tmp.path / "missing.hpak"), InputError);

  ActivationFile wrong = sample_file(2, 8, 5);
  wrong.data[1] = Matrix::Zero(3, 8);
  CHECK_THROWS_AS(write_hpak(tmp.path / "w.hpak", wrong), InputError);
}

TEST_CASE("logit shift lines") {
  const LogitShift s{14, "probe", "tree-00012", 0.375};
  const LogitShift t = parse_logit_shift_line(logit_shift_line(s));
  CHECK(t.layer == 14);
  CHECK(t.kind == "probe");
  CHECK(t.example_id == "tree-00012");
  CHECK(t.mean_abs_shift == 0.375);
  CHECK_THROWS_AS(parse_logit_shift_line(R"({"layer":1,"kind":"x","example_id":"a","mean_abs_shift":-1})"),
                  DataIntegrityError);
  CHECK_THROWS_AS(parse_logit_shift_line("not json"), DataIntegrityError);

  TempDir tmp;
  write_logit_shifts(tmp.path / "s.jsonl", {s, {2, "random", "b", 0.0}});
  const auto back = read_logit_shifts(tmp.path / "s.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[1].kind == "random");
}
