#include "hprobe/activations.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "hprobe/error.hpp"
#include "hprobe/io.hpp"

namespace hprobe {

namespace {

constexpr char kMagic[8] = {'H', 'P', 'A', 'K', 0, 0, 0, 1};
constexpr std::uint64_t kAlign = 64;

std::uint64_t align_up(std::uint64_t x) { return (x + kAlign - 1) / kAlign * kAlign; }

struct Header {
  ojson json;
  std::uint64_t payload_start = 0;
};

ojson alignment_to_json(const RowAlignment& a) {
  ojson j;
  j["example_id"] = a.example_id;
  j["path_index"] = a.path_index;
  j["node_label"] = a.node_label;
  j["visitation"] = a.visitation;
  return j;
}

RowAlignment alignment_from_json(const ojson& j) {
  return {j.at("example_id").get<std::string>(), j.at("path_index").get<int>(),
          j.at("node_label").get<Label>(), j.at("visitation").get<int>()};
}

Header read_header(std::ifstream& in, const std::filesystem::path& path) {
  char magic[8];
  std::uint64_t len = 0;
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw DataIntegrityError(path.string() + " is not an HPAK v1 file");
  }
  unsigned char raw[8];
  if (!in.read(reinterpret_cast<char*>(raw), 8)) throw DataIntegrityError("truncated HPAK header");
  for (int i = 7; i >= 0; --i) len = (len << 8) | raw[i];
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) {
    throw DataIntegrityError("truncated HPAK header");
  }
  Header h;
  try {
    h.json = ojson::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw DataIntegrityError(std::string("malformed HPAK header: ") + ex.what());
  }
  if (h.json.value("format_version", 0) != 1) throw DataIntegrityError("unsupported HPAK version");
  if (h.json.value("dtype", "") != "f32le") throw DataIntegrityError("unsupported HPAK dtype");
  h.payload_start = align_up(16 + len);
  return h;
}

ActivationFile file_from_header(const ojson& j) {
  ActivationFile f;
  f.model_tag = j.at("model_tag").get<std::string>();
  f.layers = j.at("layers").get<std::vector<int>>();
  if (static_cast<int>(f.layers.size()) != j.at("layer_count").get<int>()) {
    throw DataIntegrityError("HPAK layer_count disagrees with layers");
  }
  for (const auto& a : j.at("alignment")) f.alignment.push_back(alignment_from_json(a));
  if (f.alignment.size() != j.at("row_count").get<std::size_t>()) {
    throw DataIntegrityError("HPAK alignment count differs from row_count");
  }
  return f;
}

Matrix read_block(std::ifstream& in, std::uint64_t offset, Eigen::Index n, Eigen::Index d) {
  std::vector<float> buf(static_cast<std::size_t>(n * d));
  in.seekg(static_cast<std::streamoff>(offset));
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4))) {
    throw DataIntegrityError("HPAK payload shorter than declared");
  }
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) m(i, k) = buf[static_cast<std::size_t>(i * d + k)];
  }
  return m;
}

}  // namespace

std::vector<RowAlignment> align_path(const std::string& example_id, const Path& path) {
  std::map<Label, int> seen;
  std::vector<RowAlignment> out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    out.push_back({example_id, static_cast<int>(i), path[i], seen[path[i]]++});
  }
  return out;
}

ActivationSet ActivationFile::layer_set(int layer) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i] == layer) return {layer, data[i], alignment};
  }
  throw InputError("layer " + std::to_string(layer) + " not present in activations for " + model_tag);
}

void write_hpak(const std::filesystem::path& path, const ActivationFile& file) {
  static_assert(std::endian::native == std::endian::little);
  if (file.layers.size() != file.data.size()) throw InputError("HPAK: one matrix per layer required");
  const auto n = static_cast<Eigen::Index>(file.alignment.size());
  const Eigen::Index d = file.hidden_dim();
  for (const auto& m : file.data) {
    if (m.rows() != n || m.cols() != d) throw InputError("HPAK: layer matrices must be row_count x hidden_dim");
  }
  const std::uint64_t block = static_cast<std::uint64_t>(n * d) * 4;
  ojson h;
  h["format_version"] = 1;
  h["model_tag"] = file.model_tag;
  h["layer_count"] = file.layers.size();
  h["layers"] = file.layers;
  h["hidden_dim"] = d;
  h["row_count"] = n;
  h["dtype"] = "f32le";
  h["alignment"] = ojson::array();
  for (const auto& a : file.alignment) h["alignment"].push_back(alignment_to_json(a));
  ojson offsets = ojson::array();
  for (std::size_t i = 0; i < file.layers.size(); ++i) offsets.push_back(i * align_up(block));
  h["layer_offsets"] = offsets;
  const std::string text = h.dump();

  const std::uint64_t payload_start = align_up(16 + text.size());
  std::string out(payload_start + file.layers.size() * align_up(block), '\0');
  std::memcpy(out.data(), kMagic, 8);
  for (int i = 0; i < 8; ++i) out[8 + i] = static_cast<char>((text.size() >> (8 * i)) & 0xff);
  std::memcpy(out.data() + 16, text.data(), text.size());
  for (std::size_t l = 0; l < file.data.size(); ++l) {
    char* dst = out.data() + payload_start + l * align_up(block);
    const Matrix& m = file.data[l];
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < d; ++k) {
        const float v = static_cast<float>(m(i, k));
        std::memcpy(dst + (i * d + k) * 4, &v, 4);
      }
    }
  }
  // The last block needs no trailing padding.
  out.resize(out.size() - (align_up(block) - block) * (file.layers.empty() ? 0 : 1));
  write_file_atomic(path, out);
}

ActivationFile read_hpak_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return file_from_header(read_header(in, path).json);
}

ActivationFile read_hpak(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  const Header h = read_header(in, path);
  try {
    ActivationFile f = file_from_header(h.json);
    const auto n = static_cast<Eigen::Index>(f.alignment.size());
    const auto d = h.json.at("hidden_dim").get<Eigen::Index>();
    const auto offsets = h.json.at("layer_offsets").get<std::vector<std::uint64_t>>();
    if (offsets.size() != f.layers.size()) throw DataIntegrityError("HPAK offsets/layers mismatch");
    for (auto off : offsets) {
      if (off % kAlign != 0) throw DataIntegrityError("HPAK layer offset not 64-byte aligned");
      f.data.push_back(read_block(in, h.payload_start + off, n, d));
    }
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::uint64_t>(in.tellg());
    if (!offsets.empty() && size != h.payload_start + offsets.back() + static_cast<std::uint64_t>(n * d) * 4) {
      throw DataIntegrityError("HPAK payload length differs from row_count x hidden_dim");
    }
    return f;
  } catch (const nlohmann::json::exception& ex) {
    throw DataIntegrityError(std::string("malformed HPAK header: ") + ex.what());
  }
}

ActivationSet read_hpak_layer(const std::filesystem::path& path, int layer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  const Header h = read_header(in, path);
  try {
    ActivationFile f = file_from_header(h.json);
    const auto offsets = h.json.at("layer_offsets").get<std::vector<std::uint64_t>>();
    for (std::size_t i = 0; i < f.layers.size(); ++i) {
      if (f.layers[i] != layer) continue;
      const auto n = static_cast<Eigen::Index>(f.alignment.size());
      const auto d = h.json.at("hidden_dim").get<Eigen::Index>();
      return {layer, read_block(in, h.payload_start + offsets.at(i), n, d), std::move(f.alignment)};
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataIntegrityError(std::string("malformed HPAK header: ") + ex.what());
  }
  throw InputError("layer " + std::to_string(layer) + " not present in " + path.string());
}

std::string logit_shift_line(const LogitShift& s) {
  ojson j;
  j["layer"] = s.layer;
  j["kind"] = s.kind;
  j["example_id"] = s.example_id;
  j["mean_abs_shift"] = s.mean_abs_shift;
  return j.dump();
}

LogitShift parse_logit_shift_line(std::string_view line) {
  try {
    const auto j = ojson::parse(line);
    LogitShift s{j.at("layer").get<int>(), j.at("kind").get<std::string>(),
                 j.at("example_id").get<std::string>(), j.at("mean_abs_shift").get<double>()};
    if (!(s.mean_abs_shift >= 0.0)) throw DataIntegrityError("negative or NaN logit shift for " + s.example_id);
    return s;
  } catch (const nlohmann::json::exception& ex) {
    throw DataIntegrityError(std::string("malformed logit-shift record: ") + ex.what());
  }
}

void write_logit_shifts(const std::filesystem::path& path, const std::vector<LogitShift>& shifts) {
  std::string out;
  for (const auto& s : shifts) out += logit_shift_line(s) + "\n";
  write_file_atomic(path, out);
}

std::vector<LogitShift> read_logit_shifts(const std::filesystem::path& path) {
  std::vector<LogitShift> out;
  for (const auto& line : read_lines(path)) out.push_back(parse_logit_shift_line(line));
  return out;
}

}  // namespace hprobe
