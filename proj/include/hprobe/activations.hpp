#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hprobe/linalg.hpp"
#include "hprobe/tree.hpp"

namespace hprobe {

/// Where a row came from. Rows outside the parsed PATH (the wider
/// chain-of-thought pool) carry path_index = node_label = -1.
struct RowAlignment {
  std::string example_id;
  int path_index = -1;
  Label node_label = -1;
  int visitation = 0;  // 0 for the first time a node appears in the path

  bool is_node() const { return node_label >= 0; }
  bool operator==(const RowAlignment&) const = default;
};

struct ActivationSet {
  int layer = 0;
  Matrix rows;  // n x D
  std::vector<RowAlignment> alignment;

  int hidden_dim() const { return static_cast<int>(rows.cols()); }
  std::size_t size() const { return alignment.size(); }
};

/// Keeps rows whose alignment satisfies `keep`, in order.
template <typename Pred>
ActivationSet filter_rows(const ActivationSet& set, Pred keep) {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < set.alignment.size(); ++i) {
    if (keep(set.alignment[i])) idx.push_back(static_cast<Eigen::Index>(i));
  }
  ActivationSet out;
  out.layer = set.layer;
  out.rows.resize(static_cast<Eigen::Index>(idx.size()), set.rows.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.rows.row(static_cast<Eigen::Index>(r)) = set.rows.row(idx[r]);
    out.alignment.push_back(set.alignment[static_cast<std::size_t>(idx[r])]);
  }
  return out;
}

inline ActivationSet node_rows(const ActivationSet& set) {
  return filter_rows(set, [](const RowAlignment& a) { return a.is_node(); });
}

/// Rows for one path, numbered with visitation counters.
std::vector<RowAlignment> align_path(const std::string& example_id, const Path& path);

// HPAK v1: 8-byte magic, u64 little-endian header length, JSON header,
// then one f32le row-major block per layer at the header's 64-byte-aligned
// offsets. Every layer shares the same alignment records.
struct ActivationFile {
  std::string model_tag;
  std::vector<int> layers;
  std::vector<RowAlignment> alignment;
  std::vector<Matrix> data;  // one n x D matrix per entry of `layers`

  int hidden_dim() const { return data.empty() ? 0 : static_cast<int>(data.front().cols()); }
  ActivationSet layer_set(int layer) const;
};

void write_hpak(const std::filesystem::path& path, const ActivationFile& file);
ActivationFile read_hpak(const std::filesystem::path& path);
/// Reads the header and only the requested layer's block.
ActivationSet read_hpak_layer(const std::filesystem::path& path, int layer);
/// Header-only read: model tag, layers, alignment (data left empty).
ActivationFile read_hpak_header(const std::filesystem::path& path);

// Logit-shift records: one JSON object per line
// {layer, kind, example_id, mean_abs_shift}.
struct LogitShift {
  int layer = 0;
  std::string kind;
  std::string example_id;
  double mean_abs_shift = 0.0;
};

std::string logit_shift_line(const LogitShift& s);
LogitShift parse_logit_shift_line(std::string_view line);
void write_logit_shifts(const std::filesystem::path& path, const std::vector<LogitShift>& shifts);
std::vector<LogitShift> read_logit_shifts(const std::filesystem::path& path);

}  // namespace hprobe
