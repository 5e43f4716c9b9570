#include "hprobe/report.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "hprobe/error.hpp"

namespace hprobe {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string percent(double fraction) { return fixed(100.0 * fraction, 2) + "%"; }

std::string render_table(const TextTable& t) {
  std::vector<std::size_t> width(t.header.size(), 3);
  for (std::size_t c = 0; c < t.header.size(); ++c) width[c] = std::max(width[c], t.header[c].size());
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) throw InputError("table row has " + std::to_string(row.size()) + " cells");
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s = "|";
    for (std::size_t c = 0; c < cells.size(); ++c) s += " " + cells[c] + std::string(width[c] - cells[c].size(), ' ') + " |";
    return s + "\n";
  };
  std::string out;
  if (!t.caption.empty()) out += t.caption + "\n\n";
  out += line(t.header);
  std::string rule = "|";
  for (std::size_t c = 0; c < width.size(); ++c) rule += " " + std::string(width[c], '-') + " |";
  out += rule + "\n";
  for (const auto& row : t.rows) out += line(row);
  return out;
}

TextTable best_mse_table(const std::map<std::string, std::vector<GridCell>>& cells_by_model) {
  std::set<int> ps;
  for (const auto& [m, cells] : cells_by_model) {
    for (const auto& c : cells) ps.insert(c.p);
  }
  TextTable t;
  t.caption = "Best test distance MSE across layers for each projection dimension p.";
  t.header.push_back("Model");
  for (int p : ps) t.header.push_back("p=" + std::to_string(p) + " best MSE");
  for (const auto& [model, cells] : cells_by_model) {
    const auto best = best_per_p(cells);
    std::vector<std::string> row{model};
    for (int p : ps) {
      auto it = std::find_if(best.begin(), best.end(), [p](const GridCell& c) { return c.p == p; });
      row.push_back(it == best.end() ? "-" : fixed(it->test_mse));
    }
    t.rows.push_back(row);
  }
  return t;
}

TextTable accuracy_table(const std::map<std::string, std::vector<ScoredResponse>>& responses_by_model) {
  TextTable t;
  t.caption = "Traversal accuracy (exact and partial).";
  t.header = {"Model", "Exact Acc.", "Partial Acc."};
  for (const auto& [model, rs] : responses_by_model) {
    double exact = 0.0;
    double partial = 0.0;
    for (const auto& r : rs) {
      exact += r.exact;
      partial += r.partial;
    }
    const double n = rs.empty() ? 1.0 : static_cast<double>(rs.size());
    t.rows.push_back({model, fixed(exact / n, 3), fixed(partial / n, 3)});
  }
  return t;
}

TextTable depth_table(const std::map<std::string, std::vector<EvalReport>>& reports_by_model) {
  TextTable t;
  t.caption = "Best-layer depth probe performance on the test set.";
  t.header = {"Model", "Depth MSE (test, best layer)", "Pearson r (test, best layer)", "Layer"};
  for (const auto& [model, reports] : reports_by_model) {
    const EvalReport* best = nullptr;
    for (const auto& r : reports) {
      if (r.test_exact.n_tokens == 0) continue;
      if (!best || r.test_exact.depth.mse < best->test_exact.depth.mse) best = &r;
    }
    if (!best) {
      t.rows.push_back({model, "-", "-", "-"});
      continue;
    }
    t.rows.push_back({model, fixed(best->test_exact.depth.mse), fixed(best->test_exact.depth.pearson),
                      std::to_string(best->layer)});
  }
  return t;
}

TextTable category_table(const std::vector<TraversalExample>& examples, const std::vector<ScoredResponse>& responses) {
  std::map<std::string, bool> exact;
  for (const auto& r : responses) exact[r.id] = r.exact;
  std::map<std::pair<int, int>, std::pair<std::size_t, std::size_t>> by_cat;  // (depth, steps) -> (hits, n)
  std::size_t hits = 0;
  std::size_t n = 0;
  for (const auto& e : examples) {
    auto it = exact.find(e.id);
    if (it == exact.end()) continue;
    auto& c = by_cat[{e.tree.depth_max(), e.steps}];
    c.first += it->second;
    ++c.second;
    hits += it->second;
    ++n;
  }
  TextTable t;
  t.caption = "Exact accuracy by tree depth and step count.";
  t.header = {"Category", "Accuracy", "n"};
  for (const auto& [key, c] : by_cat) {
    t.rows.push_back({"depth " + std::to_string(key.first) + ", " + std::to_string(key.second) + " step" +
                          (key.second == 1 ? "" : "s"),
                      percent(static_cast<double>(c.first) / static_cast<double>(c.second)), std::to_string(c.second)});
  }
  t.rows.push_back({"Overall", n ? percent(static_cast<double>(hits) / static_cast<double>(n)) : "-", std::to_string(n)});
  return t;
}

TextTable ablation_table(const std::vector<KindAccuracy>& kinds) {
  TextTable t;
  t.caption = "Ablation results: accuracy on the evaluated population, exact retention and inexact rescue.";
  t.header = {"", "Baseline"};
  for (const auto& k : kinds) t.header.push_back(k.kind);
  std::vector<std::string> acc{"Accuracy", kinds.empty() ? "-" : percent(kinds.front().exact_before)};
  std::vector<std::string> partial{"Partial accuracy", kinds.empty() ? "-" : percent(kinds.front().partial_before)};
  std::vector<std::string> keep{"Exact retention", "---"};
  std::vector<std::string> rescue{"Inexact rescue", "---"};
  bool any_rescue = false;
  for (const auto& k : kinds) {
    acc.push_back(percent(k.exact_after));
    partial.push_back(percent(k.partial_after));
    keep.push_back(percent(k.exact_retention));
    rescue.push_back(k.inexact_rescue ? percent(*k.inexact_rescue) : "---");
    any_rescue = any_rescue || k.inexact_rescue.has_value();
  }
  t.rows = {acc, partial, keep};
  if (any_rescue) t.rows.push_back(rescue);
  return t;
}

TextTable logit_table(const std::vector<LogitSummary>& rows) {
  TextTable t;
  t.caption = "Mean absolute logit shift on answer tokens under ablation.";
  t.header = {"Layer", "Kind", "Mean abs logit shift", "95% CI", "Rank", "n"};
  for (const auto& s : rows) {
    t.rows.push_back({std::to_string(s.layer), s.kind, fixed(s.mean), "[" + fixed(s.ci_low) + ", " + fixed(s.ci_high) + "]",
                      std::to_string(s.rank), std::to_string(s.n)});
  }
  return t;
}

}  // namespace hprobe
