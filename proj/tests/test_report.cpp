#include <doctest.h>

#include "hprobe/error.hpp"
#include "hprobe/plot.hpp"
#include "hprobe/report.hpp"

using namespace hprobe;

namespace {

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto at = s.find(needle); at != std::string::npos; at = s.find(needle, at + 1)) ++n;
  return n;
}

ScoredResponse response(const std::string& id, bool exact, double partial) {
  ScoredResponse r;
  r.id = id;
  r.exact = exact;
  r.partial = partial;
  return r;
}

}  // namespace

TEST_CASE("number formatting") {
  CHECK(percent(17.0 / 33.0) == "51.52%");
  CHECK(percent(24.0 / 33.0) == "72.73%");
  CHECK(percent(0.0) == "0.00%");
  CHECK(fixed(0.40241) == "0.4024");
  CHECK(fixed(1.0, 3) == "1.000");
}

TEST_CASE("table rendering") {
  TextTable t;
  t.caption = "Caption.";
  t.header = {"Model", "x"};
  t.rows = {{"a", "1.5"}, {"long name", "2"}};
  CHECK(render_table(t) ==
        "Caption.\n\n"
        "| Model     | x   |\n"
        "| --------- | --- |\n"
        "| a         | 1.5 |\n"
        "| long name | 2   |\n");
  t.rows.push_back({"short"});
  CHECK_THROWS_AS(render_table(t), InputError);
}

TEST_CASE("best MSE per p") {
  std::map<std::string, std::vector<GridCell>> cells;
  cells["oracle"] = {{0, 2, 1e-2, 500, 0.5, 0.41, 0.9}, {1, 2, 1e-2, 500, 0.5, 0.39, 0.9},
                     {1, 3, 1e-3, 1500, 0.5, 0.402, 0.9}};
  const TextTable t = best_mse_table(cells);
  REQUIRE(t.header.size() == 3);
  CHECK(t.header[1] == "p=2 best MSE");
  CHECK(t.rows[0] == std::vector<std::string>{"oracle", "0.3900", "0.4020"});
}

TEST_CASE("retention layout on stub data") {
  std::vector<KindAccuracy> kinds(3);
  kinds[0].kind = "Probe";
  kinds[0].exact_before = 0.4024;
  kinds[0].exact_after = 0.4024;
  kinds[0].exact_retention = 17.0 / 33.0;
  kinds[0].inexact_rescue = 0.3265;
  kinds[1].kind = "Random";
  kinds[1].exact_before = 0.4024;
  kinds[1].exact_after = 0.4268;
  kinds[1].exact_retention = 24.0 / 33.0;
  kinds[1].inexact_rescue = 0.2245;
  kinds[2].kind = "Zero";
  kinds[2].exact_before = 0.4024;
  kinds[2].inexact_rescue = 0.0;
  const TextTable t = ablation_table(kinds);
  CHECK(t.header == std::vector<std::string>{"", "Baseline", "Probe", "Random", "Zero"});
  REQUIRE(t.rows.size() == 4);
  CHECK(t.rows[0] == std::vector<std::string>{"Accuracy", "40.24%", "40.24%", "42.68%", "0.00%"});
  CHECK(t.rows[2] == std::vector<std::string>{"Exact retention", "---", "51.52%", "72.73%", "0.00%"});
  CHECK(t.rows[3] == std::vector<std::string>{"Inexact rescue", "---", "32.65%", "22.45%", "0.00%"});
}

TEST_CASE("accuracy and category tables") {
  DatasetConfig dc;
  dc.num_samples = 8;
  const auto ds = sample_dataset(dc);
  std::vector<ScoredResponse> rs;
  for (std::size_t i = 0; i < ds.size(); ++i) rs.push_back(response(ds[i].id, i % 2 == 0, i % 2 == 0 ? 1.0 : 0.5));
  const TextTable a = accuracy_table({{"m", rs}});
  CHECK(a.rows[0] == std::vector<std::string>{"m", "0.500", "0.750"});
  const TextTable c = category_table(ds, rs);
  CHECK(c.rows.back() == std::vector<std::string>{"Overall", "50.00%", "8"});
}

TEST_CASE("svg output") {
  LinePlot p;
  p.title = "Distance <test>";
  p.x_label = "layer";
  p.y_label = "pearson";
  p.series = {{"train", {0, 1, 2}, {0.1, 0.5, 0.4}, {}, {}}, {"test", {0, 1, 2}, {0.1, 0.4, 0.3}, {0, 0.3, 0.2}, {0.2, 0.5, 0.4}}};
  const std::string svg = svg_line_plot(p);
  CHECK(svg.rfind("<svg ", 0) == 0);
  CHECK(count(svg, "<polyline") == 2);
  CHECK(count(svg, "<polygon") == 1);
  CHECK(svg.find("&lt;test&gt;") != std::string::npos);
  CHECK(svg_line_plot(p) == svg);
  p.series[0].y.pop_back();
  CHECK_THROWS_AS(svg_line_plot(p), InputError);

  Matrix m(2, 2);
  m << 1.0, 0.8, 0.8, 1.0;
  const std::string h = svg_heatmap("sim", m, {"1", "2"});
  CHECK(count(h, "<rect") == 5);
  CHECK(h.find(">0.80<") != std::string::npos);

  BarChart b;
  b.groups = {"probe", "random"};
  b.series = {"before", "after"};
  b.values = Matrix::Constant(2, 2, 0.5);
  const std::string bars = svg_bar_chart(b);
  CHECK(count(bars, "<rect") == 1 + 1 + 4 + 2);
  const std::string row = svg_row({svg, bars});
  CHECK(count(row, "<svg ") == 3);
  CHECK(count(row, "</svg>") == 3);
}
