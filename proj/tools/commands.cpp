#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>

#include "hprobe/ablation.hpp"
#include "hprobe/error.hpp"
#include "hprobe/hash.hpp"
#include "hprobe/oracle.hpp"
#include "hprobe/plot.hpp"
#include "hprobe/report.hpp"
#include "hprobe/rng.hpp"
#include "run.hpp"

namespace hprobe::cli {

namespace fs = std::filesystem;

namespace {

struct Paths {
  fs::path store;
  std::string setting;
  std::string tag;

  explicit Paths(const Common& c) : store(store_root(c.store)), setting(c.setting), tag(c.tag) {
    if (setting != "tree") throw InputError("unknown setting '" + setting + "' (supported: tree)");
    if (tag.empty() || tag.find('/') != std::string::npos) throw InputError("invalid tag '" + tag + "'");
  }
  fs::path setting_dir() const { return store / setting; }
  fs::path tag_dir() const { return setting_dir() / tag; }
  fs::path layer_dir(int layer) const { return tag_dir() / std::to_string(layer); }
  fs::path hpak() const { return tag_dir() / "activations.hpak"; }
  fs::path responses() const { return tag_dir() / "responses.jsonl"; }
  fs::path sidecar() const { return tag_dir() / "sidecar.json"; }
};

fs::path dataset_path(const Common& c, const Paths& p) {
  return c.dataset.empty() ? p.setting_dir() / "dataset.jsonl" : fs::path(c.dataset);
}

ojson common_json(const Common& c, const Paths& p) {
  return {{"store", p.store.string()}, {"setting", c.setting}, {"tag", c.tag},
          {"dataset", dataset_path(c, p).string()}, {"seed", c.seed}};
}

ojson probe_json(const ProbeOptions& o) {
  return {{"layers", o.layers},   {"pca_dim", o.pca_dim}, {"train_split", o.train_split},
          {"lr", o.lr},           {"weight_decay", o.weight_decay},
          {"steps", o.steps},     {"depth_lambda", o.depth_lambda}};
}

ProbeConfig probe_config(const ProbeOptions& o, int p, std::uint64_t seed) {
  ProbeConfig pc;
  pc.pca_dim = o.pca_dim;
  pc.depth_lambda = o.depth_lambda;
  pc.distance.p = p;
  pc.distance.lr = o.lr;
  pc.distance.weight_decay = o.weight_decay;
  pc.distance.steps = o.steps;
  pc.distance.seed = seed;
  return pc;
}

std::vector<TraversalExample> load_dataset(Run& run, const fs::path& path) {
  run.input(path);
  return read_dataset(path);
}

std::vector<int> resolve_layers(Run& run, const Paths& paths, const std::vector<int>& requested) {
  run.input(paths.hpak());
  const std::vector<int> present = read_hpak_header(paths.hpak()).layers;
  if (requested.empty()) return present;
  for (int l : requested) {
    if (std::find(present.begin(), present.end(), l) == present.end()) {
      throw InputError("layer " + std::to_string(l) + " is not in " + paths.hpak().string());
    }
  }
  return requested;
}

// Responses are optional; without them every example counts as exact.
std::vector<ScoredResponse> load_responses(Run& run, const Paths& paths) {
  if (!fs::exists(paths.responses())) return {};
  run.input(paths.responses());
  return read_responses(paths.responses());
}

struct StoredFit {
  LayerFit fit;
  Split split;
};

StoredFit load_fit(Run& run, const Paths& paths, const std::vector<TraversalExample>& examples, int layer, int p) {
  const fs::path dir = paths.layer_dir(layer);
  const fs::path pca = dir / "pca.json";
  const fs::path dist = dir / ("distance_p" + std::to_string(p) + ".json");
  const fs::path depth = dir / "depth.json";
  for (const auto& f : {pca, dist, depth}) run.input(f);
  const ojson dj = read_json(dist);
  StoredFit s;
  s.fit.layer = layer;
  s.fit.pca = pca_from_json(read_json(pca));
  s.fit.distance = distance_probe_from_json(dj);
  s.fit.depth = depth_probe_from_json(read_json(depth));
  s.split = split_examples(examples, dj.at("split_ratio").get<double>(), dj.at("split_seed").get<std::uint64_t>());
  return s;
}

void check_split(double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw InputError("--train-split must lie in (0, 1)");
}

Provenance parse_kind(const std::string& k) {
  const Provenance p = provenance_from_string(k);
  if (p == Provenance::kPlanted || p == Provenance::kOther) throw InputError("unsupported ablation kind '" + k + "'");
  return p;
}

std::map<std::string, ScoredResponse> responses_by_id(const std::vector<ScoredResponse>& rs) {
  std::map<std::string, ScoredResponse> m;
  for (const auto& r : rs) m.emplace(r.id, r);
  return m;
}

}  // namespace

void create_dataset(const CreateDatasetOptions& o) {
  const Paths paths(o.common);
  if (o.depth_range.size() != 2 || o.steps_range.size() != 2) throw InputError("ranges take two values LO HI");
  if (!o.sparsity.empty() && o.sparsity.size() != 2) throw InputError("--sparsity takes two values LO HI");
  DatasetConfig dc;
  dc.depth = {o.depth_range[0], o.depth_range[1]};
  dc.steps = {o.steps_range[0], o.steps_range[1]};
  dc.num_samples = o.num_samples;
  dc.seed = o.common.seed;
  if (!o.sparsity.empty()) dc.sparsity = RealRange{o.sparsity[0], o.sparsity[1]};
  const fs::path out = o.out.empty() ? dataset_path(o.common, paths) : fs::path(o.out);

  ojson cfg = common_json(o.common, paths);
  cfg["depth_range"] = o.depth_range;
  cfg["steps_range"] = o.steps_range;
  cfg["num_samples"] = o.num_samples;
  cfg["sparsity"] = o.sparsity;
  cfg["out"] = out.string();
  Run run("create-dataset", paths.store, cfg, o.common.seed);

  const auto examples = sample_dataset(dc);
  std::string text;
  for (const auto& e : examples) text += dataset_line(e) + "\n";
  run.output(out, text);
  run.finish();
}

void synth(const SynthOptions& o) {
  const Paths paths(o.common);
  OracleConfig oc;
  if (o.preset == "pca-sweep") {
    oc = pca_sweep_oracle(o.common.seed);
  } else if (o.preset == "default") {
    oc.ambient_dim = o.dim;
    oc.planted_rank = o.rank;
    oc.noise_sigma = o.noise;
    oc.inexact_fraction = o.inexact_fraction;
    oc.cot_rows_per_example = o.cot_rows;
    oc.seed = o.common.seed;
  } else {
    throw InputError("unknown preset '" + o.preset + "' (default, pca-sweep)");
  }
  oc.layers = o.layers;
  oc.model_tag = o.common.tag;

  ojson cfg = common_json(o.common, paths);
  cfg["preset"] = o.preset;
  cfg["oracle"] = oracle_config_to_json(oc);
  Run run("synth", paths.store, cfg, o.common.seed);

  const auto examples = load_dataset(run, dataset_path(o.common, paths));
  const OracleData data = plant(examples, oc);
  fs::create_directories(paths.tag_dir());
  write_hpak(paths.hpak(), data.file);
  run.produced(paths.hpak());
  std::string lines;
  for (const auto& r : data.responses) lines += response_line(r) + "\n";
  run.output(paths.responses(), lines);
  run.output_json(paths.sidecar(), oracle_sidecar(data));
  run.output_json(paths.tag_dir() / "oracle_config.json", oracle_config_to_json(oc));
  run.finish();
}

void eval_probe(const EvalProbeOptions& o) {
  const Paths paths(o.common);
  check_split(o.probe.train_split);
  if (o.proj_dims.empty()) throw InputError("--proj-dims needs at least one value");
  ojson cfg = common_json(o.common, paths);
  cfg["probe"] = probe_json(o.probe);
  cfg["proj_dims"] = o.proj_dims;
  cfg["pca_sweep"] = o.pca_sweep;
  Run run("eval-probe", paths.store, cfg, o.common.seed);

  const fs::path ds = dataset_path(o.common, paths);
  const auto examples = load_dataset(run, ds);
  const std::string ds_hash = sha256_file(ds);
  const DatasetIndex index(examples);
  const Split split = split_examples(examples, o.probe.train_split, o.common.seed);
  const auto responses = load_responses(run, paths);
  const auto exact = exact_by_id(responses);
  const auto layers = resolve_layers(run, paths, o.probe.layers);
  const std::uint64_t shuffle_seed = derive_seed(split.seed, 1);

  for (int layer : layers) {
    const ActivationSet acts = read_hpak_layer(paths.hpak(), layer);
    const fs::path dir = paths.layer_dir(layer);
    ojson records = ojson::array();
    for (std::size_t i = 0; i < o.proj_dims.size(); ++i) {
      const int p = o.proj_dims[i];
      const LayerFit fit = fit_layer(acts, index, split, probe_config(o.probe, p, o.common.seed));
      if (i == 0) {
        run.output_json(dir / "pca.json", pca_to_json(fit.pca));
        run.output_json(dir / "depth.json", depth_probe_to_json(fit.depth, ds_hash, split));
      }
      run.output_json(dir / ("distance_p" + std::to_string(p) + ".json"),
                      distance_probe_to_json(fit.distance, ds_hash, split));
      EvalReport rep = evaluate(fit, acts, index, split, exact, shuffle_seed);
      rep.model_tag = o.common.tag;
      records.push_back(eval_report_to_json(rep));
    }
    run.output_json(dir / "eval.json", {{"records", records}});
  }

  if (!o.pca_sweep.empty()) {
    if (!fs::exists(paths.sidecar())) throw InputError("--pca-sweep needs oracle data (no sidecar.json for this tag)");
    run.input(paths.sidecar());
    const Sidecar sc = sidecar_from_json(read_json(paths.sidecar()));
    // Sweep at the strongest oracle layer among the evaluated ones.
    int layer = layers.front();
    double best = -1.0;
    for (std::size_t i = 0; i < sc.layers.size(); ++i) {
      if (std::find(layers.begin(), layers.end(), sc.layers[i]) != layers.end() && sc.layer_scale[i] > best) {
        best = sc.layer_scale[i];
        layer = sc.layers[i];
      }
    }
    OracleData data;
    data.file = read_hpak(paths.hpak());
    data.responses = responses;
    data.planted = sc.planted;
    const int p = o.proj_dims.back();
    const auto points = pca_sweep(data, index, split, o.pca_sweep, probe_config(o.probe, p, o.common.seed), layer);
    ojson pts = ojson::array();
    for (const auto& pt : points) {
      pts.push_back({{"k", pt.k}, {"pearson", pt.pearson}, {"selectivity", pt.selectivity}, {"recovery", pt.recovery}});
    }
    run.output_json(paths.tag_dir() / "pca_sweep.json", {{"layer", layer}, {"p", p}, {"points", pts}});
  }
  run.finish();
}

void intervene(const InterveneOptions& o) {
  const Paths paths(o.common);
  if (o.kinds.empty()) throw InputError("--ablation-kind needs at least one kind");
  for (const auto& k : o.kinds) parse_kind(k);
  ojson cfg = common_json(o.common, paths);
  cfg["layers"] = o.layers;
  cfg["proj_dim"] = o.proj_dim;
  cfg["ablation_kinds"] = o.kinds;
  cfg["include_rescue"] = o.include_rescue;
  cfg["bases_only"] = o.bases_only;
  cfg["skip_causal"] = o.skip_causal;
  Run run("intervene", paths.store, cfg, o.common.seed);

  const auto examples = load_dataset(run, dataset_path(o.common, paths));
  const DatasetIndex index(examples);
  const auto layers = resolve_layers(run, paths, o.layers);
  const bool oracle = fs::exists(paths.sidecar());
  std::optional<Sidecar> sidecar;
  if (oracle) {
    run.input(paths.sidecar());
    sidecar = sidecar_from_json(read_json(paths.sidecar()));
  }
  std::vector<ScoredResponse> before;
  if (!o.bases_only) {
    before = load_responses(run, paths);
    if (before.empty()) throw InputError("missing input file " + paths.responses().string());
  }
  const auto before_by_id = responses_by_id(before);

  for (int layer : layers) {
    const fs::path dir = paths.layer_dir(layer);
    const StoredFit stored = load_fit(run, paths, examples, layer, o.proj_dim);
    const ActivationSet acts = read_hpak_layer(paths.hpak(), layer);
    const Basis probe = hierarchical_subspace(stored.fit.distance, stored.fit.depth, stored.fit.pca);

    std::vector<std::pair<std::string, Basis>> bases;
    for (std::size_t i = 0; i < o.kinds.size(); ++i) {
      const AblationSpec spec{parse_kind(o.kinds[i]), probe.rank(), layer, derive_seed(o.common.seed, i)};
      bases.emplace_back(o.kinds[i], build_basis(spec, acts, &stored.fit));
      // The identity is D x D and needs no file.
      if (spec.kind != Provenance::kFull) {
        run.output_json(dir / ("basis_" + o.kinds[i] + ".json"), basis_to_json(bases.back().second));
      }
    }
    if (o.bases_only) continue;

    AblationReport rep;
    rep.layer = layer;
    rep.include_rescue = o.include_rescue;
    std::vector<LogitShift> shifts;
    for (const auto& [kind, basis] : bases) {
      std::vector<ScoredResponse> after;
      if (oracle) {
        const Basis& planted = sidecar->basis_for(layer);
        const auto retained = retained_signal(acts, planted, basis);
        for (const auto& r : before) {
          const auto it = retained.find(r.id);
          after.push_back(simulate_ablated_response(index.at(r.id), r, it == retained.end() ? 1.0 : it->second));
        }
        std::string lines;
        for (const auto& r : after) lines += response_line(r) + "\n";
        run.output(dir / ("ablated_" + kind + ".jsonl"), lines);

        // Oracle stand-in for the logit protocol: mean planted-readout shift
        // over each example's node rows.
        const Vector shift = readout_shift(acts, planted, basis);
        std::map<std::string, std::pair<double, int>> acc;
        std::vector<std::string> order;
        Eigen::Index row = 0;
        for (const auto& a : acts.alignment) {
          if (!a.is_node()) continue;
          auto [it, fresh] = acc.try_emplace(a.example_id, 0.0, 0);
          if (fresh) order.push_back(a.example_id);
          it->second.first += shift(row++);
          it->second.second += 1;
        }
        for (const auto& id : order) {
          shifts.push_back({layer, kind, id, acc[id].first / acc[id].second});
        }
      } else {
        const fs::path f = dir / ("ablated_" + kind + ".jsonl");
        run.input(f);
        after = read_responses(f);
        for (const auto& r : after) {
          if (!before_by_id.count(r.id)) throw DataIntegrityError("ablated response " + r.id + " has no baseline");
        }
      }
      rep.accuracy.push_back(accuracy_protocol(kind, before, after, o.include_rescue));
    }
    if (oracle) {
      std::string lines;
      for (const auto& s : shifts) lines += logit_shift_line(s) + "\n";
      run.output(dir / "logit_shifts.jsonl", lines);
    } else if (fs::exists(dir / "logit_shifts.jsonl")) {
      run.input(dir / "logit_shifts.jsonl");
      shifts = read_logit_shifts(dir / "logit_shifts.jsonl");
    }
    if (!shifts.empty()) rep.logit = logit_protocol(shifts);
    run.output_json(dir / "ablation.json", ablation_report_to_json(rep));

    if (oracle && !o.skip_causal) {
      ProbeConfig pc;
      pc.pca_dim = static_cast<int>(stored.fit.pca.components.rows());
      pc.distance = stored.fit.distance.config;
      pc.depth_lambda = stored.fit.depth.lambda;
      const CausalReport cr =
          oracle_causal_check(acts, index, stored.split, exact_by_id(before), pc, derive_seed(o.common.seed, 99));
      run.output_json(dir / "causal.json", causal_report_to_json(cr));
    }
  }
  run.finish();
}

void similarity(const SimilarityOptions& o) {
  const Paths paths(o.common);
  check_split(o.probe.train_split);
  ojson cfg = common_json(o.common, paths);
  cfg["probe"] = probe_json(o.probe);
  cfg["proj_dim"] = o.proj_dim;
  cfg["folds"] = o.folds;
  cfg["null_draws"] = o.null_draws;
  Run run("similarity", paths.store, cfg, o.common.seed);

  const auto examples = load_dataset(run, dataset_path(o.common, paths));
  const DatasetIndex index(examples);
  const Split split = split_examples(examples, o.probe.train_split, o.common.seed);
  const auto layers = resolve_layers(run, paths, o.probe.layers);
  for (int layer : layers) {
    const ActivationSet acts = read_hpak_layer(paths.hpak(), layer);
    const StabilityReport r = cross_split_stability(acts, index, split, o.folds,
                                                    probe_config(o.probe, o.proj_dim, o.common.seed), o.null_draws);
    ojson j = stability_to_json(r);
    j["layer"] = layer;
    run.output_json(paths.layer_dir(layer) / "stability.json", j);
  }
  run.finish();
}

void grid(const GridOptions& o) {
  const Paths paths(o.common);
  check_split(o.probe.train_split);
  ojson cfg = common_json(o.common, paths);
  cfg["probe"] = probe_json(o.probe);
  cfg["grid_p"] = o.grid_p;
  cfg["grid_lr"] = o.grid_lr;
  cfg["grid_steps"] = o.grid_steps;
  Run run("grid", paths.store, cfg, o.common.seed);

  const auto examples = load_dataset(run, dataset_path(o.common, paths));
  const DatasetIndex index(examples);
  const Split split = split_examples(examples, o.probe.train_split, o.common.seed);
  std::vector<ActivationSet> sets;
  for (int layer : resolve_layers(run, paths, o.probe.layers)) sets.push_back(read_hpak_layer(paths.hpak(), layer));

  GridSpec spec{o.grid_p, o.grid_lr, o.grid_steps};
  const auto cells = grid_search(sets, index, split, spec, probe_config(o.probe, 5, o.common.seed));
  ojson all = ojson::array();
  ojson best = ojson::array();
  for (const auto& c : cells) all.push_back(grid_cell_to_json(c));
  for (const auto& c : best_per_p(cells)) best.push_back(grid_cell_to_json(c));
  run.output_json(paths.tag_dir() / "grid.json", {{"model_tag", o.common.tag}, {"cells", all}, {"best", best}});
  run.output(paths.tag_dir() / "table1.md", render_table(best_mse_table({{o.common.tag, cells}})));
  run.finish();
}

namespace {

GridCell grid_cell_from_json(const ojson& j) {
  return {j.at("layer").get<int>(),         j.at("p").get<int>(),
          j.at("lr").get<double>(),         j.at("steps").get<int>(),
          j.at("train_mse").get<double>(),  j.at("test_mse").get<double>(),
          j.at("test_pearson").get<double>()};
}

Matrix nested_matrix(const ojson& j) {
  const auto n = static_cast<Eigen::Index>(j.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (j[static_cast<std::size_t>(i)].size() != static_cast<std::size_t>(n)) {
      throw DataIntegrityError("similarity matrix is not square");
    }
    for (Eigen::Index c = 0; c < n; ++c) m(i, c) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

std::string table_block(const TextTable& t) { return render_table(t) + "\n"; }

std::vector<int> layer_dirs(const fs::path& tag_dir) {
  std::vector<int> out;
  for (const auto& e : fs::directory_iterator(tag_dir)) {
    if (!e.is_directory()) continue;
    const std::string name = e.path().filename().string();
    if (!name.empty() && std::all_of(name.begin(), name.end(), ::isdigit)) out.push_back(std::stoi(name));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

void report(const ReportOptions& o) {
  const Paths paths(o.common);
  const fs::path out = o.out.empty() ? paths.setting_dir() / "report" : fs::path(o.out);
  ojson cfg = common_json(o.common, paths);
  cfg["proj_dim"] = o.proj_dim;
  cfg["out"] = out.string();
  Run run("report", paths.store, cfg, o.common.seed);

  if (!fs::is_directory(paths.setting_dir())) throw InputError("no artifacts under " + paths.setting_dir().string());
  std::vector<std::string> tags;
  for (const auto& e : fs::directory_iterator(paths.setting_dir())) {
    if (e.is_directory() && fs::exists(e.path() / "activations.hpak")) tags.push_back(e.path().filename().string());
  }
  std::sort(tags.begin(), tags.end());
  if (tags.empty()) throw InputError("no model or oracle tags under " + paths.setting_dir().string());

  const fs::path ds = dataset_path(o.common, paths);
  std::vector<TraversalExample> examples;
  if (fs::exists(ds)) examples = load_dataset(run, ds);

  std::map<std::string, std::vector<GridCell>> grids;
  std::map<std::string, std::vector<ScoredResponse>> responses;
  std::map<std::string, std::vector<EvalReport>> evals;
  std::vector<std::pair<std::string, AblationReport>> ablations;  // "tag layer"
  std::vector<LogitSummary> logits;
  std::map<std::string, std::vector<LogitSummary>> logits_by_tag;
  std::string md;
  std::vector<std::string> figures;

  for (const auto& tag : tags) {
    const fs::path td = paths.setting_dir() / tag;
    if (fs::exists(td / "grid.json")) {
      run.input(td / "grid.json");
      const ojson gj = read_json(td / "grid.json");
      for (const auto& c : gj.at("cells")) grids[tag].push_back(grid_cell_from_json(c));
    }
    if (fs::exists(td / "responses.jsonl")) {
      run.input(td / "responses.jsonl");
      responses[tag] = read_responses(td / "responses.jsonl");
    }
    for (int layer : layer_dirs(td)) {
      const fs::path ld = td / std::to_string(layer);
      if (fs::exists(ld / "eval.json")) {
        run.input(ld / "eval.json");
        const ojson ej = read_json(ld / "eval.json");
        for (const auto& r : ej.at("records")) {
          EvalReport rep = eval_report_from_json(r);
          if (rep.p == o.proj_dim) evals[tag].push_back(rep);
        }
      }
      if (fs::exists(ld / "ablation.json")) {
        run.input(ld / "ablation.json");
        AblationReport ar = ablation_report_from_json(read_json(ld / "ablation.json"));
        for (const auto& l : ar.logit) logits_by_tag[tag].push_back(l);
        logits.insert(logits.end(), ar.logit.begin(), ar.logit.end());
        ablations.emplace_back(tag + ", layer " + std::to_string(layer), std::move(ar));
      }
      if (fs::exists(ld / "stability.json")) {
        run.input(ld / "stability.json");
        const ojson sj = read_json(ld / "stability.json");
        const int folds = sj.at("folds").get<int>();
        std::vector<std::string> labels;
        for (int f = 0; f < folds; ++f) labels.push_back("fold " + std::to_string(f + 1));
        const std::string svg = svg_row({svg_heatmap("Distance subspace similarity, " + tag + " layer " + std::to_string(layer),
                                                     nested_matrix(sj.at("distance_similarity")), labels),
                                         svg_heatmap("Depth direction cosine, " + tag + " layer " + std::to_string(layer),
                                                     nested_matrix(sj.at("depth_cosine")), labels)});
        const std::string name = "similarity_" + tag + "_" + std::to_string(layer) + ".svg";
        run.output(out / name, svg);
        figures.push_back(name);
      }
    }
  }

  md += "# Results: " + o.common.setting + " setting\n\n";
  if (!grids.empty()) md += table_block(best_mse_table(grids));
  if (!responses.empty()) md += table_block(accuracy_table(responses));
  if (!evals.empty()) md += table_block(depth_table(evals));
  if (!examples.empty()) {
    for (const auto& [tag, rs] : responses) {
      TextTable t = category_table(examples, rs);
      t.caption += " (" + tag + ")";
      md += table_block(t);
    }
  }
  for (const auto& [name, ar] : ablations) {
    TextTable t = ablation_table(ar.accuracy);
    t.caption += " (" + name + ")";
    md += table_block(t);
  }
  if (!logits.empty()) md += table_block(logit_table(logits));

  if (!evals.empty()) {
    LinePlot dist{"Distance probe, test exact", "Layer", "Pearson r", {}, false};
    LinePlot depth{"Depth probe, test exact", "Layer", "Pearson r", {}, false};
    for (auto& [tag, reps] : evals) {
      std::sort(reps.begin(), reps.end(), [](const EvalReport& a, const EvalReport& b) { return a.layer < b.layer; });
      Series sd{tag, {}, {}, {}, {}};
      Series sz{tag, {}, {}, {}, {}};
      Series sh{tag + " shuffled", {}, {}, {}, {}};
      for (const auto& r : reps) {
        sd.x.push_back(r.layer);
        sd.y.push_back(r.test_exact.distance.pearson);
        sh.x.push_back(r.layer);
        sh.y.push_back(r.shuffled.distance.pearson);
        sz.x.push_back(r.layer);
        sz.y.push_back(r.test_exact.depth.pearson);
      }
      dist.series.push_back(sd);
      dist.series.push_back(sh);
      depth.series.push_back(sz);
    }
    run.output(out / "layerwise.svg", svg_row({svg_line_plot(dist), svg_line_plot(depth)}));
    figures.push_back("layerwise.svg");
  }

  for (const auto& [name, ar] : ablations) {
    if (ar.accuracy.empty()) continue;
    BarChart chart;
    chart.title = "Ablation, " + name;
    chart.y_label = "Fraction";
    chart.groups = {"Accuracy", "Exact retention"};
    chart.values.resize(2, static_cast<Eigen::Index>(ar.accuracy.size()));
    for (std::size_t k = 0; k < ar.accuracy.size(); ++k) {
      chart.series.push_back(ar.accuracy[k].kind);
      chart.values(0, static_cast<Eigen::Index>(k)) = ar.accuracy[k].exact_after;
      chart.values(1, static_cast<Eigen::Index>(k)) = ar.accuracy[k].exact_retention;
    }
    std::string file = "ablation_" + name + ".svg";
    std::replace(file.begin(), file.end(), ' ', '_');
    file.erase(std::remove(file.begin(), file.end(), ','), file.end());
    run.output(out / file, svg_bar_chart(chart));
    figures.push_back(file);
  }

  if (!logits.empty()) {
    LinePlot lp{"Logit shift by layer", "Layer", "Mean abs shift", {}, false};
    for (const auto& [tag, rows] : logits_by_tag) {
      std::map<std::string, Series> by_kind;
      auto sorted = rows;
      std::sort(sorted.begin(), sorted.end(), [](const LogitSummary& a, const LogitSummary& b) { return a.layer < b.layer; });
      for (const auto& l : sorted) {
        Series& s = by_kind[l.kind];
        s.name = tag + " " + l.kind;
        s.x.push_back(l.layer);
        s.y.push_back(l.mean);
        s.lo.push_back(l.ci_low);
        s.hi.push_back(l.ci_high);
      }
      for (auto& [kind, s] : by_kind) lp.series.push_back(std::move(s));
    }
    run.output(out / "logit_sweep.svg", svg_line_plot(lp));
    figures.push_back("logit_sweep.svg");
  }

  for (const auto& tag : tags) {
    const fs::path f = paths.setting_dir() / tag / "pca_sweep.json";
    if (!fs::exists(f)) continue;
    run.input(f);
    const ojson j = read_json(f);
    Series pr{"distance Pearson (test exact)", {}, {}, {}, {}};
    Series sel{"ablation selectivity", {}, {}, {}, {}};
    TextTable t{"PCA component sweep (" + tag + ")", {"k", "Pearson r", "Selectivity", "Recovery"}, {}};
    for (const auto& pt : j.at("points")) {
      pr.x.push_back(pt.at("k").get<double>());
      pr.y.push_back(pt.at("pearson").get<double>());
      sel.x.push_back(pt.at("k").get<double>());
      sel.y.push_back(pt.at("selectivity").get<double>());
      t.rows.push_back({std::to_string(pt.at("k").get<int>()), fixed(pt.at("pearson").get<double>()),
                        fixed(pt.at("selectivity").get<double>()), fixed(pt.at("recovery").get<double>())});
    }
    md += table_block(t);
    const std::string name = "pca_sweep_" + tag + ".svg";
    run.output(out / name,
               svg_row({svg_line_plot({"Probe quality", "Retained components", "Pearson r", {pr}, true}),
                        svg_line_plot({"Selectivity", "Retained components", "Mean readout shift", {sel}, true})}));
    figures.push_back(name);
  }

  if (!figures.empty()) {
    md += "## Figures\n\n";
    for (const auto& f : figures) md += "- [" + f + "](" + f + ")\n";
  }
  run.output(out / "tables.md", md);
  run.finish();
}

}  // namespace hprobe::cli
