#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"
#include "hprobe/error.hpp"
#include "run.hpp"

using namespace hprobe;
using namespace hprobe::cli;

namespace {

void add_common(CLI::App* cmd, Common& c, bool with_tag = true) {
  cmd->add_option("--store", c.store, "Artifact store root (default: $HPROBE_STORE, else ./hprobe-store)");
  cmd->add_option("--setting", c.setting, "Task setting")->capture_default_str();
  if (with_tag) cmd->add_option("--tag", c.tag, "Model or oracle tag")->capture_default_str();
  cmd->add_option("--dataset", c.dataset, "Dataset file (default: {store}/{setting}/dataset.jsonl)");
  cmd->add_option("--seed", c.seed, "Seed for sampling, splits and probe initialization")->capture_default_str();
}

void add_probe(CLI::App* cmd, ProbeOptions& p) {
  cmd->add_option("--layers", p.layers, "Layers to process (default: all in the activation file)");
  cmd->add_option("--pca-dim", p.pca_dim, "Retained PCA components")->capture_default_str();
  cmd->add_option("--train-split", p.train_split, "Fraction of examples used for training")->capture_default_str();
  cmd->add_option("--lr", p.lr, "Distance probe learning rate")->capture_default_str();
  cmd->add_option("--weight-decay", p.weight_decay, "Distance probe weight decay")->capture_default_str();
  cmd->add_option("--steps", p.steps, "Distance probe optimizer steps")->capture_default_str();
  cmd->add_option("--depth-lambda", p.depth_lambda, "Depth probe ridge penalty")->capture_default_str();
}

int fail(const char* kind, int code, const std::string& message) {
  nlohmann::json j{{"error", kind}, {"exit", code}, {"message", message}};
  std::cerr << j.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical structure probes for tree traversal reasoning", "hprobe"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  CreateDatasetOptions cd;
  auto* c_cd = app.add_subcommand("create-dataset", "Sample a tree traversal dataset");
  add_common(c_cd, cd.common, false);
  c_cd->add_option("--depth-range", cd.depth_range, "Tree depth range LO HI")->expected(2)->capture_default_str();
  c_cd->add_option("--steps-range", cd.steps_range, "Traversal step range LO HI")->expected(2)->capture_default_str();
  c_cd->add_option("--num-samples", cd.num_samples, "Number of examples")->capture_default_str();
  c_cd->add_option("--sparsity", cd.sparsity, "Node removal fraction range LO HI (sparsified trees)")->expected(2);
  c_cd->add_option("--out", cd.out, "Output file (default: the store dataset path)");

  SynthOptions sy;
  auto* c_sy = app.add_subcommand("synth", "Plant a hierarchical subspace in synthetic activations");
  add_common(c_sy, sy.common);
  c_sy->add_option("--preset", sy.preset, "Oracle preset: default or pca-sweep")->capture_default_str();
  c_sy->add_option("--layers", sy.layers, "Layer indices to emit")->capture_default_str();
  auto* o_dim = c_sy->add_option("--dim", sy.dim, "Ambient dimension")->capture_default_str();
  auto* o_rank = c_sy->add_option("--rank", sy.rank, "Planted rank")->capture_default_str();
  auto* o_noise = c_sy->add_option("--noise", sy.noise, "Isotropic noise sigma")->capture_default_str();
  auto* o_inexact = c_sy->add_option("--inexact-fraction", sy.inexact_fraction, "Fraction of inexact responses")
                        ->capture_default_str();
  auto* o_cot = c_sy->add_option("--cot-rows", sy.cot_rows, "Chain-of-thought rows per example")->capture_default_str();

  EvalProbeOptions ep;
  auto* c_ep = app.add_subcommand("eval-probe", "Train and evaluate distance and depth probes per layer");
  add_common(c_ep, ep.common);
  add_probe(c_ep, ep.probe);
  c_ep->add_option("--proj-dims", ep.proj_dims, "Distance probe ranks p")->capture_default_str();
  c_ep->add_option("--pca-sweep", ep.pca_sweep, "Retained-component counts for the sweep (oracle data only)");

  InterveneOptions iv;
  auto* c_iv = app.add_subcommand("intervene", "Ablate subspaces and score the effect");
  add_common(c_iv, iv.common);
  c_iv->add_option("--layers", iv.layers, "Layers to ablate (default: all in the activation file)");
  c_iv->add_option("--proj-dim", iv.proj_dim, "Which trained distance probe rank to use")->capture_default_str();
  c_iv->add_option("--ablation-kind", iv.kinds, "probe, random, pca_cot, pca_nodes, full, none")
      ->capture_default_str();
  auto* f_rescue = c_iv->add_flag("--include-rescue", iv.include_rescue, "Also score originally inexact examples");
  auto* f_bases = c_iv->add_flag("--bases-only", iv.bases_only, "Only export ablation bases for external models");
  f_bases->excludes(f_rescue);
  c_iv->add_flag("--skip-causal", iv.skip_causal, "Skip the oracle re-training check");

  SimilarityOptions si;
  auto* c_si = app.add_subcommand("similarity", "Cross-split subspace stability");
  add_common(c_si, si.common);
  add_probe(c_si, si.probe);
  c_si->add_option("--proj-dim", si.proj_dim, "Distance probe rank")->capture_default_str();
  c_si->add_option("--folds", si.folds, "Disjoint training folds")->capture_default_str();
  c_si->add_option("--null-draws", si.null_draws, "Monte-Carlo draws for the random null")->capture_default_str();

  GridOptions gr;
  auto* c_gr = app.add_subcommand("grid", "Hyperparameter grid for the distance probe");
  add_common(c_gr, gr.common);
  add_probe(c_gr, gr.probe);
  c_gr->add_option("--grid-p", gr.grid_p, "Probe ranks")->capture_default_str();
  c_gr->add_option("--grid-lr", gr.grid_lr, "Learning rates")->capture_default_str();
  c_gr->add_option("--grid-steps", gr.grid_steps, "Step counts")->capture_default_str();

  ReportOptions rp;
  auto* c_rp = app.add_subcommand("report", "Render tables and figures from stored artifacts");
  add_common(c_rp, rp.common, false);
  c_rp->add_option("--proj-dim", rp.proj_dim, "Probe rank shown in layer-wise results")->capture_default_str();
  c_rp->add_option("--out", rp.out, "Output directory (default: {store}/{setting}/report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", 2, e.what());
  }
  if (*c_sy && sy.preset == "pca-sweep") {
    for (auto* opt : {o_dim, o_rank, o_noise, o_inexact, o_cot}) {
      if (opt->count() > 0) return fail("usage", 2, opt->get_name() + " conflicts with --preset pca-sweep");
    }
  }

  try {
    if (*c_cd) create_dataset(cd);
    else if (*c_sy) synth(sy);
    else if (*c_ep) eval_probe(ep);
    else if (*c_iv) intervene(iv);
    else if (*c_si) similarity(si);
    else if (*c_gr) grid(gr);
    else if (*c_rp) report(rp);
  } catch (const DataIntegrityError& e) {
    return fail("data_integrity", 3, e.what());
  } catch (const NumericalError& e) {
    return fail("numerical", 4, e.what());
  } catch (const InputError& e) {
    return fail("usage", 2, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail("usage", 2, e.what());
  } catch (const std::exception& e) {
    return fail("internal", 1, e.what());
  }
  return 0;
}
