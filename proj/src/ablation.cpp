#include "hprobe/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hprobe/error.hpp"
#include "hprobe/rng.hpp"

namespace hprobe {

namespace {

Basis top_components(const Matrix& rows, int rank, Provenance kind) {
  const PcaModel m = pca_fit(rows, rank);
  return Basis(m.components.transpose(), kind);
}

std::map<std::string, const ScoredResponse*> by_id(const std::vector<ScoredResponse>& rs) {
  std::map<std::string, const ScoredResponse*> out;
  for (const auto& r : rs) {
    if (!out.emplace(r.id, &r).second) throw DataIntegrityError("duplicate response for " + r.id);
  }
  return out;
}

double pearson_after(const ActivationSet& acts, const Basis& basis, const DatasetIndex& index, const Split& split,
                     const std::map<std::string, bool>& exact, const ProbeConfig& config, std::uint64_t seed) {
  const ActivationSet ablated = ablate_set(acts, basis);
  const LayerFit fit = fit_layer(ablated, index, split, config);
  return evaluate(fit, ablated, index, split, exact, seed).test_exact.distance.pearson;
}

}  // namespace

Basis build_basis(const AblationSpec& spec, const ActivationSet& acts, const LayerFit* fit) {
  const int d = acts.hidden_dim();
  switch (spec.kind) {
    case Provenance::kProbe:
      if (!fit) throw InputError("probe ablation needs trained probes");
      return hierarchical_subspace(fit->distance, fit->depth, fit->pca);
    case Provenance::kRandom: {
      if (spec.rank < 1 || spec.rank > d) throw InputError("random ablation rank out of range");
      Rng rng(spec.seed);
      Matrix g(d, spec.rank);
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = rng.normal();
      }
      Basis b = orthonormalize(g, Provenance::kRandom);
      if (b.rank() != spec.rank) throw NumericalError("random basis lost rank");
      return b;
    }
    case Provenance::kPcaCot: {
      bool has_pool = false;
      for (const auto& a : acts.alignment) has_pool = has_pool || !a.is_node();
      if (!has_pool) throw InputError("pca_cot ablation needs chain-of-thought rows beyond the PATH tokens");
      return top_components(acts.rows, spec.rank, Provenance::kPcaCot);
    }
    case Provenance::kPcaNodes: {
      const ActivationSet nodes = node_rows(acts);
      if (nodes.size() == 0) throw InputError("pca_nodes ablation needs PATH node rows");
      return top_components(nodes.rows, spec.rank, Provenance::kPcaNodes);
    }
    case Provenance::kFull:
      return Basis::identity(d);
    case Provenance::kNone:
      return Basis::empty(d);
    default:
      throw InputError("cannot build an ablation basis of kind " + std::string(to_string(spec.kind)));
  }
}

std::vector<Basis> standard_bases(const ActivationSet& acts, const LayerFit& fit, std::uint64_t seed) {
  std::vector<Basis> out;
  out.push_back(build_basis({Provenance::kProbe, 0, acts.layer, seed}, acts, &fit));
  const int r = out.front().rank();
  out.push_back(build_basis({Provenance::kRandom, r, acts.layer, seed}, acts, &fit));
  const bool has_pool =
      std::any_of(acts.alignment.begin(), acts.alignment.end(), [](const RowAlignment& a) { return !a.is_node(); });
  if (has_pool) out.push_back(build_basis({Provenance::kPcaCot, r, acts.layer, seed}, acts, &fit));
  out.push_back(build_basis({Provenance::kPcaNodes, r, acts.layer, seed}, acts, &fit));
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].rank() != r) throw NumericalError("rank-matched ablation bases differ in rank");
  }
  out.push_back(Basis::identity(acts.hidden_dim()));
  out.push_back(Basis::empty(acts.hidden_dim()));
  return out;
}

ActivationSet ablate_set(const ActivationSet& acts, const Basis& basis) {
  return {acts.layer, ablate_rows(acts.rows, basis), acts.alignment};
}

KindAccuracy accuracy_protocol(const std::string& kind, const std::vector<ScoredResponse>& before,
                               const std::vector<ScoredResponse>& after, bool include_rescue) {
  const auto b = by_id(before);
  const auto a = by_id(after);
  for (const auto& [id, r] : a) {
    if (!b.count(id)) throw DataIntegrityError("ablated response " + id + " has no baseline response");
  }
  KindAccuracy k;
  k.kind = kind;
  std::size_t kept = 0;
  std::size_t rescued = 0;
  for (const auto& [id, rb] : b) {
    if (!rb->exact && !include_rescue) continue;
    auto it = a.find(id);
    if (it == a.end()) throw DataIntegrityError("no ablated response for " + id);
    const ScoredResponse& ra = *it->second;
    ++k.n;
    k.exact_before += rb->exact;
    k.exact_after += ra.exact;
    k.partial_before += rb->partial;
    k.partial_after += ra.partial;
    if (rb->exact) {
      ++k.n_exact;
      kept += ra.exact;
    } else {
      ++k.n_inexact;
      rescued += ra.exact;
    }
  }
  if (k.n > 0) {
    const double n = static_cast<double>(k.n);
    k.exact_before /= n;
    k.exact_after /= n;
    k.partial_before /= n;
    k.partial_after /= n;
  }
  k.exact_retention = k.n_exact ? static_cast<double>(kept) / static_cast<double>(k.n_exact) : 0.0;
  if (include_rescue) {
    k.inexact_rescue = k.n_inexact ? static_cast<double>(rescued) / static_cast<double>(k.n_inexact) : 0.0;
  }
  return k;
}

std::vector<LogitSummary> logit_protocol(const std::vector<LogitShift>& shifts) {
  std::map<std::pair<int, std::string>, std::vector<double>> groups;
  for (const auto& s : shifts) groups[{s.layer, s.kind}].push_back(s.mean_abs_shift);
  std::vector<LogitSummary> out;
  for (const auto& [key, xs] : groups) {
    LogitSummary s;
    s.layer = key.first;
    s.kind = key.second;
    s.n = xs.size();
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(s.n);
    double var = 0.0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    const double half = s.n > 1 ? 1.96 * std::sqrt(var / static_cast<double>(s.n - 1) / static_cast<double>(s.n)) : 0.0;
    s.ci_low = s.mean - half;
    s.ci_high = s.mean + half;
    out.push_back(s);
  }
  std::stable_sort(out.begin(), out.end(), [](const LogitSummary& x, const LogitSummary& y) {
    return x.layer != y.layer ? x.layer < y.layer : x.mean > y.mean;
  });
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].rank = (i > 0 && out[i - 1].layer == out[i].layer) ? out[i - 1].rank + 1 : 1;
  }
  return out;
}

ojson ablation_report_to_json(const AblationReport& r) {
  ojson j;
  j["layer"] = r.layer;
  j["population"] = r.include_rescue ? "all" : "exact_only";
  j["accuracy"] = ojson::array();
  for (const auto& k : r.accuracy) {
    ojson a;
    a["kind"] = k.kind;
    a["n"] = k.n;
    a["n_exact"] = k.n_exact;
    a["n_inexact"] = k.n_inexact;
    a["exact_before"] = k.exact_before;
    a["exact_after"] = k.exact_after;
    a["partial_before"] = k.partial_before;
    a["partial_after"] = k.partial_after;
    a["exact_retention"] = k.exact_retention;
    a["inexact_rescue"] = k.inexact_rescue ? ojson(*k.inexact_rescue) : ojson(nullptr);
    j["accuracy"].push_back(a);
  }
  j["logit"] = ojson::array();
  for (const auto& s : r.logit) {
    j["logit"].push_back({{"layer", s.layer},
                          {"kind", s.kind},
                          {"n", s.n},
                          {"mean", s.mean},
                          {"ci_low", s.ci_low},
                          {"ci_high", s.ci_high},
                          {"rank", s.rank}});
  }
  return j;
}

AblationReport ablation_report_from_json(const ojson& j) {
  try {
    AblationReport r;
    r.layer = j.at("layer").get<int>();
    r.include_rescue = j.at("population") == "all";
    for (const auto& a : j.at("accuracy")) {
      KindAccuracy k;
      k.kind = a.at("kind").get<std::string>();
      k.n = a.at("n").get<std::size_t>();
      k.n_exact = a.at("n_exact").get<std::size_t>();
      k.n_inexact = a.at("n_inexact").get<std::size_t>();
      k.exact_before = a.at("exact_before").get<double>();
      k.exact_after = a.at("exact_after").get<double>();
      k.partial_before = a.at("partial_before").get<double>();
      k.partial_after = a.at("partial_after").get<double>();
      k.exact_retention = a.at("exact_retention").get<double>();
      if (!a.at("inexact_rescue").is_null()) k.inexact_rescue = a.at("inexact_rescue").get<double>();
      r.accuracy.push_back(k);
    }
    for (const auto& s : j.at("logit")) {
      r.logit.push_back({s.at("layer").get<int>(), s.at("kind").get<std::string>(), s.at("n").get<std::size_t>(),
                         s.at("mean").get<double>(), s.at("ci_low").get<double>(), s.at("ci_high").get<double>(),
                         s.at("rank").get<int>()});
    }
    return r;
  } catch (const nlohmann::json::exception& ex) {
    throw DataIntegrityError(std::string("malformed ablation report: ") + ex.what());
  }
}

CausalReport oracle_causal_check(const ActivationSet& acts, const DatasetIndex& index, const Split& split,
                                 const std::map<std::string, bool>& exact, const ProbeConfig& config,
                                 std::uint64_t seed) {
  const LayerFit fit = fit_layer(acts, index, split, config);
  CausalReport r;
  r.unablated = evaluate(fit, acts, index, split, exact, seed).test_exact.distance.pearson;
  const Basis h = build_basis({Provenance::kProbe, 0, acts.layer, seed}, acts, &fit);
  r.rank = h.rank();
  const Basis random = build_basis({Provenance::kRandom, h.rank(), acts.layer, derive_seed(seed, 7)}, acts, &fit);
  r.probe = pearson_after(acts, h, index, split, exact, config, seed);
  r.random = pearson_after(acts, random, index, split, exact, config, seed);
  r.none = pearson_after(acts, Basis::empty(acts.hidden_dim()), index, split, exact, config, seed);
  return r;
}

ojson causal_report_to_json(const CausalReport& r) {
  ojson j;
  j["rank"] = r.rank;
  j["unablated"] = r.unablated;
  j["probe"] = r.probe;
  j["random"] = r.random;
  j["none"] = r.none;
  return j;
}

}  // namespace hprobe
