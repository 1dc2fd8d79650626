#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wfbench/classifiers.hpp"
#include "wfbench/cluster.hpp"
#include "wfbench/defenses.hpp"
#include "wfbench/designate.hpp"
#include "wfbench/lof.hpp"
#include "wfbench/parallel.hpp"
#include "wfbench/rng.hpp"
#include "wfbench/synth.hpp"
#include "wfbench/trace.hpp"

namespace wfbench {

/// One closed-world experiment: k sites per trial, per-site train/test
/// split, a defense applied to both subsets, `trials` repetitions.
struct ExperimentConfig {
  int k = 32;
  int t_train = 16;
  int t_test = 4;
  int trials = 10;
  ClassifierKind classifier = ClassifierKind::LL;
  DefenseConfig defense;
  std::uint64_t seed = 0;
  bool train_on_undefended = false;
  bool shuffle_labels = false;  // sanity baseline: random training labels

  // clustering inputs used by tgpsm and traffic-morph
  int m = 10;
  int n_clusters = 10;
  ClusterAlgorithm cluster_algorithm = ClusterAlgorithm::PAM;
  int k_neighbors = 0;  // 0 = auto
};

struct TrialResult {
  double accuracy = 0.0;          // correct / total test traces
  double overhead_percent = 0.0;  // mean per-trace byte overhead
  double delay_percent = 0.0;     // mean per-trace duration overhead
  std::uint64_t seed = 0;
};

struct ExperimentReport {
  std::string countermeasure;
  std::string parameters;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  double overhead_mean = 0.0;
  double overhead_std = 0.0;
  double delay_mean = 0.0;
  int trials = 0;
};

namespace detail {

inline bool needs_candidates(DefenseKind kind) {
  return kind == DefenseKind::TGPSM || kind == DefenseKind::TrafficMorph;
}

struct SiteSplit {
  const Website* site = nullptr;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

}  // namespace detail

/// Runs one seeded trial: sample k eligible sites, split each site's traces
/// into train/test, defend every trace in both subsets, train the classifier
/// on the defended training set, and score the defended test set. Sites with
/// fewer than t_train + t_test traces fall back to a 2-train / 4-test split.
inline TrialResult run_trial(const Dataset& dataset, const ExperimentConfig& config,
                             std::uint64_t trial_seed) {
  config.defense.validate();
  const int full_need = config.t_train + config.t_test;
  const int fallback_need = 2 + 4;

  // tgpsm / traffic-morph target selection works on the candidate set
  CandidateSet candidates;
  Clustering clustering;
  ClusterDistanceMatrix cd;
  const bool relational = detail::needs_candidates(config.defense.kind);
  if (relational) {
    const int kn = config.k_neighbors > 0 ? config.k_neighbors : default_lof_neighbors(dataset);
    candidates = select_candidates(dataset, config.m, kn);
    if (config.defense.kind == DefenseKind::TGPSM) {
      const DistanceMatrix dm = pairwise_distances(candidates.slice_matrix());
      clustering = cluster(config.cluster_algorithm, dm, config.n_clusters,
                           mix_seed(trial_seed, 0xc1));
      cd = cluster_distance_matrix(clustering, dm);
    }
  }

  std::vector<const Website*> eligible;
  for (const auto& [site_id, ws] : dataset.websites) {
    const auto n = static_cast<int>(ws.traces.size());
    if (n < std::min(full_need, fallback_need)) continue;
    if (relational && candidates.find(site_id) == nullptr) continue;
    eligible.push_back(&ws);
  }
  if (eligible.size() < static_cast<std::size_t>(config.k)) {
    throw DataError("run_trial: only " + std::to_string(eligible.size()) + " eligible sites, need " +
                    std::to_string(config.k));
  }

  Rng sample_rng(mix_seed(trial_seed, 0x5a3));
  std::vector<std::size_t> order(eligible.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  sample_rng.shuffle(order);
  order.resize(static_cast<std::size_t>(config.k));
  std::sort(order.begin(), order.end());

  std::vector<detail::SiteSplit> splits;
  splits.reserve(order.size());
  for (const std::size_t idx : order) {
    const Website& ws = *eligible[idx];
    const auto n = static_cast<int>(ws.traces.size());
    const int t_tr = n >= full_need ? config.t_train : 2;
    const int t_te = n >= full_need ? config.t_test : 4;
    std::vector<std::size_t> shuffled(ws.traces.size());
    for (std::size_t i = 0; i < shuffled.size(); ++i) shuffled[i] = i;
    Rng split_rng(mix_seed(trial_seed, 0x5b1, fnv1a64(ws.site_id)));
    split_rng.shuffle(shuffled);
    detail::SiteSplit split;
    split.site = &ws;
    split.train.assign(shuffled.begin(), shuffled.begin() + t_tr);
    split.test.assign(shuffled.begin() + t_tr, shuffled.begin() + t_tr + t_te);
    splits.push_back(std::move(split));
  }

  // per-site defense context, fixed for the whole trial
  std::map<std::string, Designation> designations;
  std::map<std::string, SizeDistribution> morph_targets;
  if (config.defense.kind == DefenseKind::TGPSM) {
    for (const auto& split : splits) {
      DesignationRequest req{split.site->site_id, config.defense.morph.d,
                             mix_seed(trial_seed, 0xde5)};
      designations.emplace(split.site->site_id, designate(req, clustering, cd, candidates));
    }
  } else if (config.defense.kind == DefenseKind::TrafficMorph) {
    for (const auto& split : splits) {
      Rng pick_rng(mix_seed(trial_seed, 0x7a9, fnv1a64(split.site->site_id)));
      std::vector<const CandidateEntry*> others;
      for (const auto& e : candidates.entries) {
        if (e.site_id != split.site->site_id) others.push_back(&e);
      }
      const CandidateEntry* target = others[pick_rng.below(others.size())];
      morph_targets.emplace(split.site->site_id, empirical_distribution(target->trace));
    }
  }

  double overhead_sum = 0.0, delay_sum = 0.0;
  std::size_t defended_count = 0;
  std::vector<LabeledTrace> train_set;
  std::vector<std::pair<Trace, std::string>> test_set;

  for (const auto& split : splits) {
    const std::string& site_id = split.site->site_id;
    DefenseContext ctx;
    if (const auto it = designations.find(site_id); it != designations.end()) {
      ctx.designation = &it->second;
    }
    if (const auto it = morph_targets.find(site_id); it != morph_targets.end()) {
      ctx.morph_target = &it->second;
    }
    auto defend = [&](std::size_t trace_idx) {
      const Trace& original = split.site->traces[trace_idx];
      Trace defended = apply_defense(config.defense, original, mix_seed(trial_seed, 0xf00, fnv1a64(site_id), trace_idx), ctx);
      const auto orig_bytes = static_cast<double>(total_bytes(original));
      overhead_sum += 100.0 * (static_cast<double>(total_bytes(defended)) - orig_bytes) / orig_bytes;
      const double orig_ms = trace_stats(original).duration_ms;
      if (orig_ms > 0.0) {
        delay_sum += 100.0 * (trace_stats(defended).duration_ms - orig_ms) / orig_ms;
      }
      ++defended_count;
      return defended;
    };
    for (const std::size_t idx : split.train) {
      const Trace& original = split.site->traces[idx];
      Trace defended = defend(idx);
      train_set.push_back(LabeledTrace{config.train_on_undefended ? original : std::move(defended),
                                       site_id});
    }
    for (const std::size_t idx : split.test) {
      test_set.emplace_back(defend(idx), site_id);
    }
  }

  if (config.shuffle_labels) {
    Rng label_rng(mix_seed(trial_seed, 0x1ab));
    std::vector<std::string> labels;
    labels.reserve(train_set.size());
    for (const auto& item : train_set) labels.push_back(item.label);
    label_rng.shuffle(labels);
    for (std::size_t i = 0; i < train_set.size(); ++i) train_set[i].label = labels[i];
  }

  const TrainedModel model = train(config.classifier, train_set, mix_seed(trial_seed, 0x77a));
  std::size_t correct = 0;
  for (const auto& [trace, label] : test_set) {
    if (predict(model, trace).site_id == label) ++correct;
  }

  TrialResult result;
  result.accuracy = static_cast<double>(correct) / static_cast<double>(test_set.size());
  result.overhead_percent = overhead_sum / static_cast<double>(defended_count);
  result.delay_percent = delay_sum / static_cast<double>(defended_count);
  result.seed = trial_seed;
  return result;
}

/// Repeats run_trial with seeds derived from the master seed and aggregates
/// mean and sample standard deviation.
inline ExperimentReport run_experiment(const Dataset& dataset, const ExperimentConfig& config) {
  if (config.trials < 1) throw DataError("run_experiment: trials must be >= 1");
  std::vector<TrialResult> results(static_cast<std::size_t>(config.trials));
  parallel_for(results.size(), [&](std::size_t i) {
    results[i] = run_trial(dataset, config, mix_seed(config.seed, 0xe0, i));
  });

  auto mean_of = [&](auto getter) {
    double sum = 0.0;
    for (const auto& r : results) sum += getter(r);
    return sum / static_cast<double>(results.size());
  };
  auto std_of = [&](auto getter, double mean) {
    if (results.size() < 2) return 0.0;
    double ss = 0.0;
    for (const auto& r : results) {
      const double diff = getter(r) - mean;
      ss += diff * diff;
    }
    return std::sqrt(ss / static_cast<double>(results.size() - 1));
  };

  ExperimentReport report;
  report.countermeasure = config.defense.label();
  report.parameters = config.defense.parameter_string();
  report.trials = config.trials;
  auto acc = [](const TrialResult& r) { return r.accuracy; };
  auto ovh = [](const TrialResult& r) { return r.overhead_percent; };
  auto dly = [](const TrialResult& r) { return r.delay_percent; };
  report.accuracy_mean = mean_of(acc);
  report.accuracy_std = std_of(acc, report.accuracy_mean);
  report.overhead_mean = mean_of(ovh);
  report.overhead_std = std_of(ovh, report.overhead_mean);
  report.delay_mean = mean_of(dly);
  return report;
}

namespace detail {

inline std::string fmt4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return std::string(buf);
}

}  // namespace detail

/// Result CSV: one row per experiment, accuracy reported in percent.
inline void emit_report(const std::vector<ExperimentReport>& reports,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write report: " + path.string());
  out << "countermeasure,parameters,overhead,accuracy_mean,accuracy_std\n";
  for (const auto& r : reports) {
    out << r.countermeasure << "," << r.parameters << "," << detail::fmt4(r.overhead_mean) << ","
        << detail::fmt4(100.0 * r.accuracy_mean) << "," << detail::fmt4(100.0 * r.accuracy_std)
        << "\n";
  }
}

/// Plot-ready sweep file: one row per tuning-factor value.
inline void emit_trend(const std::vector<std::pair<int, ExperimentReport>>& sweep,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write trend file: " + path.string());
  out << "d,overhead_percent,accuracy_percent\n";
  for (const auto& [d, r] : sweep) {
    out << d << "," << detail::fmt4(r.overhead_mean) << "," << detail::fmt4(100.0 * r.accuracy_mean)
        << "\n";
  }
}

// --- experiment config file (key = value lines with [defense] sections) ---

struct ConfigFile {
  std::map<std::string, std::string> top;
  std::map<std::string, std::map<std::string, std::string>> sections;
};

inline ConfigFile parse_config_file(std::string_view text) {
  ConfigFile cfg;
  std::string section;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    line = detail::trim(line);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw DataError("config line " + std::to_string(line_no) + ": bad section");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw DataError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string value(detail::trim(line.substr(eq + 1)));
    if (key.empty()) throw DataError("config line " + std::to_string(line_no) + ": empty key");
    if (section.empty()) {
      cfg.top[key] = value;
    } else {
      cfg.sections[section][key] = value;
    }
  }
  return cfg;
}

/// A full run request parsed from a config file: dataset source, the base
/// experiment, and (for tgpsm) the list of tuning-factor values to sweep.
struct ExperimentPlan {
  std::string dataset_path;  // empty means synthetic
  int synth_sites = 40;
  int synth_traces = 20;
  std::uint64_t dataset_seed = 0;
  ExperimentConfig base;
  std::vector<int> tgpsm_d_values;  // one experiment per value
};

namespace detail {

inline double to_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  if (!parse_double(value, out)) throw DataError("config: bad number for '" + key + "'");
  return out;
}

inline int to_int(const std::string& key, const std::string& value) {
  long out = 0;
  if (!parse_int(value, out)) throw DataError("config: bad integer for '" + key + "'");
  return static_cast<int>(out);
}

inline bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw DataError("config: bad boolean for '" + key + "'");
}

inline std::vector<int> to_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= value.size()) {
    const auto comma = value.find(',', pos);
    const std::string item(
        trim(std::string_view(value).substr(pos, comma == std::string::npos ? value.size() - pos
                                                                            : comma - pos)));
    if (!item.empty()) out.push_back(to_int(key, item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw DataError("config: empty list for '" + key + "'");
  return out;
}

}  // namespace detail

inline ExperimentPlan parse_experiment_plan(const ConfigFile& cfg) {
  ExperimentPlan plan;
  auto top = [&](const char* key) -> const std::string* {
    const auto it = cfg.top.find(key);
    return it == cfg.top.end() ? nullptr : &it->second;
  };

  if (const auto* v = top("dataset")) {
    if (*v != "synthetic") plan.dataset_path = *v;
  }
  if (const auto* v = top("sites")) plan.synth_sites = detail::to_int("sites", *v);
  if (const auto* v = top("traces")) plan.synth_traces = detail::to_int("traces", *v);
  if (const auto* v = top("seed")) plan.base.seed = static_cast<std::uint64_t>(detail::to_int("seed", *v));
  plan.dataset_seed = plan.base.seed;
  if (const auto* v = top("dataset_seed")) {
    plan.dataset_seed = static_cast<std::uint64_t>(detail::to_int("dataset_seed", *v));
  }
  if (const auto* v = top("k")) plan.base.k = detail::to_int("k", *v);
  if (const auto* v = top("t_train")) plan.base.t_train = detail::to_int("t_train", *v);
  if (const auto* v = top("t_test")) plan.base.t_test = detail::to_int("t_test", *v);
  if (const auto* v = top("trials")) plan.base.trials = detail::to_int("trials", *v);
  if (const auto* v = top("classifier")) plan.base.classifier = classifier_from_name(*v);
  if (const auto* v = top("train_on_undefended")) {
    plan.base.train_on_undefended = detail::to_bool("train_on_undefended", *v);
  }
  if (const auto* v = top("shuffle_labels")) {
    plan.base.shuffle_labels = detail::to_bool("shuffle_labels", *v);
  }
  if (plan.base.k < 2) throw DataError("config: k must be >= 2");
  if (plan.base.t_train < 1 || plan.base.t_test < 1) throw DataError("config: bad split sizes");

  std::string defense = "none";
  if (const auto* v = top("defense")) defense = *v;
  plan.base.defense.kind = defense_from_name(defense);

  const auto sec_it = cfg.sections.find(defense);
  const std::map<std::string, std::string> empty;
  const auto& sec = sec_it == cfg.sections.end() ? empty : sec_it->second;

  if (plan.base.defense.kind == DefenseKind::TGPSM) {
    MorphParams& mp = plan.base.defense.morph;
    plan.tgpsm_d_values = {1};
    for (const auto& [key, value] : sec) {
      if (key == "d") {
        plan.tgpsm_d_values = detail::to_int_list(key, value);
      } else if (key == "sim_thresh") {
        mp.sim_thresh = detail::to_double(key, value);
      } else if (key == "alpha") {
        mp.alpha = detail::to_double(key, value);
      } else if (key == "m") {
        mp.m = detail::to_int(key, value);
        plan.base.m = mp.m;
      } else if (key == "bw_d_factor") {
        mp.bw_d_factor = detail::to_double(key, value);
      } else if (key == "n_clusters") {
        plan.base.n_clusters = detail::to_int(key, value);
      } else if (key == "algorithm") {
        plan.base.cluster_algorithm = cluster_algorithm_from_name(value);
      } else if (key == "k_neighbors") {
        plan.base.k_neighbors = detail::to_int(key, value);
      } else {
        throw DataError("config: unknown tgpsm key '" + key + "'");
      }
    }
    mp.d = plan.tgpsm_d_values.front();
  } else {
    for (const auto& [key, value] : sec) {
      plan.base.defense.parameters[key] = detail::to_double(key, value);
    }
  }
  plan.base.defense.validate();
  return plan;
}

/// Loads or generates the dataset a plan asks for.
inline Dataset plan_dataset(const ExperimentPlan& plan) {
  if (!plan.dataset_path.empty()) return load_dataset(plan.dataset_path);
  return synth_generate(SynthProfile{}, plan.synth_sites, plan.synth_traces, plan.dataset_seed);
}

/// Runs a plan start to finish; for tgpsm the d values are swept in order.
/// Returns one report per experiment plus the (d, report) sweep pairs.
inline std::vector<ExperimentReport> run_plan(const Dataset& dataset, const ExperimentPlan& plan,
                                              std::vector<std::pair<int, ExperimentReport>>* sweep) {
  std::vector<ExperimentReport> reports;
  if (plan.base.defense.kind == DefenseKind::TGPSM) {
    for (const int d : plan.tgpsm_d_values) {
      ExperimentConfig cfg = plan.base;
      cfg.defense.morph.d = d;
      reports.push_back(run_experiment(dataset, cfg));
      if (sweep) sweep->emplace_back(d, reports.back());
    }
  } else {
    reports.push_back(run_experiment(dataset, plan.base));
  }
  return reports;
}

}  // namespace wfbench
