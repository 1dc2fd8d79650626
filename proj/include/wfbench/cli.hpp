#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wfbench/classifiers.hpp"
#include "wfbench/cluster.hpp"
#include "wfbench/defenses.hpp"
#include "wfbench/designate.hpp"
#include "wfbench/eval.hpp"
#include "wfbench/lof.hpp"
#include "wfbench/synth.hpp"
#include "wfbench/trace.hpp"
#include "wfbench/validity.hpp"

namespace wfbench::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitInternal = 3;

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << content;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  for (;;) {
    const auto comma = line.find(',', pos);
    fields.push_back(line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return fields;
}

struct DefenseFlags {
  std::string defense = "none";
  std::uint64_t seed = 0;
  double tau = 10000.0;
  double rho = 20.0;
  double rho_out = 40.0;
  double rho_in = 10.0;
  int d_bytes = 1000;
  int pad_multiple = 100;
  double sim_thresh = 0.7;
  int d = 1;
  double alpha = 0.01;
  int m = 10;
  double bw_d_factor = 25.0;
  int n_clusters = 10;
  std::string algo = "pam";
  int k_neighbors = 0;
  int im = -1;  // tgpsm importance; defaults to d
  std::string data;
  std::string site;
};

}  // namespace detail

inline int cmd_gen_dataset(int sites, int traces, std::uint64_t seed, const std::string& out) {
  const Dataset ds = synth_generate(SynthProfile{}, sites, traces, seed);
  save_dataset(ds, out);
  std::cout << "wrote " << ds.websites.size() << " sites x " << traces << " traces to " << out
            << "\n";
  return kExitOk;
}

inline int cmd_candidates(const std::string& data, int m, int k_neighbors, const std::string& out) {
  std::size_t skipped_files = 0;
  const Dataset ds = load_dataset(data, &skipped_files);
  const int kn = k_neighbors > 0 ? k_neighbors : default_lof_neighbors(ds);
  std::size_t skipped_sites = 0;
  const CandidateSet cands = select_candidates(ds, m, kn, &skipped_sites);
  std::ostringstream csv;
  csv << "site_id,trace_index,lof\n";
  for (const auto& e : cands.entries) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", e.lof_score);
    csv << e.site_id << "," << e.trace_index << "," << buf << "\n";
  }
  detail::write_file(out, csv.str());
  if (skipped_files > 0) std::cerr << "warning: skipped " << skipped_files << " bad trace files\n";
  if (skipped_sites > 0) std::cerr << "warning: skipped " << skipped_sites << " small sites\n";
  std::cout << "wrote " << cands.entries.size() << " candidates to " << out << "\n";
  return kExitOk;
}

inline int cmd_cluster(const std::string& data, const std::string& algo, int k, int m,
                       int k_neighbors, std::uint64_t seed, const std::string& out) {
  const Dataset ds = load_dataset(data);
  const int kn = k_neighbors > 0 ? k_neighbors : default_lof_neighbors(ds);
  const CandidateSet cands = select_candidates(ds, m, kn);
  const DistanceMatrix dm = pairwise_distances(cands.slice_matrix());
  const Clustering c = cluster(cluster_algorithm_from_name(algo), dm, k, seed);
  std::vector<std::string> site_ids;
  site_ids.reserve(cands.entries.size());
  for (const auto& e : cands.entries) site_ids.push_back(e.site_id);
  detail::write_file(out, write_clustering(c, site_ids));
  std::cout << "wrote " << algo << " clustering (" << k << " clusters, " << site_ids.size()
            << " sites) to " << out << "\n";
  return kExitOk;
}

inline int cmd_indexes(const std::string& data, const std::string& algos_csv,
                       const std::string& k_list_csv, int m, int l_neighbors, int k_neighbors,
                       std::uint64_t seed, const std::string& out) {
  const Dataset ds = load_dataset(data);
  const int kn = k_neighbors > 0 ? k_neighbors : default_lof_neighbors(ds);
  const CandidateSet cands = select_candidates(ds, m, kn);
  const auto vectors = cands.slice_matrix();

  std::vector<ClusterAlgorithm> algos;
  for (const auto& name : detail::split_csv_line(algos_csv)) {
    algos.push_back(cluster_algorithm_from_name(name));
  }
  std::vector<int> ks;
  for (const auto& kstr : detail::split_csv_line(k_list_csv)) {
    long v = 0;
    if (!wfbench::detail::parse_int(kstr, v)) throw DataError("bad k value: " + kstr);
    ks.push_back(static_cast<int>(v));
  }

  std::ostringstream csv;
  csv << "scheme,dunn,ch,silhouette,db,connectivity,apn,ad,adm,fom\n";
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
  };
  for (const ClusterAlgorithm algo : algos) {
    for (const int k : ks) {
      const IndexReport row = index_report(algo, vectors, k, l_neighbors, seed);
      csv << row.scheme << "," << num(row.dunn) << "," << num(row.ch) << "," << num(row.silhouette)
          << "," << num(row.db) << "," << num(row.connectivity) << "," << num(row.apn) << ","
          << num(row.ad) << "," << num(row.adm) << "," << num(row.fom) << "\n";
    }
  }
  detail::write_file(out, csv.str());
  std::cout << "wrote " << algos.size() * ks.size() << " index rows to " << out << "\n";
  return kExitOk;
}

inline int cmd_apply_defense(const detail::DefenseFlags& flags, const std::string& in,
                             const std::string& out) {
  const Trace input = parse_trace_file(detail::read_file(in));

  DefenseConfig cfg;
  cfg.kind = defense_from_name(flags.defense);
  DefenseContext ctx;
  Designation designation;
  SizeDistribution distribution;

  switch (cfg.kind) {
    case DefenseKind::BuFLO:
      cfg.parameters = {{"tau", flags.tau}, {"rho", flags.rho}, {"d", static_cast<double>(flags.d_bytes)}};
      break;
    case DefenseKind::Tamaraw:
      cfg.parameters = {{"rho_out", flags.rho_out},
                        {"rho_in", flags.rho_in},
                        {"d", static_cast<double>(flags.d_bytes)},
                        {"l", static_cast<double>(flags.pad_multiple)}};
      break;
    case DefenseKind::TrafficMorph: {
      cfg.parameters = {{"sim_thresh", flags.sim_thresh}};
      if (flags.data.empty()) throw DataError("traffic-morph needs --data for the target pool");
      const Dataset ds = load_dataset(flags.data);
      const int kn = flags.k_neighbors > 0 ? flags.k_neighbors : default_lof_neighbors(ds);
      const CandidateSet cands = select_candidates(ds, flags.m, kn);
      std::vector<const CandidateEntry*> pool;
      for (const auto& e : cands.entries) {
        if (flags.site.empty() || e.site_id != flags.site) pool.push_back(&e);
      }
      if (pool.empty()) throw DataError("traffic-morph: no target candidates");
      Rng rng(mix_seed(flags.seed, 0x7a9));
      distribution = empirical_distribution(pool[rng.below(pool.size())]->trace);
      ctx.morph_target = &distribution;
      break;
    }
    case DefenseKind::TGPSM: {
      cfg.morph = MorphParams{flags.d, flags.sim_thresh, flags.m, flags.alpha, flags.bw_d_factor};
      if (flags.data.empty() || flags.site.empty()) {
        throw DataError("tgpsm needs --data and --site for target designation");
      }
      const Dataset ds = load_dataset(flags.data);
      const int kn = flags.k_neighbors > 0 ? flags.k_neighbors : default_lof_neighbors(ds);
      const CandidateSet cands = select_candidates(ds, flags.m, kn);
      const DistanceMatrix dm = pairwise_distances(cands.slice_matrix());
      const Clustering c =
          cluster(cluster_algorithm_from_name(flags.algo), dm, flags.n_clusters, flags.seed);
      const ClusterDistanceMatrix cd = cluster_distance_matrix(c, dm);
      const int im = flags.im >= 0 ? flags.im : flags.d;
      designation = designate(DesignationRequest{flags.site, im, flags.seed}, c, cd, cands);
      ctx.designation = &designation;
      std::cout << "target: " << designation.destination_site << " (cluster "
                << designation.destination_cluster << ", d=" << designation.effective_d << ")\n";
      break;
    }
    default:
      break;
  }
  cfg.validate();

  const Trace defended = apply_defense(cfg, input, flags.seed, ctx);
  detail::write_file(out, write_trace_file(defended));
  const auto in_bytes = static_cast<double>(total_bytes(input));
  const double overhead =
      100.0 * (static_cast<double>(total_bytes(defended)) - in_bytes) / in_bytes;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", overhead);
  std::cout << "wrote " << defended.packets.size() << " packets (" << buf << "% overhead) to "
            << out << "\n";
  return kExitOk;
}

inline int cmd_run(const std::string& config_path, const std::string& out,
                   const std::string& trend) {
  const ExperimentPlan plan = parse_experiment_plan(parse_config_file(detail::read_file(config_path)));
  const Dataset ds = plan_dataset(plan);
  std::vector<std::pair<int, ExperimentReport>> sweep;
  const std::vector<ExperimentReport> reports = run_plan(ds, plan, &sweep);
  emit_report(reports, out);
  std::cout << "wrote " << reports.size() << " result rows to " << out << "\n";
  if (!trend.empty()) {
    if (sweep.empty()) throw DataError("--trend requires a tgpsm d sweep");
    emit_trend(sweep, trend);
    std::cout << "wrote trend for " << sweep.size() << " d values to " << trend << "\n";
  }
  return kExitOk;
}

inline int cmd_report(const std::string& in, const std::string& out) {
  std::istringstream csv(detail::read_file(in));
  std::string line;
  if (!std::getline(csv, line)) throw DataError("results file is empty");
  std::vector<std::pair<int, std::pair<double, double>>> rows;  // d -> (overhead, accuracy)
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 5) throw DataError("results file: expected 5 columns");
    if (fields[0] != "tgpsm") continue;
    const auto& params = fields[1];
    const auto dpos = params.find("d=");
    if (dpos == std::string::npos) continue;
    rows.emplace_back(std::stoi(params.substr(dpos + 2)),
                      std::make_pair(std::stod(fields[2]), std::stod(fields[3])));
  }
  if (rows.empty()) throw DataError("results file has no tgpsm rows");
  std::sort(rows.begin(), rows.end());
  std::ostringstream trend;
  trend << "d,overhead_percent,accuracy_percent\n";
  for (const auto& [d, vals] : rows) {
    trend << d << "," << wfbench::detail::fmt4(vals.first) << ","
          << wfbench::detail::fmt4(vals.second) << "\n";
  }
  detail::write_file(out, trend.str());
  std::cout << "wrote trend for " << rows.size() << " d values to " << out << "\n";
  return kExitOk;
}

/// Parses and executes one command line. Exit codes: 0 success, 1 usage,
/// 2 data error, 3 internal error.
inline int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"website-fingerprinting attack/defense workbench"};
  app.require_subcommand(1);

  // gen-dataset
  auto* gen = app.add_subcommand("gen-dataset", "generate a synthetic dataset");
  int gen_sites = 32, gen_traces = 20;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--sites", gen_sites, "number of websites")->required();
  gen->add_option("--traces", gen_traces, "traces per website")->required();
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output dataset directory")->required();

  // candidates
  auto* cand = app.add_subcommand("candidates", "select per-site candidate traces by LOF");
  std::string cand_data, cand_out;
  int cand_m = 10, cand_kn = 0;
  cand->add_option("--data", cand_data, "dataset root")->required();
  cand->add_option("--m", cand_m, "slice count");
  cand->add_option("--k-neighbors", cand_kn, "LOF neighborhood (0 = auto)");
  cand->add_option("--out", cand_out, "output CSV")->required();

  // cluster
  auto* clu = app.add_subcommand("cluster", "cluster candidate traces");
  std::string clu_data, clu_algo = "pam", clu_out;
  int clu_k = 10, clu_m = 10, clu_kn = 0;
  std::uint64_t clu_seed = 0;
  clu->add_option("--data", clu_data, "dataset root")->required();
  clu->add_option("--algo", clu_algo, "pam|agnes|diana");
  clu->add_option("--k", clu_k, "number of clusters")->required();
  clu->add_option("--m", clu_m, "slice count");
  clu->add_option("--k-neighbors", clu_kn, "LOF neighborhood (0 = auto)");
  clu->add_option("--seed", clu_seed, "tie-break seed");
  clu->add_option("--out", clu_out, "output clustering file")->required();

  // indexes
  auto* idx = app.add_subcommand("indexes", "cluster validity index report");
  std::string idx_data, idx_algos = "pam,agnes,diana", idx_ks = "8,9,10", idx_out;
  int idx_m = 10, idx_l = 10, idx_kn = 0;
  std::uint64_t idx_seed = 0;
  idx->add_option("--data", idx_data, "dataset root")->required();
  idx->add_option("--algos", idx_algos, "comma-separated algorithms");
  idx->add_option("--k-list", idx_ks, "comma-separated cluster counts");
  idx->add_option("--m", idx_m, "slice count");
  idx->add_option("--l-neighbors", idx_l, "connectivity neighborhood");
  idx->add_option("--k-neighbors", idx_kn, "LOF neighborhood (0 = auto)");
  idx->add_option("--seed", idx_seed, "tie-break seed");
  idx->add_option("--out", idx_out, "output CSV")->required();

  // apply-defense
  auto* apd = app.add_subcommand("apply-defense", "apply a defense to one trace file");
  detail::DefenseFlags flags;
  std::string apd_in, apd_out;
  apd->add_option("--defense", flags.defense, "none|pad-random|pad-mtu|traffic-morph|buflo|tamaraw|tgpsm")
      ->required();
  apd->add_option("--in", apd_in, "input trace CSV")->required();
  apd->add_option("--out", apd_out, "output trace CSV")->required();
  apd->add_option("--seed", flags.seed, "seed");
  apd->add_option("--tau", flags.tau, "buflo: minimum duration (ms)");
  apd->add_option("--rho", flags.rho, "buflo: packet interval (ms)");
  apd->add_option("--rho-out", flags.rho_out, "tamaraw: outgoing interval (ms)");
  apd->add_option("--rho-in", flags.rho_in, "tamaraw: incoming interval (ms)");
  apd->add_option("--d-bytes", flags.d_bytes, "buflo/tamaraw: packet size");
  apd->add_option("--pad-multiple", flags.pad_multiple, "tamaraw: count multiple");
  apd->add_option("--sim-thresh", flags.sim_thresh, "similarity threshold");
  apd->add_option("--d", flags.d, "tgpsm: tuning factor");
  apd->add_option("--alpha", flags.alpha, "tgpsm: overhead weight");
  apd->add_option("--m", flags.m, "tgpsm: slice count");
  apd->add_option("--bw-d-factor", flags.bw_d_factor, "tgpsm: budget per d (percent)");
  apd->add_option("--n-clusters", flags.n_clusters, "tgpsm: cluster count");
  apd->add_option("--algo", flags.algo, "tgpsm: clustering algorithm");
  apd->add_option("--k-neighbors", flags.k_neighbors, "LOF neighborhood (0 = auto)");
  apd->add_option("--im", flags.im, "tgpsm: importance measure (default = --d)");
  apd->add_option("--data", flags.data, "dataset root for target selection");
  apd->add_option("--site", flags.site, "source site id");

  // run
  auto* run = app.add_subcommand("run", "run experiments from a config file");
  std::string run_config, run_out, run_trend;
  run->add_option("--config", run_config, "experiment config file")->required();
  run->add_option("--out", run_out, "results CSV")->required();
  run->add_option("--trend", run_trend, "optional d-sweep trend CSV");

  // report
  auto* rep = app.add_subcommand("report", "extract a d-sweep trend from a results CSV");
  std::string rep_in, rep_out;
  rep->add_option("--in", rep_in, "results CSV")->required();
  rep->add_option("--out", rep_out, "trend CSV")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_dataset(gen_sites, gen_traces, gen_seed, gen_out);
    if (cand->parsed()) return cmd_candidates(cand_data, cand_m, cand_kn, cand_out);
    if (clu->parsed()) return cmd_cluster(clu_data, clu_algo, clu_k, clu_m, clu_kn, clu_seed, clu_out);
    if (idx->parsed()) {
      return cmd_indexes(idx_data, idx_algos, idx_ks, idx_m, idx_l, idx_kn, idx_seed, idx_out);
    }
    if (apd->parsed()) return cmd_apply_defense(flags, apd_in, apd_out);
    if (run->parsed()) return cmd_run(run_config, run_out, run_trend);
    if (rep->parsed()) return cmd_report(rep_in, rep_out);
  } catch (const TraceParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace wfbench::cli
