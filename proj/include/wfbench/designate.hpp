#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wfbench/cluster.hpp"
#include "wfbench/lof.hpp"
#include "wfbench/rng.hpp"
#include "wfbench/trace.hpp"

namespace wfbench {

/// A morph-target request: the site to protect and the user's importance
/// measure. The effective cluster rank is im mod n_clusters.
struct DesignationRequest {
  std::string source_site;
  int im = 0;
  std::uint64_t seed = 0;
};

struct Designation {
  std::string destination_site;
  Trace destination_trace;  // the destination site's candidate trace
  int source_cluster = 0;
  int destination_cluster = 0;
  int effective_d = 0;
};

/// Picks the destination trace for a source site. With effective rank d = 0
/// the destination is a uniformly random other member of the source's own
/// cluster; otherwise it is a uniformly random member of the rank-d cluster,
/// where a larger d designates a farther cluster (d = n_clusters - 1 is the
/// farthest). A source that is the sole member of its cluster falls back to
/// d = 1 (*fell_back set when provided).
inline Designation designate(const DesignationRequest& req, const Clustering& clustering,
                             const ClusterDistanceMatrix& cd, const CandidateSet& candidates,
                             bool* fell_back = nullptr) {
  if (fell_back) *fell_back = false;
  if (req.im < 0) throw DataError("designate: importance measure must be non-negative");
  const std::size_t src_index = candidates.index_of(req.source_site);
  if (src_index >= clustering.assignment.size()) {
    throw DataError("designate: clustering does not cover the candidate set");
  }
  const int n_clusters = clustering.n_clusters;
  const int src_cluster = clustering.assignment[src_index];
  int d = req.im % n_clusters;

  const auto groups = clustering.members();
  Rng rng(mix_seed(req.seed, fnv1a64(req.source_site)));

  std::vector<std::size_t> pool;
  int dst_cluster = src_cluster;
  if (d == 0) {
    for (const std::size_t i : groups[static_cast<std::size_t>(src_cluster)]) {
      if (i != src_index) pool.push_back(i);
    }
    if (pool.empty()) {
      // sole member of its own cluster: nothing to hide behind there
      d = 1;
      if (fell_back) *fell_back = true;
    }
  }
  if (d != 0) {
    dst_cluster = cd.order[static_cast<std::size_t>(src_cluster)][static_cast<std::size_t>(d - 1)];
    pool = groups[static_cast<std::size_t>(dst_cluster)];
  }

  const std::size_t pick = pool[rng.below(pool.size())];
  const CandidateEntry& entry = candidates.entries[pick];
  Designation out;
  out.destination_site = entry.site_id;
  out.destination_trace = entry.trace;
  out.source_cluster = src_cluster;
  out.destination_cluster = dst_cluster;
  out.effective_d = d;
  return out;
}

}  // namespace wfbench
