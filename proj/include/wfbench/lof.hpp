#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "wfbench/features.hpp"
#include "wfbench/parallel.hpp"
#include "wfbench/trace.hpp"

namespace wfbench {

namespace detail {

inline double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

/// a / b extended to infinite local densities: two infinite densities are
/// equally dense (ratio 1), a finite density against an infinite one is 0.
inline double density_ratio(double a, double b) {
  const bool ia = std::isinf(a), ib = std::isinf(b);
  if (ia && ib) return 1.0;
  if (ib) return 0.0;
  return a / b;
}

}  // namespace detail

/// Local outlier factor of every point against its k nearest neighbors
/// (Euclidean, neighbor ties broken by index order). Scores are ~1 for
/// points inside a uniform-density region and grow above 1 for outliers;
/// duplicate-heavy inputs where a point and all its neighbors have infinite
/// local reachability density score exactly 1.
inline std::vector<double> lof(const std::vector<std::vector<double>>& points, int k_neighbors) {
  const std::size_t n = points.size();
  if (k_neighbors < 1) throw DataError("lof: k_neighbors must be >= 1");
  if (n < static_cast<std::size_t>(k_neighbors) + 1) {
    throw DataError("lof: need at least k_neighbors + 1 points");
  }
  for (const auto& p : points) {
    if (p.size() != points.front().size()) throw DataError("lof: dimension mismatch");
  }
  const auto k = static_cast<std::size_t>(k_neighbors);

  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      dist[i][j] = dist[j][i] = detail::euclidean(points[i], points[j]);
    }
  }

  // k nearest neighbors per point, ties by index
  std::vector<std::vector<std::size_t>> neighbors(n);
  std::vector<double> k_distance(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> order;
    order.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (dist[i][a] != dist[i][b]) return dist[i][a] < dist[i][b];
      return a < b;
    });
    order.resize(k);
    k_distance[i] = dist[i][order.back()];
    neighbors[i] = std::move(order);
  }

  // local reachability density; a zero reachability sum means infinite density
  std::vector<double> lrd(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double reach_sum = 0.0;
    for (const std::size_t o : neighbors[i]) {
      reach_sum += std::max(k_distance[o], dist[i][o]);
    }
    lrd[i] = reach_sum > 0.0 ? static_cast<double>(k) / reach_sum
                             : std::numeric_limits<double>::infinity();
  }

  std::vector<double> scores(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double ratio_sum = 0.0;
    for (const std::size_t o : neighbors[i]) {
      ratio_sum += detail::density_ratio(lrd[o], lrd[i]);
    }
    scores[i] = ratio_sum / static_cast<double>(k);
  }
  return scores;
}

/// The representative trace chosen for one website: its least-outlying
/// trace under LOF over the site's own slice vectors.
struct CandidateEntry {
  std::string site_id;
  std::size_t trace_index = 0;
  Trace trace;
  SliceVector slice;
  double lof_score = 0.0;
};

/// One candidate per eligible website, ordered by site_id. The entry order
/// is the item order used by clustering.
struct CandidateSet {
  std::vector<CandidateEntry> entries;

  const CandidateEntry* find(const std::string& site_id) const {
    for (const auto& e : entries) {
      if (e.site_id == site_id) return &e;
    }
    return nullptr;
  }

  std::size_t index_of(const std::string& site_id) const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].site_id == site_id) return i;
    }
    throw DataError("site not in candidate set: " + site_id);
  }

  std::vector<std::vector<double>> slice_matrix() const {
    std::vector<std::vector<double>> rows;
    rows.reserve(entries.size());
    for (const auto& e : entries) rows.push_back(e.slice.values);
    return rows;
  }
};

/// Neighborhood default: 10, bounded by the smallest per-site trace count.
inline int default_lof_neighbors(const Dataset& ds) {
  std::size_t min_traces = std::numeric_limits<std::size_t>::max();
  for (const auto& [id, ws] : ds.websites) min_traces = std::min(min_traces, ws.traces.size());
  if (min_traces == std::numeric_limits<std::size_t>::max() || min_traces < 2) return 1;
  return static_cast<int>(std::min<std::size_t>(10, min_traces - 1));
}

/// Per website: slice vectors for all traces, LOF over the site's own traces
/// only, then the minimum-LOF trace (ties -> lowest trace index). Websites
/// with fewer than k_neighbors + 1 traces are skipped and counted in
/// *skipped_sites.
inline CandidateSet select_candidates(const Dataset& ds, int m, int k_neighbors,
                                      std::size_t* skipped_sites = nullptr) {
  if (skipped_sites) *skipped_sites = 0;
  std::vector<const Website*> sites;
  sites.reserve(ds.websites.size());
  for (const auto& [id, ws] : ds.websites) {
    if (ws.traces.size() >= static_cast<std::size_t>(k_neighbors) + 1) {
      sites.push_back(&ws);
    } else if (skipped_sites) {
      ++*skipped_sites;
    }
  }
  if (sites.empty()) throw DataError("select_candidates: no website has enough traces");

  CandidateSet out;
  out.entries.resize(sites.size());
  parallel_for(sites.size(), [&](std::size_t i) {
    const Website& ws = *sites[i];
    std::vector<SliceVector> slices;
    slices.reserve(ws.traces.size());
    std::vector<std::vector<double>> pts;
    pts.reserve(ws.traces.size());
    for (const Trace& t : ws.traces) {
      slices.push_back(slice_features(t, m));
      pts.push_back(slices.back().values);
    }
    const std::vector<double> scores = lof(pts, k_neighbors);
    std::size_t best = 0;
    for (std::size_t j = 1; j < scores.size(); ++j) {
      if (scores[j] < scores[best]) best = j;
    }
    out.entries[i] = CandidateEntry{ws.site_id, best, ws.traces[best], slices[best], scores[best]};
  });
  return out;
}

}  // namespace wfbench
