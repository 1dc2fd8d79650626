#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "wfbench/cluster.hpp"
#include "wfbench/parallel.hpp"
#include "wfbench/trace.hpp"

namespace wfbench {

/// One row of the cluster-quality report: five internal indexes plus four
/// stability indexes for a (algorithm, n_clusters) scheme.
struct IndexReport {
  std::string scheme;
  double dunn = 0.0;
  double ch = 0.0;
  double silhouette = 0.0;
  double db = 0.0;
  double connectivity = 0.0;
  double apn = 0.0;
  double ad = 0.0;
  double adm = 0.0;
  double fom = 0.0;
};

struct InternalIndexes {
  double dunn = 0.0;
  double ch = 0.0;
  double silhouette = 0.0;
  double db = 0.0;
  double connectivity = 0.0;
};

namespace detail {

inline std::vector<double> centroid(const std::vector<std::vector<double>>& vectors,
                                    const std::vector<std::size_t>& members) {
  std::vector<double> c(vectors.front().size(), 0.0);
  for (const std::size_t i : members) {
    for (std::size_t d = 0; d < c.size(); ++d) c[d] += vectors[i][d];
  }
  for (double& v : c) v /= static_cast<double>(members.size());
  return c;
}

}  // namespace detail

/// Compactness/separation measures over one clustering:
///   Dunn         min inter-cluster point distance / max intra-cluster diameter
///   CH           (between-group SS / (k-1)) / (within-group SS / (n-k))
///   Silhouette   mean of (b-a)/max(a,b); singletons and a=b=0 score 0
///   DB           mean over clusters of the worst (s_i+s_j)/d(c_i,c_j)
///   Connectivity sum of 1/rank over each item's l nearest neighbors that
///                fall outside the item's cluster (0 = perfectly connected)
/// A zero Dunn denominator (all clusters singleton or duplicate points)
/// reports +infinity.
inline InternalIndexes internal_indexes(const Clustering& clustering,
                                        const std::vector<std::vector<double>>& vectors,
                                        const DistanceMatrix& dm, int l_neighbors) {
  if (l_neighbors < 1) throw DataError("internal_indexes: l_neighbors must be >= 1");
  const std::size_t n = dm.n;
  const int k = clustering.n_clusters;
  const auto groups = clustering.members();
  InternalIndexes out;
  const double inf = std::numeric_limits<double>::infinity();

  // Dunn
  double min_inter = inf;
  double max_diam = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (clustering.assignment[i] == clustering.assignment[j]) {
        max_diam = std::max(max_diam, dm.at(i, j));
      } else {
        min_inter = std::min(min_inter, dm.at(i, j));
      }
    }
  }
  out.dunn = max_diam > 0.0 ? min_inter / max_diam : inf;

  // Calinski-Harabasz over centroid sums of squares
  std::vector<std::vector<double>> centroids;
  centroids.reserve(groups.size());
  for (const auto& g : groups) centroids.push_back(detail::centroid(vectors, g));
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  const std::vector<double> overall = detail::centroid(vectors, all);
  double between = 0.0, within = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    double dc = 0.0;
    for (std::size_t d = 0; d < overall.size(); ++d) {
      const double diff = centroids[g][d] - overall[d];
      dc += diff * diff;
    }
    between += static_cast<double>(groups[g].size()) * dc;
    for (const std::size_t i : groups[g]) {
      for (std::size_t d = 0; d < overall.size(); ++d) {
        const double diff = vectors[i][d] - centroids[g][d];
        within += diff * diff;
      }
    }
  }
  if (k <= 1 || n <= static_cast<std::size_t>(k)) {
    out.ch = 0.0;
  } else if (within == 0.0) {
    out.ch = inf;
  } else {
    out.ch = (between / static_cast<double>(k - 1)) /
             (within / static_cast<double>(n - static_cast<std::size_t>(k)));
  }

  // Silhouette
  double sil_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ci = static_cast<std::size_t>(clustering.assignment[i]);
    if (groups[ci].size() <= 1) continue;  // singleton: s(i) = 0
    double a = 0.0;
    for (const std::size_t j : groups[ci]) {
      if (j != i) a += dm.at(i, j);
    }
    a /= static_cast<double>(groups[ci].size() - 1);
    double b = inf;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (g == ci) continue;
      double sum = 0.0;
      for (const std::size_t j : groups[g]) sum += dm.at(i, j);
      b = std::min(b, sum / static_cast<double>(groups[g].size()));
    }
    const double denom = std::max(a, b);
    sil_sum += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  out.silhouette = n ? sil_sum / static_cast<double>(n) : 0.0;

  // Davies-Bouldin with centroid scatter
  if (k >= 2) {
    std::vector<double> scatter(groups.size(), 0.0);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      double sum = 0.0;
      for (const std::size_t i : groups[g]) {
        sum += detail::euclidean(vectors[i], centroids[g]);
      }
      scatter[g] = sum / static_cast<double>(groups[g].size());
    }
    double db_sum = 0.0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      double worst = 0.0;
      for (std::size_t j = 0; j < groups.size(); ++j) {
        if (j == i) continue;
        const double dij = detail::euclidean(centroids[i], centroids[j]);
        const double num = scatter[i] + scatter[j];
        const double ratio = dij > 0.0 ? num / dij : (num > 0.0 ? inf : 0.0);
        worst = std::max(worst, ratio);
      }
      db_sum += worst;
    }
    out.db = db_sum / static_cast<double>(groups.size());
  }

  // Connectivity
  const std::size_t l = std::min<std::size_t>(static_cast<std::size_t>(l_neighbors), n - 1);
  double conn = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> order;
    order.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (dm.at(i, a) != dm.at(i, b)) return dm.at(i, a) < dm.at(i, b);
      return a < b;
    });
    for (std::size_t r = 0; r < l; ++r) {
      if (clustering.assignment[order[r]] != clustering.assignment[i]) {
        conn += 1.0 / static_cast<double>(r + 1);
      }
    }
  }
  out.connectivity = conn;
  return out;
}

struct StabilityIndexes {
  double apn = 0.0;  // average proportion of non-overlap, in [0, 1]
  double ad = 0.0;   // average distance between full/reduced co-clusters
  double adm = 0.0;  // average distance between matched cluster centroids
  double fom = 0.0;  // figure of merit, averaged over removed columns
  std::vector<double> fom_per_column;
};

/// Leave-one-column-out stability: recluster with each feature column
/// removed and compare against the full-data clustering. Every per-item
/// comparison pairs the item's full-data cluster with its reduced-data
/// cluster; distances and centroids are taken on the full data.
inline StabilityIndexes stability_indexes(ClusterAlgorithm algorithm,
                                          const std::vector<std::vector<double>>& vectors, int k,
                                          std::uint64_t seed) {
  const std::size_t n = vectors.size();
  if (n == 0) throw DataError("stability_indexes: no vectors");
  const std::size_t dim = vectors.front().size();
  if (dim < 2) throw DataError("stability_indexes: need at least 2 feature columns");

  const DistanceMatrix dm_full = pairwise_distances(vectors);
  const Clustering full = cluster(algorithm, dm_full, k, seed);
  const auto full_groups = full.members();
  std::vector<std::vector<double>> full_centroids;
  full_centroids.reserve(full_groups.size());
  for (const auto& g : full_groups) full_centroids.push_back(detail::centroid(vectors, g));

  struct ColumnResult {
    double apn = 0.0, ad = 0.0, adm = 0.0, fom = 0.0;
  };
  std::vector<ColumnResult> cols(dim);

  parallel_for(dim, [&](std::size_t col) {
    std::vector<std::vector<double>> reduced(n);
    for (std::size_t i = 0; i < n; ++i) {
      reduced[i].reserve(dim - 1);
      for (std::size_t d = 0; d < dim; ++d) {
        if (d != col) reduced[i].push_back(vectors[i][d]);
      }
    }
    const DistanceMatrix dm_red = pairwise_distances(reduced);
    const Clustering red = cluster(algorithm, dm_red, k, seed);
    const auto red_groups = red.members();
    std::vector<std::vector<double>> red_centroids;
    red_centroids.reserve(red_groups.size());
    for (const auto& g : red_groups) red_centroids.push_back(detail::centroid(vectors, g));

    // mean full-data distance between each (full cluster, reduced cluster) pair
    std::vector<std::vector<double>> cross_avg(full_groups.size(),
                                               std::vector<double>(red_groups.size(), 0.0));
    for (std::size_t a = 0; a < full_groups.size(); ++a) {
      for (std::size_t b = 0; b < red_groups.size(); ++b) {
        double sum = 0.0;
        for (const std::size_t x : full_groups[a]) {
          for (const std::size_t y : red_groups[b]) sum += dm_full.at(x, y);
        }
        cross_avg[a][b] = sum / (static_cast<double>(full_groups[a].size()) *
                                 static_cast<double>(red_groups[b].size()));
      }
    }

    ColumnResult r;
    for (std::size_t i = 0; i < n; ++i) {
      const auto fc = static_cast<std::size_t>(full.assignment[i]);
      const auto rc = static_cast<std::size_t>(red.assignment[i]);
      std::size_t overlap = 0;
      for (const std::size_t j : full_groups[fc]) {
        if (static_cast<std::size_t>(red.assignment[j]) == rc) ++overlap;
      }
      r.apn += 1.0 - static_cast<double>(overlap) / static_cast<double>(full_groups[fc].size());
      r.ad += cross_avg[fc][rc];
      r.adm += detail::euclidean(full_centroids[fc], red_centroids[rc]);
    }
    r.apn /= static_cast<double>(n);
    r.ad /= static_cast<double>(n);
    r.adm /= static_cast<double>(n);

    // FOM: dispersion of the removed column within the reduced clusters
    double ss = 0.0;
    for (const auto& g : red_groups) {
      double mean = 0.0;
      for (const std::size_t i : g) mean += vectors[i][col];
      mean /= static_cast<double>(g.size());
      for (const std::size_t i : g) {
        const double diff = vectors[i][col] - mean;
        ss += diff * diff;
      }
    }
    r.fom = std::sqrt(ss / static_cast<double>(n));
    cols[col] = r;
  });

  StabilityIndexes out;
  out.fom_per_column.reserve(dim);
  for (const auto& r : cols) {
    out.apn += r.apn;
    out.ad += r.ad;
    out.adm += r.adm;
    out.fom += r.fom;
    out.fom_per_column.push_back(r.fom);
  }
  const double m = static_cast<double>(dim);
  out.apn /= m;
  out.ad /= m;
  out.adm /= m;
  out.fom /= m;
  return out;
}

/// Full report row for one scheme; scheme labels follow the "PAM10" style.
inline IndexReport index_report(ClusterAlgorithm algorithm,
                                const std::vector<std::vector<double>>& vectors, int k,
                                int l_neighbors, std::uint64_t seed) {
  const DistanceMatrix dm = pairwise_distances(vectors);
  const Clustering c = cluster(algorithm, dm, k, seed);
  const InternalIndexes internal = internal_indexes(c, vectors, dm, l_neighbors);
  const StabilityIndexes stab = stability_indexes(algorithm, vectors, k, seed);
  IndexReport row;
  std::string label = cluster_algorithm_name(algorithm);
  std::transform(label.begin(), label.end(), label.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  row.scheme = label + std::to_string(k);
  row.dunn = internal.dunn;
  row.ch = internal.ch;
  row.silhouette = internal.silhouette;
  row.db = internal.db;
  row.connectivity = internal.connectivity;
  row.apn = stab.apn;
  row.ad = stab.ad;
  row.adm = stab.adm;
  row.fom = stab.fom;
  return row;
}

}  // namespace wfbench
