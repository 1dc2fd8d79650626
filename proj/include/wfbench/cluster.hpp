#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wfbench/lof.hpp"
#include "wfbench/parallel.hpp"
#include "wfbench/rng.hpp"
#include "wfbench/trace.hpp"

namespace wfbench {

struct DistanceMatrix {
  std::size_t n = 0;
  std::vector<double> d;  // row-major n*n, symmetric, zero diagonal

  double at(std::size_t i, std::size_t j) const { return d[i * n + j]; }
  void set(std::size_t i, std::size_t j, double v) {
    d[i * n + j] = v;
    d[j * n + i] = v;
  }
};

inline DistanceMatrix pairwise_distances(const std::vector<std::vector<double>>& vectors) {
  const std::size_t n = vectors.size();
  for (const auto& v : vectors) {
    if (v.size() != vectors.front().size()) {
      throw DataError("pairwise_distances: dimension mismatch");
    }
  }
  DistanceMatrix dm;
  dm.n = n;
  dm.d.assign(n * n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j > i) dm.d[i * n + j] = detail::euclidean(vectors[i], vectors[j]);
    }
  });
  // mirror after the parallel fill so each index writes only its own row
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) dm.d[i * n + j] = dm.d[j * n + i];
  }
  return dm;
}

enum class ClusterAlgorithm { PAM, AGNES, DIANA };

inline const char* cluster_algorithm_name(ClusterAlgorithm a) {
  switch (a) {
    case ClusterAlgorithm::PAM: return "pam";
    case ClusterAlgorithm::AGNES: return "agnes";
    case ClusterAlgorithm::DIANA: return "diana";
  }
  return "?";
}

inline ClusterAlgorithm cluster_algorithm_from_name(std::string_view s) {
  if (s == "pam") return ClusterAlgorithm::PAM;
  if (s == "agnes") return ClusterAlgorithm::AGNES;
  if (s == "diana") return ClusterAlgorithm::DIANA;
  throw DataError("unknown clustering algorithm: " + std::string(s));
}

/// Partition of items into n_clusters groups, each anchored by a medoid
/// (the member minimizing summed intra-cluster distance).
struct Clustering {
  ClusterAlgorithm algorithm = ClusterAlgorithm::PAM;
  int n_clusters = 0;
  std::vector<int> assignment;          // item index -> cluster index
  std::vector<std::size_t> medoids;     // one per cluster

  std::vector<std::vector<std::size_t>> members() const {
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(n_clusters));
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      out[static_cast<std::size_t>(assignment[i])].push_back(i);
    }
    return out;
  }
};

namespace detail {

inline double medoid_cost(const DistanceMatrix& dm, const std::vector<std::size_t>& medoids) {
  double cost = 0.0;
  for (std::size_t i = 0; i < dm.n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const std::size_t m : medoids) best = std::min(best, dm.at(i, m));
    cost += best;
  }
  return cost;
}

/// Member of `cluster` minimizing summed distance to the rest; ties go to
/// the lowest index.
inline std::size_t cluster_medoid(const DistanceMatrix& dm, const std::vector<std::size_t>& cluster) {
  std::size_t best = cluster.front();
  double best_sum = std::numeric_limits<double>::infinity();
  for (const std::size_t i : cluster) {
    double sum = 0.0;
    for (const std::size_t j : cluster) sum += dm.at(i, j);
    if (sum < best_sum) {
      best_sum = sum;
      best = i;
    }
  }
  return best;
}

/// Relabels clusters 0..k-1 and assigns every item to its nearest medoid
/// (PAM) or keeps the given membership (hierarchical methods).
inline Clustering finish_from_members(ClusterAlgorithm algo, const DistanceMatrix& dm,
                                      std::vector<std::vector<std::size_t>> groups) {
  // stable cluster numbering: by smallest member index
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  Clustering c;
  c.algorithm = algo;
  c.n_clusters = static_cast<int>(groups.size());
  c.assignment.assign(dm.n, -1);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const std::size_t i : groups[g]) c.assignment[i] = static_cast<int>(g);
    c.medoids.push_back(cluster_medoid(dm, groups[g]));
  }
  return c;
}

}  // namespace detail

/// k-medoids: greedy BUILD initialization followed by a swap descent that
/// accepts the best strictly-improving medoid/non-medoid exchange and, once
/// no single exchange improves, the best strictly-improving simultaneous
/// pair exchange (with single swaps resuming afterwards). The escalation
/// step is what lets the descent match exhaustive k-medoids on small
/// instances instead of stalling in single-swap local minima. The seed only
/// breaks exact ties between equally good exchanges.
inline Clustering pam(const DistanceMatrix& dm, int k, std::uint64_t seed) {
  const std::size_t n = dm.n;
  if (k < 2 || static_cast<std::size_t>(k) >= n) throw DataError("pam: k out of range");
  Rng rng(mix_seed(seed, 0x9a3));

  std::vector<std::size_t> medoids;
  std::vector<bool> is_medoid(n, false);

  // BUILD: repeatedly add the point that lowers total cost the most
  while (medoids.size() < static_cast<std::size_t>(k)) {
    std::size_t best = n;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t cand = 0; cand < n; ++cand) {
      if (is_medoid[cand]) continue;
      medoids.push_back(cand);
      const double cost = detail::medoid_cost(dm, medoids);
      medoids.pop_back();
      if (cost < best_cost) {
        best_cost = cost;
        best = cand;
      }
    }
    medoids.push_back(best);
    is_medoid[best] = true;
  }

  double current_cost = detail::medoid_cost(dm, medoids);

  auto best_single_swap = [&](double& best_cost,
                              std::vector<std::pair<std::size_t, std::size_t>>& swaps) {
    for (std::size_t slot = 0; slot < medoids.size(); ++slot) {
      const std::size_t old = medoids[slot];
      for (std::size_t cand = 0; cand < n; ++cand) {
        if (is_medoid[cand]) continue;
        medoids[slot] = cand;
        const double cost = detail::medoid_cost(dm, medoids);
        medoids[slot] = old;
        if (cost < best_cost) {
          best_cost = cost;
          swaps.assign(1, {slot, cand});
        } else if (cost == best_cost && !swaps.empty()) {
          swaps.emplace_back(slot, cand);
        }
      }
    }
  };

  auto best_pair_swap = [&](double& best_cost,
                            std::vector<std::array<std::size_t, 4>>& swaps) {
    for (std::size_t s1 = 0; s1 < medoids.size(); ++s1) {
      for (std::size_t s2 = s1 + 1; s2 < medoids.size(); ++s2) {
        const std::size_t o1 = medoids[s1], o2 = medoids[s2];
        for (std::size_t c1 = 0; c1 < n; ++c1) {
          if (is_medoid[c1]) continue;
          for (std::size_t c2 = c1 + 1; c2 < n; ++c2) {
            if (is_medoid[c2]) continue;
            medoids[s1] = c1;
            medoids[s2] = c2;
            const double cost = detail::medoid_cost(dm, medoids);
            medoids[s1] = o1;
            medoids[s2] = o2;
            if (cost < best_cost) {
              best_cost = cost;
              swaps.assign(1, {s1, s2, c1, c2});
            } else if (cost == best_cost && !swaps.empty()) {
              swaps.push_back({s1, s2, c1, c2});
            }
          }
        }
      }
    }
  };

  for (;;) {
    double best_cost = current_cost;
    std::vector<std::pair<std::size_t, std::size_t>> singles;
    best_single_swap(best_cost, singles);
    if (!singles.empty()) {
      const auto [slot, cand] = singles[rng.below(singles.size())];
      is_medoid[medoids[slot]] = false;
      is_medoid[cand] = true;
      medoids[slot] = cand;
      current_cost = best_cost;
      continue;
    }
    if (medoids.size() < 2 || n - medoids.size() < 2) break;
    std::vector<std::array<std::size_t, 4>> pairs;
    best_pair_swap(best_cost, pairs);
    if (pairs.empty()) break;
    const auto [s1, s2, c1, c2] = pairs[rng.below(pairs.size())];
    is_medoid[medoids[s1]] = false;
    is_medoid[medoids[s2]] = false;
    is_medoid[c1] = true;
    is_medoid[c2] = true;
    medoids[s1] = c1;
    medoids[s2] = c2;
    current_cost = best_cost;
  }

  std::sort(medoids.begin(), medoids.end());
  Clustering c;
  c.algorithm = ClusterAlgorithm::PAM;
  c.n_clusters = k;
  c.medoids = medoids;
  c.assignment.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    int best_cluster = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < medoids.size(); ++g) {
      const double d = dm.at(i, medoids[g]);
      if (d < best_d) {
        best_d = d;
        best_cluster = static_cast<int>(g);
      }
    }
    c.assignment[i] = best_cluster;
  }
  return c;
}

/// Agglomerative nesting with average linkage, merging from singletons down
/// to k clusters. Ties pick the pair whose (lowest member, lowest member)
/// identifiers are smallest.
inline Clustering agnes(const DistanceMatrix& dm, int k) {
  const std::size_t n = dm.n;
  if (k < 1 || static_cast<std::size_t>(k) > n) throw DataError("agnes: k out of range");

  std::vector<std::vector<std::size_t>> groups(n);
  for (std::size_t i = 0; i < n; ++i) groups[i] = {i};

  auto avg_link = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    double sum = 0.0;
    for (const std::size_t i : a) {
      for (const std::size_t j : b) sum += dm.at(i, j);
    }
    return sum / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
  };

  while (groups.size() > static_cast<std::size_t>(k)) {
    std::size_t merge_a = 0, merge_b = 1;
    double best = std::numeric_limits<double>::infinity();
    std::pair<std::size_t, std::size_t> best_key{0, 0};
    for (std::size_t a = 0; a < groups.size(); ++a) {
      for (std::size_t b = a + 1; b < groups.size(); ++b) {
        const double d = avg_link(groups[a], groups[b]);
        const std::pair<std::size_t, std::size_t> key{
            std::min(groups[a].front(), groups[b].front()),
            std::max(groups[a].front(), groups[b].front())};
        if (d < best || (d == best && key < best_key)) {
          best = d;
          best_key = key;
          merge_a = a;
          merge_b = b;
        }
      }
    }
    auto merged = groups[merge_a];
    merged.insert(merged.end(), groups[merge_b].begin(), groups[merge_b].end());
    std::sort(merged.begin(), merged.end());
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(merge_b));
    groups[merge_a] = std::move(merged);
  }
  return detail::finish_from_members(ClusterAlgorithm::AGNES, dm, std::move(groups));
}

/// Divisive hierarchical clustering: repeatedly split the widest cluster by
/// seeding a splinter with its most-dissimilar member and migrating members
/// whose attraction to the splinter is positive. Deterministic index
/// tie-breaks throughout.
inline Clustering diana(const DistanceMatrix& dm, int k) {
  const std::size_t n = dm.n;
  if (k < 1 || static_cast<std::size_t>(k) > n) throw DataError("diana: k out of range");

  std::vector<std::vector<std::size_t>> groups{std::vector<std::size_t>(n)};
  std::iota(groups[0].begin(), groups[0].end(), 0);

  auto diameter = [&](const std::vector<std::size_t>& g) {
    double d = 0.0;
    for (std::size_t a = 0; a < g.size(); ++a) {
      for (std::size_t b = a + 1; b < g.size(); ++b) d = std::max(d, dm.at(g[a], g[b]));
    }
    return d;
  };

  while (groups.size() < static_cast<std::size_t>(k)) {
    // widest splittable cluster; ties by lowest member index
    std::size_t target = groups.size();
    double best_diam = -1.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (groups[g].size() < 2) continue;
      const double d = diameter(groups[g]);
      if (d > best_diam ||
          (d == best_diam && target < groups.size() && groups[g].front() < groups[target].front())) {
        best_diam = d;
        target = g;
      }
    }
    if (target == groups.size()) throw DataError("diana: cannot split singletons further");

    std::vector<std::size_t> old_part = groups[target];
    auto avg_to = [&](std::size_t i, const std::vector<std::size_t>& g, bool exclude_self) {
      double sum = 0.0;
      std::size_t cnt = 0;
      for (const std::size_t j : g) {
        if (exclude_self && j == i) continue;
        sum += dm.at(i, j);
        ++cnt;
      }
      return cnt ? sum / static_cast<double>(cnt) : 0.0;
    };

    // splinter seed: member with highest average dissimilarity
    std::size_t seed_member = old_part.front();
    double best_avg = -1.0;
    for (const std::size_t i : old_part) {
      const double a = avg_to(i, old_part, true);
      if (a > best_avg) {
        best_avg = a;
        seed_member = i;
      }
    }
    std::vector<std::size_t> splinter{seed_member};
    old_part.erase(std::find(old_part.begin(), old_part.end(), seed_member));

    // migrate members with positive attraction, strongest first
    while (old_part.size() > 1) {
      std::size_t mover = 0;
      double best_gain = 0.0;
      bool found = false;
      for (std::size_t idx = 0; idx < old_part.size(); ++idx) {
        const std::size_t i = old_part[idx];
        const double gain = avg_to(i, old_part, true) - avg_to(i, splinter, false);
        if (gain > best_gain) {
          best_gain = gain;
          mover = idx;
          found = true;
        }
      }
      if (!found) break;
      splinter.push_back(old_part[mover]);
      old_part.erase(old_part.begin() + static_cast<std::ptrdiff_t>(mover));
    }

    std::sort(splinter.begin(), splinter.end());
    std::sort(old_part.begin(), old_part.end());
    groups[target] = std::move(old_part);
    groups.push_back(std::move(splinter));
  }
  return detail::finish_from_members(ClusterAlgorithm::DIANA, dm, std::move(groups));
}

inline Clustering cluster(ClusterAlgorithm algo, const DistanceMatrix& dm, int k, std::uint64_t seed) {
  switch (algo) {
    case ClusterAlgorithm::PAM: return pam(dm, k, seed);
    case ClusterAlgorithm::AGNES: return agnes(dm, k);
    case ClusterAlgorithm::DIANA: return diana(dm, k);
  }
  throw DataError("unknown clustering algorithm");
}

/// Per-cluster ranking of all other clusters by medoid-to-medoid distance,
/// nearest first, so that position j-1 holds the rank-j destination and a
/// growing rank never moves the target closer. Distance ties rank the lower
/// cluster index first.
struct ClusterDistanceMatrix {
  std::vector<std::vector<int>> order;  // order[i] = other clusters, nearest first
};

inline ClusterDistanceMatrix cluster_distance_matrix(const Clustering& clustering,
                                                     const DistanceMatrix& dm) {
  const int k = clustering.n_clusters;
  ClusterDistanceMatrix cd;
  cd.order.resize(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    auto& row = cd.order[static_cast<std::size_t>(i)];
    for (int j = 0; j < k; ++j) {
      if (j != i) row.push_back(j);
    }
    std::sort(row.begin(), row.end(), [&](int a, int b) {
      const double da = dm.at(clustering.medoids[static_cast<std::size_t>(i)],
                              clustering.medoids[static_cast<std::size_t>(a)]);
      const double db = dm.at(clustering.medoids[static_cast<std::size_t>(i)],
                              clustering.medoids[static_cast<std::size_t>(b)]);
      if (da != db) return da < db;
      return a < b;
    });
  }
  return cd;
}

/// Text serialization of a clustering over named items (site ids).
inline std::string write_clustering(const Clustering& c, const std::vector<std::string>& site_ids) {
  if (site_ids.size() != c.assignment.size()) {
    throw DataError("write_clustering: site id count does not match items");
  }
  std::ostringstream out;
  out << "algorithm " << cluster_algorithm_name(c.algorithm) << "\n";
  out << "n_clusters " << c.n_clusters << "\n";
  for (std::size_t g = 0; g < c.medoids.size(); ++g) {
    out << "medoid " << g << " " << site_ids[c.medoids[g]] << "\n";
  }
  for (std::size_t i = 0; i < site_ids.size(); ++i) {
    out << "site " << site_ids[i] << " " << c.assignment[i] << "\n";
  }
  return out.str();
}

/// Inverse of write_clustering. Items come back in file order; their names
/// are appended to *site_ids when provided.
inline Clustering parse_clustering(std::string_view text, std::vector<std::string>* site_ids = nullptr) {
  Clustering c;
  std::vector<std::pair<int, std::string>> medoid_names;
  std::vector<std::string> names;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) {
    if (word == "algorithm") {
      std::string a;
      in >> a;
      c.algorithm = cluster_algorithm_from_name(a);
    } else if (word == "n_clusters") {
      in >> c.n_clusters;
    } else if (word == "medoid") {
      int idx = 0;
      std::string site;
      in >> idx >> site;
      medoid_names.emplace_back(idx, site);
    } else if (word == "site") {
      std::string site;
      int cluster_idx = 0;
      in >> site >> cluster_idx;
      names.push_back(site);
      c.assignment.push_back(cluster_idx);
    } else {
      throw DataError("clustering file: unexpected token '" + word + "'");
    }
  }
  if (c.n_clusters < 1 || names.empty()) throw DataError("clustering file: missing fields");
  if (medoid_names.size() != static_cast<std::size_t>(c.n_clusters)) {
    throw DataError("clustering file: medoid count does not match n_clusters");
  }
  c.medoids.assign(medoid_names.size(), 0);
  for (const auto& [idx, site] : medoid_names) {
    const auto it = std::find(names.begin(), names.end(), site);
    if (idx < 0 || idx >= c.n_clusters || it == names.end()) {
      throw DataError("clustering file: bad medoid entry for " + site);
    }
    c.medoids[static_cast<std::size_t>(idx)] =
        static_cast<std::size_t>(std::distance(names.begin(), it));
  }
  for (const int a : c.assignment) {
    if (a < 0 || a >= c.n_clusters) throw DataError("clustering file: cluster index out of range");
  }
  if (site_ids) *site_ids = std::move(names);
  return c;
}

}  // namespace wfbench
