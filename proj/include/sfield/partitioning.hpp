#pragma once

#include <cstdint>
#include <vector>

#include "sfield/thermal.hpp"

// Time-varying partitioning of the loop set: each loop contributes a
// two-dimensional feature point (current effective solar power, mean
// temperature); similar loops are grouped by seeded k-means and the cluster
// count is chosen by maximizing the Calinski-Harabasz score.

namespace sfield {

struct FeaturePoint {
  double effective_power;  // eta * S * I [W]
  double mean_temp;        // (t_out + t_in)/2 [degC]
};

struct Partition {
  std::vector<std::vector<int>> clusters;  // disjoint, nonempty, cover all loops
  int epoch = 0;                           // sim step at which selected

  bool operator==(const Partition& other) const { return clusters == other.clusters; }
};

struct KmeansResult {
  std::vector<int> assignment;               // point -> cluster
  std::vector<std::vector<double>> centroids;
  double wcss = 0.0;                         // within-cluster sum of squares
  std::vector<double> wcss_history;          // per Lloyd iteration (best restart)
};

std::vector<FeaturePoint> build_feature_dataset(const FieldState& field,
                                                const ExogenousInputs& exo,
                                                const std::vector<LoopParams>& params);

// Z-score normalization per dimension (zero-variance dimensions pass
// through unscaled).
std::vector<std::vector<double>> normalize_features(const std::vector<FeaturePoint>& points);

// Seeded k-means++ with Lloyd iterations on already-prepared coordinates;
// best of 10 restarts by WCSS. Equidistant points join the lowest-index
// centroid.
KmeansResult kmeans_cluster(const std::vector<std::vector<double>>& points,
                            int k, std::uint64_t seed);

// CH = (B/(k-1)) / (W/(n-k)). Requires 2 <= k <= n-1; returns +inf when
// every cluster is internally coincident (W = 0).
double calinski_harabasz(const std::vector<std::vector<double>>& points,
                         const std::vector<int>& assignment);

// Evaluates k = 2..min(n_cl_max, n-1) and keeps the CH argmax (lowest k on
// ties). Coincident datasets collapse to a single cluster.
Partition select_partition(const std::vector<FeaturePoint>& points,
                           int n_cl_max, std::uint64_t seed);

}  // namespace sfield
