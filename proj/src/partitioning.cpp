#include "sfield/partitioning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace sfield {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

std::vector<std::vector<double>> init_kmeanspp(
    const std::vector<std::vector<double>>& points, int k, std::mt19937_64& rng) {
  const int n = static_cast<int>(points.size());
  std::vector<std::vector<double>> centers;
  std::uniform_int_distribution<int> first(0, n - 1);
  centers.push_back(points[first(rng)]);
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, sq_dist(points[i], c));
      d2[i] = best;
      total += best;
    }
    int pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng), acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += d2[i];
        if (r <= acc) { pick = i; break; }
      }
    } else {
      pick = first(rng);  // all points coincide with a center
    }
    centers.push_back(points[pick]);
  }
  return centers;
}

double lloyd(const std::vector<std::vector<double>>& points,
             std::vector<std::vector<double>>& centers,
             std::vector<int>& assign, std::vector<double>* history) {
  const int n = static_cast<int>(points.size());
  const int k = static_cast<int>(centers.size());
  const std::size_t dim = points[0].size();
  assign.assign(n, -1);
  double wcss = 0.0;
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    wcss = 0.0;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(points[i], centers[0]);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(points[i], centers[c]);
        if (d < best_d) { best_d = d; best = c; }  // strict: ties keep lowest index
      }
      if (assign[i] != best) { assign[i] = best; changed = true; }
      wcss += best_d;
    }
    if (history) history->push_back(wcss);
    if (!changed && iter > 0) break;
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < dim; ++d) sums[assign[i]][d] += points[i][d];
      counts[assign[i]]++;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // reseed an empty cluster at the point farthest from its centroid
        int far = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d = sq_dist(points[i], centers[assign[i]]);
          if (d > far_d) { far_d = d; far = i; }
        }
        centers[c] = points[far];
      } else {
        for (std::size_t d = 0; d < dim; ++d) centers[c][d] = sums[c][d] / counts[c];
      }
    }
  }
  return wcss;
}

}  // namespace

std::vector<FeaturePoint> build_feature_dataset(const FieldState& field,
                                                const ExogenousInputs& exo,
                                                const std::vector<LoopParams>& params) {
  std::vector<FeaturePoint> out(field.loops.size());
  for (std::size_t i = 0; i < field.loops.size(); ++i) {
    out[i].effective_power = params[i].eta * params[i].surface * exo.irradiance[i];
    out[i].mean_temp = 0.5 * (field.loops[i].t_out + field.t_in);
  }
  return out;
}

std::vector<std::vector<double>> normalize_features(const std::vector<FeaturePoint>& points) {
  const int n = static_cast<int>(points.size());
  std::vector<std::vector<double>> raw(n, std::vector<double>(2));
  for (int i = 0; i < n; ++i) raw[i] = {points[i].effective_power, points[i].mean_temp};
  for (int d = 0; d < 2; ++d) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += raw[i][d];
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) var += (raw[i][d] - mean) * (raw[i][d] - mean);
    const double sd = std::sqrt(var / n);
    if (sd > 0.0)
      for (int i = 0; i < n; ++i) raw[i][d] = (raw[i][d] - mean) / sd;
  }
  return raw;
}

KmeansResult kmeans_cluster(const std::vector<std::vector<double>>& points,
                            int k, std::uint64_t seed) {
  const int n = static_cast<int>(points.size());
  if (k < 1 || k > n) throw std::invalid_argument("kmeans: k out of range");
  std::mt19937_64 rng(seed);
  KmeansResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < 10; ++restart) {
    auto centers = init_kmeanspp(points, k, rng);
    std::vector<int> assign;
    std::vector<double> history;
    const double wcss = lloyd(points, centers, assign, &history);
    if (wcss < best.wcss) {
      best.wcss = wcss;
      best.assignment = std::move(assign);
      best.centroids = std::move(centers);
      best.wcss_history = std::move(history);
    }
  }
  return best;
}

double calinski_harabasz(const std::vector<std::vector<double>>& points,
                         const std::vector<int>& assignment) {
  const int n = static_cast<int>(points.size());
  const int k = 1 + *std::max_element(assignment.begin(), assignment.end());
  if (k < 2 || k > n - 1)
    throw std::invalid_argument("calinski_harabasz: k outside [2, n-1]");
  const std::size_t dim = points[0].size();
  std::vector<double> global(dim, 0.0);
  for (const auto& p : points)
    for (std::size_t d = 0; d < dim; ++d) global[d] += p[d];
  for (auto& g : global) g /= n;

  std::vector<std::vector<double>> centroid(k, std::vector<double>(dim, 0.0));
  std::vector<int> counts(k, 0);
  for (int i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) centroid[assignment[i]][d] += points[i][d];
    counts[assignment[i]]++;
  }
  for (int c = 0; c < k; ++c)
    for (std::size_t d = 0; d < dim; ++d) centroid[c][d] /= std::max(counts[c], 1);

  double between = 0.0, within = 0.0;
  for (int c = 0; c < k; ++c) between += counts[c] * sq_dist(centroid[c], global);
  for (int i = 0; i < n; ++i) within += sq_dist(points[i], centroid[assignment[i]]);
  if (within <= 0.0) return std::numeric_limits<double>::infinity();
  return (between / (k - 1)) / (within / (n - k));
}

Partition select_partition(const std::vector<FeaturePoint>& points,
                           int n_cl_max, std::uint64_t seed) {
  const int n = static_cast<int>(points.size());
  if (n_cl_max < 1) throw std::invalid_argument("n_cl_max must be >= 1");
  const auto norm = normalize_features(points);

  Partition part;
  auto single = [&]() {
    part.clusters.assign(1, {});
    for (int i = 0; i < n; ++i) part.clusters[0].push_back(i);
  };

  // coincident dataset: a single cluster, CH undefined
  std::vector<double> mean(2, 0.0);
  for (const auto& p : norm) { mean[0] += p[0]; mean[1] += p[1]; }
  mean[0] /= n; mean[1] /= n;
  double max_r = 0.0;
  for (const auto& p : norm) max_r = std::max(max_r, std::sqrt(sq_dist(p, mean)));
  if (n_cl_max == 1 || max_r <= 1e-9) {
    single();
    return part;
  }

  const int k_hi = std::min(n_cl_max, n - 1);
  if (k_hi < 2) {
    // too few points to score; fall back to plain k-means with the cap
    const auto r = kmeans_cluster(norm, std::min(n_cl_max, n), seed);
    part.clusters.assign(std::min(n_cl_max, n), {});
    for (int i = 0; i < n; ++i) part.clusters[r.assignment[i]].push_back(i);
    std::erase_if(part.clusters, [](const auto& c) { return c.empty(); });
    return part;
  }

  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<int> best_assign;
  int best_k = 0;
  for (int k = 2; k <= k_hi; ++k) {
    const auto r = kmeans_cluster(norm, k, seed + static_cast<std::uint64_t>(k));
    const double score = calinski_harabasz(norm, r.assignment);
    if (score > best_score + 1e-12) {  // lowest k wins ties
      best_score = score;
      best_assign = r.assignment;
      best_k = k;
    }
  }
  part.clusters.assign(best_k, {});
  for (int i = 0; i < n; ++i) part.clusters[best_assign[i]].push_back(i);
  std::erase_if(part.clusters, [](const auto& c) { return c.empty(); });
  return part;
}

}  // namespace sfield
