#ifndef ARTID_CLUSTER_HPP_
#define ARTID_CLUSTER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "artid/errors.hpp"

namespace artid {

// Agglomerative merge history. Original points are clusters 0..n-1; the
// merge at step k creates cluster n+k. Steps are ordered by non-decreasing
// distance (Ward linkage is reducible, so the order is well defined).
struct MergeStep {
  int a = 0;
  int b = 0;
  double distance = 0.0;
  int size = 0;  // member count of the merged cluster
};

struct Dendrogram {
  int n_points = 0;
  std::vector<MergeStep> steps;
};

// Ward linkage with Euclidean input distances via the Lance-Williams
// recurrence on squared distances (nearest-neighbor chain). The reported
// merge distance is sqrt of the recurrence value, which equals twice the
// within-cluster variance increase; a singleton pair therefore merges at its
// plain Euclidean distance.
Dendrogram ward_linkage(const std::vector<std::vector<float>>& points);

// Maximal subtrees whose internal merges all lie strictly below t. Labels
// are canonicalized by first occurrence.
std::vector<int> flat_clusters(const Dendrogram& dendrogram, double t);

double adjusted_rand_index(const std::vector<int>& p, const std::vector<int>& q);
double adjusted_mutual_information(const std::vector<int>& p,
                                   const std::vector<int>& q);

// count values spanning [lo, hi] with log spacing; lo must be positive.
std::vector<double> log_grid(double lo, double hi, int count);

struct ClusterGroup {
  std::string group_id;
  std::vector<std::vector<float>> points;
  std::vector<int> labels;  // ground-truth artist ordinals within the group
};

// argmax over the grid of mean AMI across the dev groups; ties take the
// smallest threshold.
double select_threshold(const std::vector<ClusterGroup>& dev_groups,
                        const std::vector<double>& grid);

struct FoldScore {
  int fold = 0;
  double ari = 0.0;
  double ami = 0.0;
  double threshold = 0.0;
};

struct GroupOutcome {
  std::string group_id;
  int fold = 0;
  std::vector<int> predicted;
  std::vector<int> truth;
  double ari = 0.0;
  double ami = 0.0;
};

struct CrossValResult {
  std::vector<FoldScore> folds;
  double mean_ari = 0.0;
  double mean_ami = 0.0;
  std::vector<GroupOutcome> groups;
};

// k-fold cross-validation over homonym groups: the threshold is selected on
// the other k-1 folds, scores are averaged over the fold's test groups, and
// the overall numbers average the fold means.
CrossValResult cross_validate(const std::vector<ClusterGroup>& groups, int k,
                              int grid_size, std::uint64_t seed);

}  // namespace artid

#endif  // ARTID_CLUSTER_HPP_
