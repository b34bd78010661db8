#include "artid/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "artid/rng.hpp"

namespace artid {

namespace {

struct UnionFind {
  std::vector<int> parent;

  explicit UnionFind(int n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

double squared_euclidean(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) throw ShapeError("point dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

}  // namespace

Dendrogram ward_linkage(const std::vector<std::vector<float>>& points) {
  const int n = static_cast<int>(points.size());
  if (n < 2) throw DataError("clustering needs at least two points");

  // Squared-distance matrix over representative points; a merged cluster
  // keeps the smaller representative's slot.
  std::vector<double> d2(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double v = squared_euclidean(points[i], points[j]);
      d2[static_cast<std::size_t>(i) * n + j] = v;
      d2[static_cast<std::size_t>(j) * n + i] = v;
    }
  }

  std::vector<char> active(n, 1);
  std::vector<int> size(n, 1);

  struct RawMerge {
    int rep_a, rep_b;
    double d2;
  };
  std::vector<RawMerge> raw;
  raw.reserve(n - 1);

  std::vector<int> chain;
  chain.reserve(n);
  int remaining = n;
  while (remaining > 1) {
    if (chain.empty()) {
      for (int i = 0; i < n; ++i) {
        if (active[i]) {
          chain.push_back(i);
          break;
        }
      }
    }
    for (;;) {
      const int c = chain.back();
      // Nearest active neighbor, ties to the smallest index; preferring the
      // chain predecessor on ties keeps reciprocal pairs reciprocal.
      int nn = -1;
      double best = std::numeric_limits<double>::infinity();
      if (chain.size() >= 2) {
        nn = chain[chain.size() - 2];
        best = d2[static_cast<std::size_t>(c) * n + nn];
      }
      for (int i = 0; i < n; ++i) {
        if (!active[i] || i == c) continue;
        const double v = d2[static_cast<std::size_t>(c) * n + i];
        if (v < best) {
          best = v;
          nn = i;
        }
      }
      if (chain.size() >= 2 && nn == chain[chain.size() - 2]) {
        chain.pop_back();
        chain.pop_back();
        // Lance-Williams update for Ward onto the surviving slot.
        const int a = std::min(c, nn), b = std::max(c, nn);
        const double dab = d2[static_cast<std::size_t>(a) * n + b];
        const double sa = size[a], sb = size[b];
        for (int k = 0; k < n; ++k) {
          if (!active[k] || k == a || k == b) continue;
          const double sk = size[k];
          const double dak = d2[static_cast<std::size_t>(a) * n + k];
          const double dbk = d2[static_cast<std::size_t>(b) * n + k];
          const double v =
              ((sa + sk) * dak + (sb + sk) * dbk - sk * dab) / (sa + sb + sk);
          d2[static_cast<std::size_t>(a) * n + k] = v;
          d2[static_cast<std::size_t>(k) * n + a] = v;
        }
        active[b] = 0;
        size[a] = static_cast<int>(sa + sb);
        raw.push_back({a, b, dab});
        --remaining;
        break;
      }
      chain.push_back(nn);
    }
  }

  // Ward is reducible, so sorting by distance (stable for ties) yields a
  // valid global merge order; union-find rebuilds the cluster labels.
  std::stable_sort(raw.begin(), raw.end(),
                   [](const RawMerge& x, const RawMerge& y) { return x.d2 < y.d2; });

  Dendrogram out;
  out.n_points = n;
  out.steps.reserve(n - 1);
  UnionFind uf(n);
  std::vector<int> label(n), csize(n, 1);
  std::iota(label.begin(), label.end(), 0);
  for (std::size_t k = 0; k < raw.size(); ++k) {
    const int ra = uf.find(raw[k].rep_a);
    const int rb = uf.find(raw[k].rep_b);
    MergeStep step;
    step.a = std::min(label[ra], label[rb]);
    step.b = std::max(label[ra], label[rb]);
    step.distance = std::sqrt(std::max(0.0, raw[k].d2));
    step.size = csize[ra] + csize[rb];
    uf.unite(ra, rb);
    const int root = uf.find(ra);
    label[root] = n + static_cast<int>(k);
    csize[root] = step.size;
    out.steps.push_back(step);
  }
  return out;
}

std::vector<int> flat_clusters(const Dendrogram& dendrogram, double t) {
  const int n = dendrogram.n_points;
  // cluster id -> representative original point
  std::vector<int> rep(static_cast<std::size_t>(n) + dendrogram.steps.size());
  std::iota(rep.begin(), rep.begin() + n, 0);
  UnionFind uf(n);
  for (std::size_t k = 0; k < dendrogram.steps.size(); ++k) {
    const MergeStep& step = dendrogram.steps[k];
    const int ra = rep[step.a];
    const int rb = rep[step.b];
    if (step.distance < t) uf.unite(ra, rb);
    rep[n + k] = ra;
  }
  std::vector<int> labels(n, -1);
  std::vector<int> canonical(n, -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    const int root = uf.find(i);
    if (canonical[root] < 0) canonical[root] = next++;
    labels[i] = canonical[root];
  }
  return labels;
}

namespace {

struct Contingency {
  std::vector<std::vector<double>> cells;  // rows: p clusters, cols: q clusters
  std::vector<double> row_sums;
  std::vector<double> col_sums;
  double n = 0.0;
};

std::vector<int> compact_labels(const std::vector<int>& labels, int& count) {
  std::vector<int> out(labels.size());
  std::vector<std::pair<int, int>> seen;  // (original, compact)
  count = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int mapped = -1;
    for (const auto& [orig, compact] : seen) {
      if (orig == labels[i]) {
        mapped = compact;
        break;
      }
    }
    if (mapped < 0) {
      mapped = count++;
      seen.emplace_back(labels[i], mapped);
    }
    out[i] = mapped;
  }
  return out;
}

Contingency build_contingency(const std::vector<int>& p, const std::vector<int>& q) {
  if (p.size() != q.size()) {
    throw DataError("partitions must cover the same element set");
  }
  int rows = 0, cols = 0;
  const auto cp = compact_labels(p, rows);
  const auto cq = compact_labels(q, cols);
  Contingency c;
  c.cells.assign(rows, std::vector<double>(cols, 0.0));
  c.row_sums.assign(rows, 0.0);
  c.col_sums.assign(cols, 0.0);
  c.n = static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    c.cells[cp[i]][cq[i]] += 1.0;
    c.row_sums[cp[i]] += 1.0;
    c.col_sums[cq[i]] += 1.0;
  }
  return c;
}

double comb2(double x) { return x * (x - 1.0) / 2.0; }

bool partitions_equal(const std::vector<int>& p, const std::vector<int>& q) {
  int rows = 0, cols = 0;
  return compact_labels(p, rows) == compact_labels(q, cols);
}

}  // namespace

double adjusted_rand_index(const std::vector<int>& p, const std::vector<int>& q) {
  const Contingency c = build_contingency(p, q);
  if (c.n < 2.0) return 1.0;

  double sum_cells = 0.0;
  for (const auto& row : c.cells) {
    for (double v : row) sum_cells += comb2(v);
  }
  double sum_rows = 0.0, sum_cols = 0.0;
  for (double v : c.row_sums) sum_rows += comb2(v);
  for (double v : c.col_sums) sum_cols += comb2(v);

  const double total = comb2(c.n);
  const double expected = sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  const double denom = max_index - expected;
  if (denom == 0.0) return 1.0;  // both partitions trivial and identical
  return (sum_cells - expected) / denom;
}

namespace {

// Exact expected mutual information under the hypergeometric model of
// random partitions with fixed cluster sizes.
double expected_mutual_information(const Contingency& c) {
  const double n = c.n;
  const double lg_n = std::lgamma(n + 1.0);
  double emi = 0.0;
  for (double a : c.row_sums) {
    for (double b : c.col_sums) {
      const double lo = std::max(1.0, a + b - n);
      const double hi = std::min(a, b);
      for (double nij = lo; nij <= hi + 0.5; nij += 1.0) {
        const double term = (nij / n) * std::log(n * nij / (a * b));
        const double log_p = std::lgamma(a + 1.0) + std::lgamma(b + 1.0) +
                             std::lgamma(n - a + 1.0) + std::lgamma(n - b + 1.0) -
                             lg_n - std::lgamma(nij + 1.0) -
                             std::lgamma(a - nij + 1.0) -
                             std::lgamma(b - nij + 1.0) -
                             std::lgamma(n - a - b + nij + 1.0);
        emi += term * std::exp(log_p);
      }
    }
  }
  return emi;
}

double entropy(const std::vector<double>& sizes, double n) {
  double h = 0.0;
  for (double s : sizes) {
    if (s > 0.0) h -= (s / n) * std::log(s / n);
  }
  return h;
}

}  // namespace

double adjusted_mutual_information(const std::vector<int>& p,
                                   const std::vector<int>& q) {
  const Contingency c = build_contingency(p, q);
  if (c.n < 1.0) return 1.0;

  double mi = 0.0;
  for (std::size_t i = 0; i < c.cells.size(); ++i) {
    for (std::size_t j = 0; j < c.cells[i].size(); ++j) {
      const double nij = c.cells[i][j];
      if (nij > 0.0) {
        mi += (nij / c.n) * std::log(c.n * nij / (c.row_sums[i] * c.col_sums[j]));
      }
    }
  }
  const double emi = expected_mutual_information(c);
  const double h_max = std::max(entropy(c.row_sums, c.n), entropy(c.col_sums, c.n));
  const double denom = h_max - emi;
  if (std::abs(denom) < 1e-15) return partitions_equal(p, q) ? 1.0 : 0.0;
  return (mi - emi) / denom;
}

std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo)) {
    throw ConfigError("log grid needs 0 < lo <= hi");
  }
  if (count < 1) throw ConfigError("grid needs at least one value");
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double ratio = std::log(hi / lo);
  for (int i = 0; i < count; ++i) {
    grid[i] = lo * std::exp(ratio * static_cast<double>(i) / (count - 1));
  }
  return grid;
}

double select_threshold(const std::vector<ClusterGroup>& dev_groups,
                        const std::vector<double>& grid) {
  if (dev_groups.empty()) throw DataError("threshold selection needs dev groups");
  if (grid.empty()) throw ConfigError("threshold selection needs a grid");

  std::vector<Dendrogram> dendrograms;
  dendrograms.reserve(dev_groups.size());
  for (const auto& g : dev_groups) {
    if (g.points.size() != g.labels.size()) {
      throw DataError("group '" + g.group_id + "' has mismatched points and labels");
    }
    dendrograms.push_back(ward_linkage(g.points));
  }

  double best_t = grid.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (double t : grid) {
    double score = 0.0;
    for (std::size_t g = 0; g < dev_groups.size(); ++g) {
      const auto predicted = flat_clusters(dendrograms[g], t);
      score += adjusted_mutual_information(predicted, dev_groups[g].labels);
    }
    score /= static_cast<double>(dev_groups.size());
    if (score > best_score) {
      best_score = score;
      best_t = t;
    }
  }
  return best_t;
}

CrossValResult cross_validate(const std::vector<ClusterGroup>& groups, int k,
                              int grid_size, std::uint64_t seed) {
  if (k < 2) throw ConfigError("cross-validation needs k >= 2 folds");
  if (grid_size < 1) throw ConfigError("grid_size must be >= 1");
  if (groups.size() < static_cast<std::size_t>(k)) {
    throw DataError("need at least " + std::to_string(k) + " groups for " +
                    std::to_string(k) + "-fold cross-validation, have " +
                    std::to_string(groups.size()));
  }

  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x63766631));
  rng.shuffle(order);
  std::vector<int> fold_of(groups.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    fold_of[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  }

  CrossValResult result;
  for (int fold = 0; fold < k; ++fold) {
    std::vector<ClusterGroup> dev;
    std::vector<std::size_t> test_ids;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (fold_of[g] == fold) {
        test_ids.push_back(g);
      } else {
        dev.push_back(groups[g]);
      }
    }

    // Grid spans the merge distances observed on the dev groups.
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& g : dev) {
      const Dendrogram dg = ward_linkage(g.points);
      for (const auto& step : dg.steps) {
        if (step.distance > 0.0) lo = std::min(lo, step.distance);
        hi = std::max(hi, step.distance);
      }
    }
    if (!(hi > 0.0)) {
      lo = hi = 1e-12;  // all dev points identical; any threshold behaves alike
    }
    if (!std::isfinite(lo)) lo = hi;
    const auto grid = log_grid(lo, hi, grid_size);
    const double t = select_threshold(dev, grid);

    FoldScore score;
    score.fold = fold + 1;
    score.threshold = t;
    for (std::size_t g : test_ids) {
      const Dendrogram dg = ward_linkage(groups[g].points);
      GroupOutcome outcome;
      outcome.group_id = groups[g].group_id;
      outcome.fold = fold + 1;
      outcome.predicted = flat_clusters(dg, t);
      outcome.truth = groups[g].labels;
      outcome.ari = adjusted_rand_index(outcome.predicted, outcome.truth);
      outcome.ami = adjusted_mutual_information(outcome.predicted, outcome.truth);
      score.ari += outcome.ari;
      score.ami += outcome.ami;
      result.groups.push_back(std::move(outcome));
    }
    if (!test_ids.empty()) {
      score.ari /= static_cast<double>(test_ids.size());
      score.ami /= static_cast<double>(test_ids.size());
    }
    result.folds.push_back(score);
  }

  for (const auto& f : result.folds) {
    result.mean_ari += f.ari;
    result.mean_ami += f.ami;
  }
  result.mean_ari /= static_cast<double>(result.folds.size());
  result.mean_ami /= static_cast<double>(result.folds.size());
  return result;
}

}  // namespace artid
