#include "coherency/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "coherency/error.hpp"

namespace coherency {

namespace {

constexpr double kTieRel = 1e-9;

bool near_equal(double a, double b) {
  return std::abs(a - b) <= kTieRel * std::max(std::abs(a), std::abs(b));
}

double mean_distance_to(std::size_t bus, std::span<const std::size_t> members,
                        const DistanceState& d2) {
  double sum = 0.0;
  for (auto m : members) sum += d2(bus, m);
  return sum / static_cast<double>(members.size());
}

}  // namespace

double cluster_spread2(std::span<const std::size_t> members, const DistanceState& d2) {
  const std::size_t m = members.size();
  if (m < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) sum += d2(members[a], members[b]);
  }
  // Ordered pairs count each unordered pair twice: 2*sum / (2 M^2).
  return sum / static_cast<double>(m * m);
}

double centroid_gap2(std::span<const std::size_t> a, std::span<const std::size_t> b,
                     const DistanceState& d2) {
  if (a.empty() || b.empty()) throw std::invalid_argument("centroid_gap2: empty member set");
  double cross = 0.0;
  for (auto i : a) {
    for (auto j : b) cross += d2(i, j);
  }
  cross /= static_cast<double>(a.size() * b.size());
  return std::max(0.0, cross - cluster_spread2(a, d2) - cluster_spread2(b, d2));
}

double within_cluster_eccentricity(std::size_t bus, std::span<const std::size_t> members,
                                   const DistanceState& d2) {
  std::vector<std::size_t> set(members.begin(), members.end());
  if (std::find(set.begin(), set.end(), bus) == set.end()) set.push_back(bus);
  const double s2 = cluster_spread2(set, d2);
  if (!(s2 > 0.0)) return 2.0;
  const double dist2 = std::max(0.0, mean_distance_to(bus, set, d2) - s2);
  return 1.0 + dist2 / s2;
}

std::vector<double> centroid(const Cluster& cluster, const Trajectories& trajectories) {
  if (cluster.members.empty()) return {};
  const std::size_t k = trajectories.at(cluster.members.front()).size();
  std::vector<double> c(k, 0.0);
  for (auto m : cluster.members) {
    const auto& t = trajectories.at(m);
    if (t.size() != k) throw StreamShapeError("centroid: trajectories differ in length");
    for (std::size_t s = 0; s < k; ++s) c[s] += t[s];
  }
  for (auto& v : c) v /= static_cast<double>(cluster.members.size());
  return c;
}

double cluster_tau_variance(const Cluster& cluster, std::span<const double> tau) {
  const auto& m = cluster.members;
  if (m.empty()) throw std::invalid_argument("cluster_tau_variance: empty cluster");
  double mean = 0.0;
  for (auto b : m) mean += tau[b];
  mean /= static_cast<double>(m.size());
  double ss = 0.0;
  for (auto b : m) ss += (tau[b] - mean) * (tau[b] - mean);
  return ss / static_cast<double>(m.size());
}

void refresh_cluster(Cluster& c, const DistanceState& d2, std::span<const double> tau) {
  if (c.members.empty()) throw std::invalid_argument("refresh_cluster: empty cluster");
  std::sort(c.members.begin(), c.members.end());
  c.seed_bus = c.members.front();
  c.center_bus = c.members.front();
  double best_center = mean_distance_to(c.center_bus, c.members, d2);
  for (auto b : c.members) {
    if (tau[b] > tau[c.seed_bus]) c.seed_bus = b;
    const double md = mean_distance_to(b, c.members, d2);
    if (md < best_center) {
      best_center = md;
      c.center_bus = b;
    }
  }
  c.peak_tau = tau[c.seed_bus];
  c.spread_sigma = std::sqrt(cluster_spread2(c.members, d2));
  c.tau_variance = cluster_tau_variance(c, tau);
}

void sort_clusters(std::vector<Cluster>& clusters) {
  std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
    if (a.peak_tau != b.peak_tau) return a.peak_tau > b.peak_tau;
    return a.seed_bus < b.seed_bus;
  });
}

std::vector<std::size_t> proximity_chain(std::span<const double> tau, const DistanceState& d2) {
  const std::size_t n = tau.size();
  if (n == 0) return {};
  if (d2.buses() != n) throw StreamShapeError("proximity_chain: tau/d2 size mismatch");
  std::size_t start = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (tau[i] > tau[start]) start = i;
  }
  std::vector<std::size_t> chain{start};
  std::vector<bool> visited(n, false);
  visited[start] = true;
  while (chain.size() < n) {
    const std::size_t last = chain.back();
    std::size_t next = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (visited[j]) continue;
      if (next == n || d2(last, j) < d2(last, next)) next = j;
    }
    visited[next] = true;
    chain.push_back(next);
  }
  return chain;
}

std::vector<std::size_t> detect_seeds(std::span<const std::size_t> chain,
                                      std::span<const double> tau) {
  if (chain.empty()) throw std::invalid_argument("detect_seeds: empty chain");
  std::vector<std::size_t> seeds{chain.front()};
  const std::size_t n = chain.size();
  std::size_t p = 1;
  while (p < n) {
    const double v = tau[chain[p]];
    if (v > tau[chain[p - 1]]) {
      // Rising edge: walk to the end of the plateau and check it falls (or ends).
      std::size_t r = p;
      while (r + 1 < n && tau[chain[r + 1]] == v) ++r;
      if (r + 1 == n || tau[chain[r + 1]] < v) seeds.push_back(chain[p]);
      p = r + 1;
    } else {
      ++p;
    }
  }
  return seeds;
}

ClusterSet assign_members(std::span<const std::size_t> seeds, const DistanceState& d2,
                          std::span<const double> tau) {
  if (seeds.empty()) throw std::invalid_argument("assign_members: no seeds");
  const std::size_t n = d2.buses();
  std::vector<Cluster> clusters(seeds.size());
  std::vector<int> seed_slot(n, -1);
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    clusters[s].members = {seeds[s]};
    seed_slot[seeds[s]] = static_cast<int>(s);
  }

  struct Tied {
    std::size_t bus;
    std::vector<std::size_t> slots;
  };
  std::vector<Tied> tied;
  for (std::size_t b = 0; b < n; ++b) {
    if (seed_slot[b] >= 0) continue;
    double best = d2(b, seeds[0]);
    for (auto s : seeds) best = std::min(best, d2(b, s));
    std::vector<std::size_t> slots;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      if (near_equal(d2(b, seeds[s]), best)) slots.push_back(s);
    }
    if (slots.size() == 1) {
      clusters[slots.front()].members.push_back(b);
    } else {
      tied.push_back({b, std::move(slots)});
    }
  }

  // Equidistant buses go where they are least eccentric; remaining ties go
  // to the lower seed index.
  for (const auto& t : tied) {
    std::size_t pick = t.slots.front();
    double pick_eps = within_cluster_eccentricity(t.bus, clusters[pick].members, d2);
    for (std::size_t k = 1; k < t.slots.size(); ++k) {
      const std::size_t s = t.slots[k];
      const double e = within_cluster_eccentricity(t.bus, clusters[s].members, d2);
      const bool lower_id = seeds[s] < seeds[pick];
      if ((e < pick_eps && !near_equal(e, pick_eps)) || (near_equal(e, pick_eps) && lower_id)) {
        pick = s;
        pick_eps = e;
      }
    }
    clusters[pick].members.push_back(t.bus);
  }

  for (auto& c : clusters) refresh_cluster(c, d2, tau);
  sort_clusters(clusters);
  return ClusterSet{std::move(clusters), d2.samples()};
}

ClusterSet merge_clusters(ClusterSet cs, const DistanceState& d2, std::span<const double> tau) {
  auto& cl = cs.clusters;
  for (;;) {
    std::size_t bi = 0;
    std::size_t bj = 0;
    double best_gap = -1.0;
    for (std::size_t i = 0; i < cl.size(); ++i) {
      for (std::size_t j = i + 1; j < cl.size(); ++j) {
        const double gap = std::sqrt(centroid_gap2(cl[i].members, cl[j].members, d2));
        const double limit = 2.0 * std::max(cl[i].spread_sigma, cl[j].spread_sigma);
        if (gap <= limit && (best_gap < 0.0 || gap < best_gap)) {
          best_gap = gap;
          bi = i;
          bj = j;
        }
      }
    }
    if (best_gap < 0.0) break;
    // Canonical order puts the higher peak (then lower seed) first.
    auto& keep = cl[bi];
    const auto& gone = cl[bj];
    keep.members.insert(keep.members.end(), gone.members.begin(), gone.members.end());
    refresh_cluster(keep, d2, tau);
    cl.erase(cl.begin() + static_cast<std::ptrdiff_t>(bj));
    sort_clusters(cl);
  }
  return cs;
}

ClusterSet cluster_buses(const TdaProperties& props, const DistanceState& d2) {
  const auto chain = proximity_chain(props.tau, d2);
  const auto seeds = detect_seeds(chain, props.tau);
  auto cs = assign_members(seeds, d2, props.tau);
  cs = merge_clusters(std::move(cs), d2, props.tau);
  cs.iteration_k = d2.samples();
  return cs;
}

}  // namespace coherency
