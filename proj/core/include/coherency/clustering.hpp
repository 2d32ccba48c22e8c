#pragma once

// Parameter-free grouping of buses from typicality and pairwise distances.
//
//   1. proximity_chain: nearest-neighbour walk starting at the peak-tau bus
//   2. detect_seeds:    local maxima of tau along that walk
//   3. assign_members:  every other bus joins its nearest seed
//   4. merge_clusters:  clusters whose centroids lie within 2 sigma merge,
//                       the higher-typicality cluster absorbing the other
//
// Every cluster statistic (centroid gaps, spreads, within-cluster
// eccentricity) is derived from the squared-distance matrix, so no
// trajectory data is touched here. Ties are broken by ascending bus index.

#include <cstddef>
#include <span>
#include <vector>

#include "coherency/tda.hpp"

namespace coherency {

struct Cluster {
  std::size_t seed_bus = 0;          // member with the highest tau
  std::vector<std::size_t> members;  // ascending
  double peak_tau = 0.0;
  double spread_sigma = 0.0;         // RMS member distance to the centroid, Hz
  double tau_variance = 0.0;         // population variance of member tau
  std::size_t center_bus = 0;        // member nearest the cluster centroid

  bool operator==(const Cluster&) const = default;
};

struct ClusterSet {
  std::vector<Cluster> clusters;  // descending peak_tau, then ascending seed
  std::size_t iteration_k = 0;

  bool operator==(const ClusterSet&) const = default;
};

std::vector<std::size_t> proximity_chain(std::span<const double> tau, const DistanceState& d2);

// Positions are not returned; the result holds bus indices taken from chain.
std::vector<std::size_t> detect_seeds(std::span<const std::size_t> chain,
                                      std::span<const double> tau);

ClusterSet assign_members(std::span<const std::size_t> seeds, const DistanceState& d2,
                          std::span<const double> tau);

ClusterSet merge_clusters(ClusterSet cs, const DistanceState& d2, std::span<const double> tau);

double cluster_tau_variance(const Cluster& cluster, std::span<const double> tau);

// Chain, seeds, assignment and merging in one call.
ClusterSet cluster_buses(const TdaProperties& props, const DistanceState& d2);

// Mean squared distance of members to their centroid.
double cluster_spread2(std::span<const std::size_t> members, const DistanceState& d2);

// Squared distance between the centroids of two member sets.
double centroid_gap2(std::span<const std::size_t> a, std::span<const std::size_t> b,
                     const DistanceState& d2);

// Eccentricity of `bus` within `members` plus `bus`, after the closed form
// 1 + |x - mu|^2 / sigma^2. Returns 2 when the set has no spread.
double within_cluster_eccentricity(std::size_t bus, std::span<const std::size_t> members,
                                   const DistanceState& d2);

// Mean member trajectory. Reference helper; the pipeline works from d2 only.
std::vector<double> centroid(const Cluster& cluster, const Trajectories& trajectories);

// Refreshes seed, peak, spread, center and variance from the member list.
void refresh_cluster(Cluster& c, const DistanceState& d2, std::span<const double> tau);

// Sorts clusters into the canonical order.
void sort_clusters(std::vector<Cluster>& clusters);

}  // namespace coherency
