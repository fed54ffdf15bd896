#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "odsage/matrix.hpp"
#include "odsage/network.hpp"

namespace odsage {

enum class DistKind { temporal_dtw, temporal_fft, centroid, origin, destination };

std::string dist_kind_name(DistKind kind);
DistKind dist_kind_from_name(const std::string& name);

// Symmetric pairwise OD-pair distances with zero diagonal.
struct DistanceMatrix {
  Matrix values;
  DistKind kind = DistKind::temporal_dtw;

  int n() const { return values.rows; }
};

// Undirected graph over the OD-pair vertex set; edges stored as (i, j)
// with i < j, sorted.
struct OdGraph {
  int n = 0;
  DistKind kind = DistKind::temporal_dtw;
  std::vector<std::pair<int, int>> edges;
};

/// Classic dynamic-time-warping distance with absolute-difference local
/// cost and an unconstrained warping window. O(len(a) * len(b)).
double dtw_distance(const std::vector<double>& a, const std::vector<double>& b);

/// In-place radix-2 FFT; size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& data, bool inverse = false);

/// Magnitude spectrum of a real series zero-padded to the next power of two.
std::vector<double> magnitude_spectrum(const std::vector<double>& x, size_t pad_to = 0);

/// Euclidean distance between the magnitude spectra of two equal-length
/// series (phase discarded).
double fft_distance(const std::vector<double>& a, const std::vector<double>& b);

enum class SpatialKind { centroid, origin, destination };

// Euclidean station-coordinate distances between OD pairs: midpoint of
// the OD segment (centroid), origin stations, or destination stations.
DistanceMatrix spatial_distance_matrix(const std::vector<OdPair>& ods, const Network& net,
                                       SpatialKind kind, int threads = 1);

enum class TemporalMethod { dtw, fft };

// Pairwise DTW or FFT distances between per-OD demand series. All series
// must share one length >= 2.
DistanceMatrix temporal_distance_matrix(const std::vector<std::vector<double>>& series,
                                        TemporalMethod method, int threads = 1);

/// Edge (i, j) iff D_ij <= sigma, i != j.
OdGraph threshold_graph(const DistanceMatrix& d, double sigma);

/// q-quantile (linear interpolation) of the off-diagonal distances, so a
/// threshold graph at the returned value connects about fraction q of pairs.
double percentile_threshold(const DistanceMatrix& d, double q);

/// The max_edges unordered pairs with the smallest distances; ties break
/// lexicographically on (i, j).
OdGraph cap_edges(const DistanceMatrix& d, int64_t max_edges);

// Edge-list CSV `src,dst,distance` plus a construction-metadata JSON
// fragment (kind, parameter, reproducibility hash).
std::string graph_to_csv(const OdGraph& g, const DistanceMatrix& d);
OdGraph graph_from_csv(const std::string& path, int n, DistKind kind);
std::string graph_metadata_json(const OdGraph& g, const std::string& rule, double parameter);

}  // namespace odsage
