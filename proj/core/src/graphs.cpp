#include "odsage/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "odsage/io.hpp"
#include "odsage/stats.hpp"

namespace odsage {

std::string dist_kind_name(DistKind kind) {
  switch (kind) {
    case DistKind::temporal_dtw: return "temporal_dtw";
    case DistKind::temporal_fft: return "temporal_fft";
    case DistKind::centroid: return "centroid";
    case DistKind::origin: return "origin";
    case DistKind::destination: return "destination";
  }
  return "unknown";
}

DistKind dist_kind_from_name(const std::string& name) {
  if (name == "temporal_dtw") return DistKind::temporal_dtw;
  if (name == "temporal_fft") return DistKind::temporal_fft;
  if (name == "centroid") return DistKind::centroid;
  if (name == "origin") return DistKind::origin;
  if (name == "destination") return DistKind::destination;
  throw std::invalid_argument("unknown distance kind: " + name);
}

double dtw_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("dtw of empty series");
  const size_t n = a.size();
  const size_t m = b.size();
  constexpr double kInf = 1e300;
  std::vector<double> prev(m + 1, kInf), curr(m + 1, kInf);
  prev[0] = 0.0;
  for (size_t i = 1; i <= n; ++i) {
    curr[0] = kInf;
    for (size_t j = 1; j <= m; ++j) {
      const double cost = std::fabs(a[i - 1] - b[j - 1]);
      curr[j] = cost + std::min(prev[j], std::min(curr[j - 1], prev[j - 1]));
    }
    std::swap(prev, curr);
  }
  return prev[m];
}

void fft_radix2(std::vector<std::complex<double>>& data, bool inverse) {
  const size_t n = data.size();
  if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft size must be a power of two");
  // Bit-reversal permutation.
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double angle = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = data[i + k];
        const std::complex<double> v = data[i + k + len / 2] * w;
        data[i + k] = u + v;
        data[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse)
    for (auto& x : data) x /= static_cast<double>(n);
}

namespace {

size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

std::vector<double> magnitude_spectrum(const std::vector<double>& x, size_t pad_to) {
  if (x.empty()) throw std::invalid_argument("spectrum of empty series");
  const size_t n = pad_to == 0 ? next_pow2(x.size()) : pad_to;
  if (n < x.size() || (n & (n - 1)) != 0)
    throw std::invalid_argument("pad size must be a power of two >= series length");
  std::vector<std::complex<double>> buf(n, {0.0, 0.0});
  for (size_t i = 0; i < x.size(); ++i) buf[i] = {x[i], 0.0};
  fft_radix2(buf);
  std::vector<double> mag(n);
  for (size_t i = 0; i < n; ++i) mag[i] = std::abs(buf[i]);
  return mag;
}

double fft_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("fft distance of empty series");
  if (a.size() != b.size()) throw std::invalid_argument("fft distance needs equal lengths");
  const size_t n = next_pow2(a.size());
  const auto ma = magnitude_spectrum(a, n);
  const auto mb = magnitude_spectrum(b, n);
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) sum += (ma[i] - mb[i]) * (ma[i] - mb[i]);
  return std::sqrt(sum);
}

namespace {

template <typename Fn>
void run_rows(int n, int threads, Fn&& fn) {
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  const int chunk = (n + threads - 1) / threads;
  for (int w = 0; w < threads; ++w) {
    const int from = w * chunk;
    const int to = std::min(n, from + chunk);
    if (from >= to) break;
    workers.emplace_back([&fn, from, to]() {
      for (int i = from; i < to; ++i) fn(i);
    });
  }
  for (auto& t : workers) t.join();
}

}  // namespace

DistanceMatrix spatial_distance_matrix(const std::vector<OdPair>& ods, const Network& net,
                                       SpatialKind kind, int threads) {
  const int n = static_cast<int>(ods.size());
  std::vector<double> px(n), py(n);
  for (int i = 0; i < n; ++i) {
    const auto& o = net.stations()[ods[i].origin];
    const auto& d = net.stations()[ods[i].destination];
    switch (kind) {
      case SpatialKind::centroid:
        px[i] = 0.5 * (o.utm_x + d.utm_x);
        py[i] = 0.5 * (o.utm_y + d.utm_y);
        break;
      case SpatialKind::origin:
        px[i] = o.utm_x;
        py[i] = o.utm_y;
        break;
      case SpatialKind::destination:
        px[i] = d.utm_x;
        py[i] = d.utm_y;
        break;
    }
  }
  DistanceMatrix dm;
  dm.kind = kind == SpatialKind::centroid ? DistKind::centroid
            : kind == SpatialKind::origin ? DistKind::origin
                                          : DistKind::destination;
  dm.values = Matrix(n, n);
  run_rows(n, threads, [&](int i) {
    double* row = dm.values.row(i);
    for (int j = 0; j < n; ++j)
      row[j] = std::hypot(px[i] - px[j], py[i] - py[j]);
    row[i] = 0.0;
  });
  return dm;
}

DistanceMatrix temporal_distance_matrix(const std::vector<std::vector<double>>& series,
                                        TemporalMethod method, int threads) {
  const int n = static_cast<int>(series.size());
  if (n == 0) throw std::invalid_argument("no series");
  const size_t len = series[0].size();
  if (len < 2) throw std::invalid_argument("series too short");
  for (const auto& s : series)
    if (s.size() != len) throw std::invalid_argument("series lengths differ");

  DistanceMatrix dm;
  dm.values = Matrix(n, n);

  if (method == TemporalMethod::fft) {
    dm.kind = DistKind::temporal_fft;
    const size_t pad = next_pow2(len);
    Matrix spectra(n, static_cast<int>(pad));
    run_rows(n, threads, [&](int i) {
      const auto mag = magnitude_spectrum(series[i], pad);
      std::copy(mag.begin(), mag.end(), spectra.row(i));
    });
    run_rows(n, threads, [&](int i) {
      const double* si = spectra.row(i);
      double* row = dm.values.row(i);
      for (int j = 0; j < n; ++j) {
        const double* sj = spectra.row(j);
        double sum = 0.0;
        for (size_t k = 0; k < pad; ++k) sum += (si[k] - sj[k]) * (si[k] - sj[k]);
        row[j] = std::sqrt(sum);
      }
      row[i] = 0.0;
    });
  } else {
    dm.kind = DistKind::temporal_dtw;
    // Upper triangle only; mirrored afterwards.
    run_rows(n, threads, [&](int i) {
      for (int j = i + 1; j < n; ++j) dm.values.at(i, j) = dtw_distance(series[i], series[j]);
    });
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j) dm.values.at(i, j) = dm.values.at(j, i);
  }
  return dm;
}

OdGraph threshold_graph(const DistanceMatrix& d, double sigma) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("threshold must be >= 0");
  OdGraph g;
  g.n = d.n();
  g.kind = d.kind;
  for (int i = 0; i < g.n; ++i)
    for (int j = i + 1; j < g.n; ++j)
      if (d.values.at(i, j) <= sigma) g.edges.push_back({i, j});
  return g;
}

double percentile_threshold(const DistanceMatrix& d, double q) {
  const int n = d.n();
  if (n < 2) throw std::invalid_argument("need at least two vertices");
  if (!(q > 0.0) || q > 1.0) throw std::invalid_argument("quantile fraction must be in (0,1]");
  std::vector<double> off;
  off.reserve(static_cast<size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) off.push_back(d.values.at(i, j));
  return quantile_linear(std::move(off), q);
}

OdGraph cap_edges(const DistanceMatrix& d, int64_t max_edges) {
  if (max_edges < 0) throw std::invalid_argument("edge cap must be >= 0");
  const int n = d.n();
  OdGraph g;
  g.n = n;
  g.kind = d.kind;
  if (max_edges == 0 || n < 2) return g;

  // Keep the max_edges smallest (distance, i, j) triples with a bounded
  // max-heap; lexicographic (i, j) breaks distance ties.
  struct Entry {
    double dist;
    int i, j;
    bool operator<(const Entry& o) const {  // heap: largest on top
      if (dist != o.dist) return dist < o.dist;
      if (i != o.i) return i < o.i;
      return j < o.j;
    }
  };
  std::priority_queue<Entry> heap;
  for (int i = 0; i < n; ++i) {
    const double* row = d.values.row(i);
    for (int j = i + 1; j < n; ++j) {
      const Entry e{row[j], i, j};
      if (static_cast<int64_t>(heap.size()) < max_edges) {
        heap.push(e);
      } else if (e < heap.top()) {
        heap.pop();
        heap.push(e);
      }
    }
  }
  g.edges.reserve(heap.size());
  while (!heap.empty()) {
    g.edges.push_back({heap.top().i, heap.top().j});
    heap.pop();
  }
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

std::string graph_to_csv(const OdGraph& g, const DistanceMatrix& d) {
  std::ostringstream out;
  out << "src,dst,distance\n";
  for (const auto& [i, j] : g.edges) out << i << ',' << j << ',' << fmt_g(d.values.at(i, j)) << '\n';
  return out.str();
}

OdGraph graph_from_csv(const std::string& path, int n, DistKind kind) {
  OdGraph g;
  g.n = n;
  g.kind = kind;
  for (const auto& row : read_csv_rows(path))
    g.edges.push_back({std::stoi(row.at(0)), std::stoi(row.at(1))});
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

std::string graph_metadata_json(const OdGraph& g, const std::string& rule, double parameter) {
  uint64_t h = 1469598103934665603ull;
  for (const auto& [i, j] : g.edges) {
    h = fnv1a64(&i, sizeof(i), h);
    h = fnv1a64(&j, sizeof(j), h);
  }
  nlohmann::json meta{{"kind", dist_kind_name(g.kind)},
                      {"vertices", g.n},
                      {"edges", g.edges.size()},
                      {"rule", rule},
                      {"parameter", parameter},
                      {"edge_hash", h}};
  return meta.dump(2) + "\n";
}

}  // namespace odsage
