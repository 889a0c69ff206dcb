#include "camp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "camp/metrics.hpp"
#include "camp/rng.hpp"

namespace camp {

namespace {

std::vector<double> matvec(const std::vector<std::vector<double>>& m,
                           const std::vector<double>& v) {
  std::vector<double> out(m.size(), 0.0);
  for (size_t i = 0; i < m.size(); ++i) {
    for (size_t j = 0; j < v.size(); ++j) out[i] += m[i][j] * v[j];
  }
  return out;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> power_iterate(const std::vector<std::vector<double>>& cov, Rng& rng,
                                  int32_t iterations, double* eigenvalue) {
  const size_t d = cov.size();
  std::vector<double> v(d);
  for (double& x : v) x = rng.normal();
  double n = norm(v);
  for (double& x : v) x /= n;
  for (int32_t it = 0; it < iterations; ++it) {
    std::vector<double> w = matvec(cov, v);
    n = norm(w);
    if (n < 1e-300) break;  // degenerate direction; keep the previous vector
    for (size_t i = 0; i < d; ++i) v[i] = w[i] / n;
  }
  std::vector<double> w = matvec(cov, v);
  double lambda = 0.0;
  for (size_t i = 0; i < d; ++i) lambda += v[i] * w[i];
  *eigenvalue = lambda;
  return v;
}

}  // namespace

Pca2 pca_top2(const std::vector<std::vector<double>>& points, uint64_t seed,
              int32_t iterations) {
  if (points.size() < 3) throw std::invalid_argument("pca_top2: need at least 3 points");
  const size_t d = points[0].size();
  if (d < 2) throw std::invalid_argument("pca_top2: need dimension >= 2");
  for (const auto& p : points) {
    if (p.size() != d) throw std::invalid_argument("pca_top2: ragged input");
  }

  Pca2 out;
  out.center.assign(d, 0.0);
  for (const auto& p : points) {
    for (size_t j = 0; j < d; ++j) out.center[j] += p[j];
  }
  for (double& c : out.center) c /= static_cast<double>(points.size());

  std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
  for (const auto& p : points) {
    for (size_t i = 0; i < d; ++i) {
      const double ci = p[i] - out.center[i];
      for (size_t j = 0; j < d; ++j) cov[i][j] += ci * (p[j] - out.center[j]);
    }
  }
  for (auto& row : cov) {
    for (double& v : row) v /= static_cast<double>(points.size());
  }

  Rng rng(seed);
  out.components[0] = power_iterate(cov, rng, iterations, &out.eigenvalues[0]);
  // Deflate and repeat for the second direction.
  for (size_t i = 0; i < d; ++i) {
    for (size_t j = 0; j < d; ++j) {
      cov[i][j] -= out.eigenvalues[0] * out.components[0][i] * out.components[0][j];
    }
  }
  out.components[1] = power_iterate(cov, rng, iterations, &out.eigenvalues[1]);
  // Re-orthonormalize the second direction against the first.
  double dot = 0.0;
  for (size_t i = 0; i < d; ++i) dot += out.components[0][i] * out.components[1][i];
  for (size_t i = 0; i < d; ++i) out.components[1][i] -= dot * out.components[0][i];
  const double n2 = norm(out.components[1]);
  if (n2 > 1e-12) {
    for (double& v : out.components[1]) v /= n2;
  }
  return out;
}

std::array<double, 2> pca_project(const Pca2& pca, const std::vector<double>& point) {
  if (point.size() != pca.center.size()) {
    throw std::invalid_argument("pca_project: dimension mismatch");
  }
  std::array<double, 2> out{0.0, 0.0};
  for (size_t c = 0; c < 2; ++c) {
    for (size_t j = 0; j < point.size(); ++j) {
      out[c] += (point[j] - pca.center[j]) * pca.components[c][j];
    }
  }
  return out;
}

namespace {
std::vector<double> ranks_of(const std::vector<double>& x) {
  const size_t n = x.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}
}  // namespace

double spearman_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("spearman: need two equally sized series of length >= 2");
  }
  const auto rx = ranks_of(x);
  const auto ry = ranks_of(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;  // a constant series carries no order
  return sxy / std::sqrt(sxx * syy);
}

namespace {
const char* kPalette[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string shaded(const char* base_hex, double shade) {
  // Blend toward white for low shade values.
  int r = std::stoi(std::string(base_hex + 1, 2), nullptr, 16);
  int g = std::stoi(std::string(base_hex + 3, 2), nullptr, 16);
  int b = std::stoi(std::string(base_hex + 5, 2), nullptr, 16);
  const double t = 0.15 + 0.85 * std::clamp(shade, 0.0, 1.0);
  r = static_cast<int>(255 - (255 - r) * t);
  g = static_cast<int>(255 - (255 - g) * t);
  b = static_cast<int>(255 - (255 - b) * t);
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}
}  // namespace

void write_scatter_svg(const std::string& path, const std::vector<ScatterPoint>& points,
                       const std::string& title) {
  if (points.empty()) throw std::invalid_argument("write_scatter_svg: no points");
  double min_x = points[0].x, max_x = points[0].x;
  double min_y = points[0].y, max_y = points[0].y;
  for (const ScatterPoint& p : points) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double span_x = std::max(max_x - min_x, 1e-9);
  const double span_y = std::max(max_y - min_y, 1e-9);
  const double w = 640.0, h = 480.0, pad = 40.0;

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
         "viewBox=\"0 0 640 480\">\n";
  out << "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
  out << "<text x=\"20\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title
      << "</text>\n";
  for (const ScatterPoint& p : points) {
    const double px = pad + (p.x - min_x) / span_x * (w - 2 * pad);
    const double py = h - pad - (p.y - min_y) / span_y * (h - 2 * pad);
    const char* base = kPalette[static_cast<size_t>(p.group) % 8];
    if (p.emphasized) {
      out << "<circle cx=\"" << format_metric_value(px) << "\" cy=\"" << format_metric_value(py)
          << "\" r=\"8\" fill=\"none\" stroke=\"" << base << "\" stroke-width=\"3\"/>\n";
    } else {
      out << "<circle cx=\"" << format_metric_value(px) << "\" cy=\"" << format_metric_value(py)
          << "\" r=\"3\" fill=\"" << shaded(base, p.shade) << "\"/>\n";
    }
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("short write to " + path);
}

}  // namespace camp
