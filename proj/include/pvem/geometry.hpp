#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace pvem {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

constexpr double kPi = 3.14159265358979323846;

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Signed area (positive for counter-clockwise ordering).
inline double signed_area(const std::vector<Vec2>& p) {
  double a = 0.0;
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) a += cross(p[i], p[(i + 1) % n]);
  return 0.5 * a;
}

inline Vec2 centroid(const std::vector<Vec2>& p) {
  double a = 0.0;
  Vec2 c = Vec2::Zero();
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& x0 = p[i];
    const Vec2& x1 = p[(i + 1) % n];
    const double w = cross(x0, x1);
    a += w;
    c += w * (x0 + x1);
  }
  return c / (3.0 * a);
}

inline double diameter(const std::vector<Vec2>& p) {
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j) d = std::max(d, (p[i] - p[j]).norm());
  return d;
}

/// Distance from x to the segment [a,b].
inline double segment_distance(const Vec2& x, const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  const double l2 = d.squaredNorm();
  double s = l2 > 0 ? (x - a).dot(d) / l2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return (x - (a + s * d)).norm();
}

/// Parameter of x along [a,b] if x lies strictly inside the segment (within tol), else -1.
inline double interior_param(const Vec2& x, const Vec2& a, const Vec2& b, double tol) {
  const Vec2 d = b - a;
  const double len = d.norm();
  if (len == 0.0) return -1.0;
  const double s = (x - a).dot(d) / (len * len);
  if (s * len <= tol || (1.0 - s) * len <= tol) return -1.0;
  if (std::abs(cross(d, x - a)) / len > tol) return -1.0;
  return s;
}

inline bool point_in_polygon(const Vec2& x, const std::vector<Vec2>& p) {
  bool in = false;
  const std::size_t n = p.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    if (((p[i].y() > x.y()) != (p[j].y() > x.y())) &&
        (x.x() < (p[j].x() - p[i].x()) * (x.y() - p[i].y()) / (p[j].y() - p[i].y()) + p[i].x()))
      in = !in;
  }
  return in;
}

/// Clip a convex polygon by the half-plane n.x <= c (Sutherland-Hodgman step).
inline std::vector<Vec2> clip_halfplane(const std::vector<Vec2>& poly, const Vec2& n, double c) {
  std::vector<Vec2> out;
  const std::size_t m = poly.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % m];
    const double fa = n.dot(a) - c;
    const double fb = n.dot(b) - c;
    if (fa <= 0) out.push_back(a);
    if ((fa < 0 && fb > 0) || (fa > 0 && fb < 0)) out.push_back(a + (fa / (fa - fb)) * (b - a));
  }
  return out;
}

/// Kernel of a CCW polygon shrunk by `inset`: the set of centres c for which the
/// ball B(c, inset) lies in every inner half-plane of the polygon sides.
inline std::vector<Vec2> polygon_kernel(const std::vector<Vec2>& p, double inset = 0.0) {
  double xmin = p[0].x(), xmax = xmin, ymin = p[0].y(), ymax = ymin;
  for (const auto& v : p) {
    xmin = std::min(xmin, v.x());
    xmax = std::max(xmax, v.x());
    ymin = std::min(ymin, v.y());
    ymax = std::max(ymax, v.y());
  }
  std::vector<Vec2> k = {Vec2(xmin, ymin), Vec2(xmax, ymin), Vec2(xmax, ymax), Vec2(xmin, ymax)};
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n && !k.empty(); ++i) {
    const Vec2 d = p[(i + 1) % n] - p[i];
    const double len = d.norm();
    if (len == 0.0) continue;
    const Vec2 out(d.y() / len, -d.x() / len);
    k = clip_halfplane(k, out, out.dot(p[i]) - inset);
  }
  return k;
}

/// Star-shapedness with respect to a ball of radius rho*h (tolerance tol_rel*h).
inline bool star_shaped(const std::vector<Vec2>& p, double rho, double tol_rel = 1e-10) {
  const double h = diameter(p);
  const double r = std::max(0.0, rho * h - tol_rel * h);
  const auto k = polygon_kernel(p, r);
  return k.size() >= 3 || (!k.empty() && r > 0.0);
}

/// A point of the kernel of p (kernel centroid), used as fan centre.
inline bool kernel_point(const std::vector<Vec2>& p, Vec2& c) {
  const auto k = polygon_kernel(p, 0.0);
  if (k.size() < 3 || std::abs(signed_area(k)) <= 0.0) return false;
  c = centroid(k);
  return true;
}

}  // namespace pvem
