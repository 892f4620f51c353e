#pragma once

#include "pvem/geometry.hpp"

#include <functional>
#include <string>

namespace pvem {

using ScalarField = std::function<double(const Vec2&)>;
using SpaceTimeField = std::function<double(const Vec2&, double)>;
using GradField = std::function<Vec2(const Vec2&, double)>;

/// Data of u_t - div(D grad u) + r u = f on the unit square.
struct ProblemData {
  std::string name = "custom";
  std::function<Mat2(const Vec2&)> D = [](const Vec2&) { return Mat2::Identity(); };
  std::function<Vec2(const Vec2&)> divD;  // divergence of the rows of D; empty means zero
  ScalarField r = [](const Vec2&) { return 0.0; };
  SpaceTimeField f = [](const Vec2&, double) { return 0.0; };
  ScalarField u0 = [](const Vec2&) { return 0.0; };
  SpaceTimeField u;  // exact solution, if known
  GradField grad_u;
  bool nonzero_boundary = false;  // Dirichlet data taken from u when true
  double T = 1.0;
  double a_lo = 1.0, a_hi = 1.0;  // bounds on the spectrum of D
  double r_lo = 0.0, r_hi = 0.0;  // bounds on r

  bool has_exact() const { return bool(u) && bool(grad_u); }
  double boundary_value(const Vec2& x, double t) const { return nonzero_boundary ? u(x, t) : 0.0; }

  /// Poincare-Friedrichs constant on the unit square.
  double C_pf() const { return 1.0 / std::sqrt(2.0 * kPi * kPi * a_lo); }
  double C_equiv() const {
    return std::max(std::sqrt(a_hi + r_hi / (2.0 * kPi * kPi)), 1.0 / std::sqrt(a_lo));
  }
};

inline void set_isotropic(ProblemData& p, double alpha) {
  p.D = [alpha](const Vec2&) { return Mat2(alpha * Mat2::Identity()); };
  p.a_lo = p.a_hi = alpha;
}

/// sin(5 pi t) sin(pi x) sin(pi y), D = alpha I.
inline ProblemData oscillating_problem(double alpha = 1.0, double T = 1.0) {
  ProblemData p;
  p.name = "vem_oscillating";
  set_isotropic(p, alpha);
  p.T = T;
  p.u = [](const Vec2& x, double t) {
    return std::sin(5 * kPi * t) * std::sin(kPi * x.x()) * std::sin(kPi * x.y());
  };
  p.grad_u = [](const Vec2& x, double t) {
    const double a = std::sin(5 * kPi * t) * kPi;
    return Vec2(a * std::cos(kPi * x.x()) * std::sin(kPi * x.y()), a * std::sin(kPi * x.x()) * std::cos(kPi * x.y()));
  };
  p.f = [alpha](const Vec2& x, double t) {
    const double s = std::sin(kPi * x.x()) * std::sin(kPi * x.y());
    return (5 * kPi * std::cos(5 * kPi * t) + 2 * kPi * kPi * alpha * std::sin(5 * kPi * t)) * s;
  };
  p.u0 = [u = p.u](const Vec2& x) { return u(x, 0.0); };
  return p;
}

/// (1 + exp(10(x + y - t)))^{-1}.
inline ProblemData layer_problem(double alpha = 1.0, double T = 2.0) {
  ProblemData p;
  p.name = "vem_layer";
  set_isotropic(p, alpha);
  p.T = T;
  p.nonzero_boundary = true;
  auto val = [](const Vec2& x, double t) { return 1.0 / (1.0 + std::exp(10.0 * (x.x() + x.y() - t))); };
  p.u = val;
  p.grad_u = [val](const Vec2& x, double t) {
    const double u = val(x, t);
    const double g = -10.0 * u * (1.0 - u);
    return Vec2(g, g);
  };
  p.f = [val, alpha](const Vec2& x, double t) {
    const double u = val(x, t);
    const double ut = 10.0 * u * (1.0 - u);
    const double lap = 200.0 * u * (1.0 - u) * (1.0 - 2.0 * u);
    return ut - alpha * lap;
  };
  p.u0 = [val](const Vec2& x) { return val(x, 0.0); };
  return p;
}

/// Lump of mass circulating the domain.
inline ProblemData circulating_problem(double alpha = 1.0, double T = 10.0) {
  ProblemData p;
  p.name = "vem_circulating";
  set_isotropic(p, alpha);
  p.T = T;
  struct Parts {
    double c, P, Px, Py, lapP, s, s1, s2, a, ax, ay, at;
  };
  auto parts = [](const Vec2& x, double t) {
    Parts q;
    q.c = 10.0 - t;
    const double X = 2 * x.x() - 0.5 * std::sin(kPi * t / 2) - 1.0;
    const double Y = 2 * x.y() - 0.5 * std::cos(kPi * t / 2) - 1.0;
    const double Xt = -0.25 * kPi * std::cos(kPi * t / 2);
    const double Yt = 0.25 * kPi * std::sin(kPi * t / 2);
    const double px = x.x() * x.x() - x.x(), py = x.y() * x.y() - x.y();
    q.P = px * py;
    q.Px = (2 * x.x() - 1) * py;
    q.Py = px * (2 * x.y() - 1);
    q.lapP = 2 * py + 2 * px;
    const double rr = X * X + Y * Y - 3.0 / 200.0;
    q.a = 25.0 * q.c * rr;
    q.ax = 100.0 * q.c * X;
    q.ay = 100.0 * q.c * Y;
    q.at = -25.0 * rr + 25.0 * q.c * (2 * X * Xt + 2 * Y * Yt);
    // logistic sigma(a) = 1 - 1/(1+e^a), evaluated stably
    q.s = q.a >= 0 ? 1.0 / (1.0 + std::exp(-q.a)) : std::exp(q.a) / (1.0 + std::exp(q.a));
    q.s1 = q.s * (1 - q.s);
    q.s2 = q.s1 * (1 - 2 * q.s);
    return q;
  };
  p.u = [parts](const Vec2& x, double t) {
    const Parts q = parts(x, t);
    return q.c * q.P * q.s;
  };
  p.grad_u = [parts](const Vec2& x, double t) {
    const Parts q = parts(x, t);
    return Vec2(q.c * (q.s * q.Px + q.P * q.s1 * q.ax), q.c * (q.s * q.Py + q.P * q.s1 * q.ay));
  };
  p.f = [parts, alpha](const Vec2& x, double t) {
    const Parts q = parts(x, t);
    const double ut = -q.P * q.s + q.c * q.P * q.s1 * q.at;
    const double lapa = 400.0 * q.c;
    const double lap = q.c * (q.s * q.lapP + 2 * q.s1 * (q.Px * q.ax + q.Py * q.ay) +
                              q.P * (q.s2 * (q.ax * q.ax + q.ay * q.ay) + q.s1 * lapa));
    return ut - alpha * lap;
  };
  p.u0 = [u = p.u](const Vec2& x) { return u(x, 0.0); };
  return p;
}

/// g(t) s(-m(t)(r^2 - r0^2)) with r measured from the origin.
inline ProblemData hat_problem(double alpha = 0.01, double T = 5.0) {
  ProblemData p;
  p.name = "fem_hat";
  set_isotropic(p, alpha);
  p.T = T;
  p.nonzero_boundary = true;
  constexpr double r0 = 0.15;
  auto m = [](double t) { return 100.0 / (3.0 * t + 2.0); };
  auto g = [](double t) { return 10.0 / (t * t + 20.0); };
  p.u = [m, g](const Vec2& x, double t) {
    return g(t) * (1.0 + std::tanh(-m(t) * (x.squaredNorm() - r0 * r0)));
  };
  p.grad_u = [m, g](const Vec2& x, double t) {
    const double th = std::tanh(-m(t) * (x.squaredNorm() - r0 * r0));
    return Vec2(g(t) * (1 - th * th) * (-2.0 * m(t)) * x);
  };
  p.f = [m, g, alpha](const Vec2& x, double t) {
    const double r2 = x.squaredNorm();
    const double mt = m(t), gt = g(t);
    const double th = std::tanh(-mt * (r2 - r0 * r0));
    const double s1 = 1 - th * th, s2 = -2 * th * s1;
    const double dm = -300.0 / ((3 * t + 2) * (3 * t + 2));
    const double dg = -20.0 * t / ((t * t + 20) * (t * t + 20));
    const double ut = dg * (1 + th) + gt * s1 * (-dm * (r2 - r0 * r0));
    const double lap = gt * (s2 * 4.0 * mt * mt * r2 - 4.0 * mt * s1);
    return ut - alpha * lap;
  };
  p.u0 = [u = p.u](const Vec2& x) { return u(x, 0.0); };
  return p;
}

}  // namespace pvem
