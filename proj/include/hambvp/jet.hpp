#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <span>

#include "hambvp/errors.hpp"

namespace hambvp {

/// Maximum number of seed directions a jet can carry. Problems here have at
/// most 2n = 4 state directions plus a few parameter directions.
inline constexpr int kMaxSeeds = 8;

/// Second-order truncated Taylor scalar: value, gradient and Hessian with
/// respect to a fixed set of seed directions. The Hessian is stored packed
/// (lower triangle), so symmetry holds by construction.
///
/// Arithmetic follows the truncated-Taylor algebra, e.g. for a product
/// (a*b).grad == a.value*b.grad + b.value*a.grad.
class Jet2 {
 public:
  Jet2() : v_(0.0), s_(0) {}

  /// Constant with respect to all `s` seeds.
  Jet2(double value, int seeds) : v_(value), s_(seeds) {
    assert(seeds >= 0 && seeds <= kMaxSeeds);
    g_.fill(0.0);
    h_.fill(0.0);
  }

  /// Independent variable: unit derivative along seed direction `dir`.
  static Jet2 variable(double value, int seeds, int dir) {
    Jet2 j(value, seeds);
    assert(dir >= 0 && dir < seeds);
    j.g_[static_cast<size_t>(dir)] = 1.0;
    return j;
  }

  double value() const { return v_; }
  int seeds() const { return s_; }
  double grad(int i) const { return g_[static_cast<size_t>(i)]; }
  double hess(int i, int j) const { return h_[pack(i, j)]; }

  void set_value(double v) { v_ = v; }
  void set_grad(int i, double x) { g_[static_cast<size_t>(i)] = x; }
  void set_hess(int i, int j, double x) { h_[pack(i, j)] = x; }

  Jet2 operator-() const {
    Jet2 r(*this);
    r.v_ = -r.v_;
    for (int i = 0; i < s_; ++i) r.g_[i] = -r.g_[i];
    for (int k = 0; k < npack(); ++k) r.h_[k] = -r.h_[k];
    return r;
  }

  Jet2& operator+=(const Jet2& o) {
    assert(s_ == o.s_);
    v_ += o.v_;
    for (int i = 0; i < s_; ++i) g_[i] += o.g_[i];
    for (int k = 0; k < npack(); ++k) h_[k] += o.h_[k];
    return *this;
  }
  Jet2& operator-=(const Jet2& o) {
    assert(s_ == o.s_);
    v_ -= o.v_;
    for (int i = 0; i < s_; ++i) g_[i] -= o.g_[i];
    for (int k = 0; k < npack(); ++k) h_[k] -= o.h_[k];
    return *this;
  }
  Jet2& operator+=(double c) {
    v_ += c;
    return *this;
  }
  Jet2& operator-=(double c) {
    v_ -= c;
    return *this;
  }
  Jet2& operator*=(double c) {
    v_ *= c;
    for (int i = 0; i < s_; ++i) g_[i] *= c;
    for (int k = 0; k < npack(); ++k) h_[k] *= c;
    return *this;
  }
  Jet2& operator/=(double c) { return (*this) *= (1.0 / c); }

  friend Jet2 operator+(Jet2 a, const Jet2& b) { return a += b; }
  friend Jet2 operator-(Jet2 a, const Jet2& b) { return a -= b; }
  friend Jet2 operator+(Jet2 a, double c) { return a += c; }
  friend Jet2 operator+(double c, Jet2 a) { return a += c; }
  friend Jet2 operator-(Jet2 a, double c) { return a -= c; }
  friend Jet2 operator-(double c, const Jet2& a) { return (-a) += c; }
  friend Jet2 operator*(Jet2 a, double c) { return a *= c; }
  friend Jet2 operator*(double c, Jet2 a) { return a *= c; }
  friend Jet2 operator/(Jet2 a, double c) { return a /= c; }

  friend Jet2 operator*(const Jet2& a, const Jet2& b) {
    assert(a.s_ == b.s_);
    Jet2 r(a.v_ * b.v_, a.s_);
    for (int i = 0; i < a.s_; ++i) r.g_[i] = a.v_ * b.g_[i] + b.v_ * a.g_[i];
    int k = 0;
    for (int i = 0; i < a.s_; ++i) {
      for (int j = 0; j <= i; ++j, ++k) {
        r.h_[k] = a.v_ * b.h_[k] + b.v_ * a.h_[k] + a.g_[i] * b.g_[j] +
                  a.g_[j] * b.g_[i];
      }
    }
    return r;
  }

  /// Reciprocal 1/x. Throws ArithmeticDomainError when value() == 0.
  friend Jet2 recip(const Jet2& a) {
    if (a.v_ == 0.0)
      throw ArithmeticDomainError("jet division by zero-valued jet");
    const double w = 1.0 / a.v_;
    return a.chain(w, -w * w, 2.0 * w * w * w);
  }

  friend Jet2 operator/(const Jet2& a, const Jet2& b) { return a * recip(b); }
  friend Jet2 operator/(double c, const Jet2& b) { return recip(b) * c; }

  friend Jet2 exp(const Jet2& a) {
    const double e = std::exp(a.v_);
    return a.chain(e, e, e);
  }
  friend Jet2 sin(const Jet2& a) {
    const double s = std::sin(a.v_), c = std::cos(a.v_);
    return a.chain(s, c, -s);
  }
  friend Jet2 cos(const Jet2& a) {
    const double s = std::sin(a.v_), c = std::cos(a.v_);
    return a.chain(c, -s, -c);
  }
  friend Jet2 sqrt(const Jet2& a) {
    if (a.v_ <= 0.0)
      throw ArithmeticDomainError("jet sqrt of non-positive value");
    const double r = std::sqrt(a.v_);
    return a.chain(r, 0.5 / r, -0.25 / (r * a.v_));
  }

 private:
  /// f(value), f'(value), f''(value) -> composed jet by the chain rule.
  Jet2 chain(double f, double fp, double fpp) const {
    Jet2 r(f, s_);
    for (int i = 0; i < s_; ++i) r.g_[i] = fp * g_[i];
    int k = 0;
    for (int i = 0; i < s_; ++i)
      for (int j = 0; j <= i; ++j, ++k)
        r.h_[k] = fp * h_[k] + fpp * g_[i] * g_[j];
    return r;
  }

  int npack() const { return s_ * (s_ + 1) / 2; }
  static size_t pack(int i, int j) {
    if (i < j) std::swap(i, j);
    return static_cast<size_t>(i * (i + 1) / 2 + j);
  }

  double v_;
  int s_;
  std::array<double, kMaxSeeds> g_;
  std::array<double, kMaxSeeds*(kMaxSeeds + 1) / 2> h_;
};

/// Integer power by repeated multiplication; valid for any scalar type used
/// in this library (double, Jet2, Dual<...>).
template <class S>
S powi(const S& x, int k) {
  assert(k >= 0);
  if (k == 0) return S(x) * 0.0 + 1.0;
  S r = x;
  for (int i = 1; i < k; ++i) r = r * x;
  return r;
}
inline double powi(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

/// Extracts the underlying double of a scalar (identity for double).
inline double primal(double x) { return x; }
inline double primal(const Jet2& x) { return x.value(); }

/// First-order forward directions layered on top of a base scalar. Used to
/// obtain gradients of the Hamiltonian with respect to phase-space
/// coordinates while the base scalar (double or Jet2) carries seed
/// derivatives of its own.
template <class B>
struct Dual {
  static constexpr int kMaxDirs = 4;

  B re{};
  int m = 0;
  std::array<B, kMaxDirs> du{};

  Dual() = default;
  Dual(const B& value, int dirs) : re(value), m(dirs) {
    for (int i = 0; i < m; ++i) du[i] = value * 0.0;
  }
  static Dual variable(const B& value, int dirs, int dir) {
    Dual d(value, dirs);
    d.du[static_cast<size_t>(dir)] = value * 0.0 + 1.0;
    return d;
  }

  Dual operator-() const {
    Dual r = *this;
    r.re = -r.re;
    for (int i = 0; i < m; ++i) r.du[i] = -r.du[i];
    return r;
  }

  friend Dual operator+(const Dual& a, const Dual& b) {
    assert(a.m == b.m);
    Dual r = a;
    r.re = a.re + b.re;
    for (int i = 0; i < a.m; ++i) r.du[i] = a.du[i] + b.du[i];
    return r;
  }
  friend Dual operator-(const Dual& a, const Dual& b) {
    assert(a.m == b.m);
    Dual r = a;
    r.re = a.re - b.re;
    for (int i = 0; i < a.m; ++i) r.du[i] = a.du[i] - b.du[i];
    return r;
  }
  friend Dual operator*(const Dual& a, const Dual& b) {
    assert(a.m == b.m);
    Dual r = a;
    r.re = a.re * b.re;
    for (int i = 0; i < a.m; ++i) r.du[i] = a.re * b.du[i] + b.re * a.du[i];
    return r;
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    Dual r = a;
    r.re = a.re / b.re;
    for (int i = 0; i < a.m; ++i)
      r.du[i] = (a.du[i] - r.re * b.du[i]) / b.re;
    return r;
  }

  friend Dual operator+(Dual a, double c) {
    a.re = a.re + c;
    return a;
  }
  friend Dual operator+(double c, Dual a) { return a + c; }
  friend Dual operator-(Dual a, double c) {
    a.re = a.re - c;
    return a;
  }
  friend Dual operator-(double c, const Dual& a) { return (-a) + c; }
  friend Dual operator*(Dual a, double c) {
    a.re = a.re * c;
    for (int i = 0; i < a.m; ++i) a.du[i] = a.du[i] * c;
    return a;
  }
  friend Dual operator*(double c, Dual a) { return a * c; }
  friend Dual operator/(Dual a, double c) { return a * (1.0 / c); }
  friend Dual operator/(double c, const Dual& b) {
    Dual r = b;
    r.re = c / b.re;
    for (int i = 0; i < b.m; ++i)
      r.du[i] = -(r.re / b.re) * b.du[i];
    return r;
  }

  friend Dual exp(const Dual& a) {
    using std::exp;
    Dual r = a;
    r.re = exp(a.re);
    for (int i = 0; i < a.m; ++i) r.du[i] = r.re * a.du[i];
    return r;
  }
  friend Dual sin(const Dual& a) {
    using std::cos;
    using std::sin;
    Dual r = a;
    r.re = sin(a.re);
    B c = cos(a.re);
    for (int i = 0; i < a.m; ++i) r.du[i] = c * a.du[i];
    return r;
  }
  friend Dual cos(const Dual& a) {
    using std::cos;
    using std::sin;
    Dual r = a;
    r.re = cos(a.re);
    B s = sin(a.re);
    for (int i = 0; i < a.m; ++i) r.du[i] = -(s * a.du[i]);
    return r;
  }
};

}  // namespace hambvp
