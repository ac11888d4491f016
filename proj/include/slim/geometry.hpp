#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace slim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
  double norm2() const { return x * x + y * y; }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

/// Symmetric 2x2 matrix, enough for planar covariances.
struct Mat2 {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  double det() const { return xx * yy - xy * xy; }

  Mat2 inverse() const {
    const double d = det();
    return {yy / d, -xy / d, xx / d};
  }

  /// v^T M v
  double quad(const Vec2& v) const {
    return xx * v.x * v.x + 2.0 * xy * v.x * v.y + yy * v.y * v.y;
  }

  static Mat2 isotropic(double v) { return {v, 0.0, v}; }
};

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  const double two_pi = 2.0 * M_PI;
  a = std::fmod(a, two_pi);
  if (a <= -M_PI) a += two_pi;
  if (a > M_PI) a -= two_pi;
  return a;
}

inline double angle_diff(double a, double b) { return wrap_angle(a - b); }

using Rng = std::mt19937_64;

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic sub-stream seed from a master seed and salt values.
inline uint64_t derive_seed(uint64_t master, uint64_t salt_a, uint64_t salt_b = 0) {
  return splitmix64(splitmix64(master ^ splitmix64(salt_a)) ^ splitmix64(salt_b + 0x51ed2701ULL));
}

}  // namespace slim
