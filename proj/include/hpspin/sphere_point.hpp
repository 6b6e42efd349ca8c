#ifndef HPSPIN_SPHERE_POINT_HPP
#define HPSPIN_SPHERE_POINT_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "hpspin/rng.hpp"

namespace hpspin {

/// A point on the sphere sum sigma_i^2 = n, stored as plain coordinates.
using SphereConfig = std::vector<double>;

inline double squared_norm(const SphereConfig& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

/// |sum sigma^2 - n| / n.
inline double radius_error(const SphereConfig& x) {
  const double n = static_cast<double>(x.size());
  return std::abs(squared_norm(x) - n) / n;
}

/// Radial projection back onto sum sigma^2 = n.
inline void project_to_sphere(SphereConfig& x) {
  const double s = squared_norm(x);
  if (!(s > 0.0)) throw std::domain_error("project_to_sphere: zero vector");
  const double scale = std::sqrt(static_cast<double>(x.size()) / s);
  for (double& v : x) v *= scale;
}

inline void uniform_sphere_into(SphereConfig& x, Stream& stream) {
  for (double& v : x) v = stream.normal();
  project_to_sphere(x);
}

/// n i.i.d. standard normals rescaled to radius sqrt(n).
inline SphereConfig uniform_sphere(std::size_t n, Stream& stream) {
  if (n == 0) throw std::invalid_argument("uniform_sphere: n must be >= 1");
  SphereConfig x(n);
  uniform_sphere_into(x, stream);
  return x;
}

/// R = (1/n) sum_i a_i b_i.
inline double overlap(const SphereConfig& a, const SphereConfig& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s / static_cast<double>(a.size());
}

}  // namespace hpspin

#endif
