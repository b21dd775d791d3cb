#pragma once

// Independent reference implementations used by the tests. None of these
// call into the library's geometry code.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "geolab/geometry.hpp"
#include "geolab/rng.hpp"

namespace oracle {

struct Pt {
  double x, y;
};

inline bool positive_area_overlap(const geolab::BBox& a, const geolab::BBox& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  return w > 0 && h > 0 && w * h > 0;
}

/// Sector by nearest sector-centre unit vector: sector k is centred on
/// k * 45 degrees, measured clockwise in image coordinates (y down).
inline int sector_of(double dx, double dy) {
  int best = 0;
  double best_dot = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < 8; ++k) {
    const double ang = k * M_PI / 4.0;
    const double d = dx * std::cos(ang) + dy * std::sin(ang);
    if (d > best_dot) {
      best_dot = d;
      best = k;
    }
  }
  return best;
}

/// 0..7 compass sector, 8 for positive-area overlap.
inline int direction(const geolab::BBox& a, const geolab::BBox& b) {
  if (positive_area_overlap(a, b)) return 8;
  return sector_of(b.cx() - a.cx(), b.cy() - a.cy());
}

inline std::array<std::array<Pt, 2>, 4> edges(const geolab::BBox& b) {
  return {{{{{b.x1, b.y1}, {b.x2, b.y1}}},
           {{{b.x2, b.y1}, {b.x2, b.y2}}},
           {{{b.x2, b.y2}, {b.x1, b.y2}}},
           {{{b.x1, b.y2}, {b.x1, b.y1}}}}};
}

inline double point_segment(Pt p, Pt a, Pt b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy));
}

/// Minimum distance by sampling each edge of `a` densely against every edge
/// of `b`, then refining around the best sample.
inline double min_distance(const geolab::BBox& a, const geolab::BBox& b, int samples = 400) {
  if (positive_area_overlap(a, b)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& ea : edges(a))
    for (const auto& eb : edges(b)) {
      auto at = [&](double t) {
        const Pt p{ea[0].x + t * (ea[1].x - ea[0].x), ea[0].y + t * (ea[1].y - ea[0].y)};
        return point_segment(p, eb[0], eb[1]);
      };
      int arg = 0;
      double local = std::numeric_limits<double>::infinity();
      for (int s = 0; s <= samples; ++s) {
        const double v = at(static_cast<double>(s) / samples);
        if (v < local) {
          local = v;
          arg = s;
        }
      }
      double lo = std::max(0.0, (arg - 1.0) / samples), hi = std::min(1.0, (arg + 1.0) / samples);
      for (int it = 0; it < 60; ++it) {
        const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
        if (at(m1) < at(m2)) hi = m2;
        else lo = m1;
      }
      best = std::min({best, local, at(0.5 * (lo + hi))});
    }
  return best;
}

/// 0 horizontal, 1 vertical, 2 forward slash, 3 backslash, 4 none: every
/// pairwise direction must lie on one antiphase axis.
inline int collinearity(const geolab::BBox& a, const geolab::BBox& b, const geolab::BBox& c) {
  const std::array<int, 3> d{oracle::direction(a, b), oracle::direction(a, c), oracle::direction(b, c)};
  if (std::any_of(d.begin(), d.end(), [](int x) { return x == 8; })) return 4;
  // Axis of a sector: Right/Left -> 0, Bottom/Top -> 1, TopRight/BottomLeft
  // -> 2 (rises to the right on screen), BottomRight/TopLeft -> 3.
  auto axis = [](int s) {
    switch (s % 4) {
      case 0: return 0;
      case 2: return 1;
      case 3: return 2;
      default: return 3;
    }
  };
  const int ax = axis(d[0]);
  return axis(d[1]) == ax && axis(d[2]) == ax ? ax : 4;
}

inline geolab::BBox random_box(geolab::Rng& rng, double extent = 1000.0, double max_side = 120.0) {
  const double x = std::floor(rng.uniform(0.0, extent - max_side));
  const double y = std::floor(rng.uniform(0.0, extent - max_side));
  const double w = 1 + std::floor(rng.uniform(0.0, max_side - 1));
  const double h = 1 + std::floor(rng.uniform(0.0, max_side - 1));
  return {x, y, x + w, y + h};
}

/// Triplets biased towards alignment: half are placed along a random axis
/// with small perpendicular offsets.
inline std::array<geolab::BBox, 3> random_triplet(geolab::Rng& rng) {
  if (rng.bernoulli(0.5)) return {random_box(rng), random_box(rng), random_box(rng)};
  static const double dirs[4][2] = {{1, 0}, {0, 1}, {1, -1}, {1, 1}};
  const auto& d = dirs[rng.index(4)];
  std::array<geolab::BBox, 3> t;
  const double x0 = 100 + std::floor(rng.uniform(0, 200)), y0 = 300 + std::floor(rng.uniform(0, 200));
  double along = 0;
  for (auto& b : t) {
    const double w = 5 + std::floor(rng.uniform(0, 30)), h = 5 + std::floor(rng.uniform(0, 30));
    const double cx = x0 + along * d[0] + std::floor(rng.uniform(-4, 4));
    const double cy = y0 + along * d[1] + std::floor(rng.uniform(-4, 4));
    b = {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
    along += 60 + std::floor(rng.uniform(0, 80));
  }
  for (std::size_t i = t.size(); i > 1; --i) std::swap(t[i - 1], t[rng.index(i)]);
  return t;
}

}  // namespace oracle
