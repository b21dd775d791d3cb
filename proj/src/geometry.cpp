#include "geolab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "geolab/errors.hpp"

namespace geolab {

bool is_valid(const BBox& b) noexcept {
  const bool finite = std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) && std::isfinite(b.y2);
  return finite && b.x1 >= 0 && b.y1 >= 0 && b.x1 < b.x2 && b.y1 < b.y2;
}

void validate(const BBox& b) {
  if (!is_valid(b)) {
    std::ostringstream os;
    os << "invalid box (" << b.x1 << ", " << b.y1 << ", " << b.x2 << ", " << b.y2
       << "): need finite non-negative coordinates with x1 < x2 and y1 < y2";
    throw InvalidInputError(os.str());
  }
}

BBox hull(const BBox& a, const BBox& b) {
  return {std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2), std::max(a.y2, b.y2)};
}

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::Right: return "Right";
    case Direction::BottomRight: return "BottomRight";
    case Direction::Bottom: return "Bottom";
    case Direction::BottomLeft: return "BottomLeft";
    case Direction::Left: return "Left";
    case Direction::TopLeft: return "TopLeft";
    case Direction::Top: return "Top";
    case Direction::TopRight: return "TopRight";
    case Direction::Overlap: return "Overlap";
  }
  return "?";
}

std::string_view to_string(CollinearClass c) {
  switch (c) {
    case CollinearClass::Horizontal: return "Horizontal";
    case CollinearClass::Vertical: return "Vertical";
    case CollinearClass::ForwardSlash: return "ForwardSlash";
    case CollinearClass::Backslash: return "Backslash";
    case CollinearClass::None: return "None";
  }
  return "?";
}

Direction antiphase(Direction d) {
  if (d == Direction::Overlap) return d;
  return static_cast<Direction>((static_cast<int>(d) + 4) % 8);
}

bool overlaps(const BBox& a, const BBox& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  return w > 0 && h > 0;
}

Direction direction(const BBox& a, const BBox& b) {
  validate(a);
  validate(b);
  if (overlaps(a, b)) return Direction::Overlap;
  const double dx = b.cx() - a.cx();
  const double dy = b.cy() - a.cy();
  // Non-overlapping boxes of positive area never share a centre.
  double deg = std::atan2(dy, dx) * 180.0 / std::numbers::pi + 22.5;
  if (deg < 0) deg += 360.0;
  int sector = static_cast<int>(std::floor(deg / 45.0)) % 8;
  return static_cast<Direction>(sector);
}

double min_distance(const BBox& a, const BBox& b) {
  validate(a);
  validate(b);
  const double gx = std::max({0.0, a.x1 - b.x2, b.x1 - a.x2});
  const double gy = std::max({0.0, a.y1 - b.y2, b.y1 - a.y2});
  return std::hypot(gx, gy);
}

NearestMap nearest_in_direction(std::size_t anchor, std::span<const BBox> segments) {
  if (anchor >= segments.size()) throw InvalidInputError("anchor index out of range");
  NearestMap best;
  std::array<double, kNumCompass> best_dist{};
  const BBox& a = segments[anchor];
  for (std::size_t j = 0; j < segments.size(); ++j) {
    if (j == anchor) continue;
    const Direction d = direction(a, segments[j]);
    if (d == Direction::Overlap) continue;
    const auto k = static_cast<std::size_t>(d);
    const double dist = min_distance(a, segments[j]);
    // Strict comparison keeps the earliest index on ties.
    if (!best[k] || dist < best_dist[k]) {
      best[k] = j;
      best_dist[k] = dist;
    }
  }
  return best;
}

namespace {

CollinearClass axis_class(Direction d) {
  switch (d) {
    case Direction::Right:
    case Direction::Left: return CollinearClass::Horizontal;
    case Direction::Top:
    case Direction::Bottom: return CollinearClass::Vertical;
    case Direction::TopRight:
    case Direction::BottomLeft: return CollinearClass::ForwardSlash;
    case Direction::TopLeft:
    case Direction::BottomRight: return CollinearClass::Backslash;
    case Direction::Overlap: break;
  }
  return CollinearClass::None;
}

}  // namespace

CollinearClass collinearity(const BBox& a, const BBox& b, const BBox& c) {
  const Direction ab = direction(a, b);
  const Direction bc = direction(b, c);
  const Direction ac = direction(a, c);
  if (ab == Direction::Overlap || bc == Direction::Overlap || ac == Direction::Overlap) return CollinearClass::None;
  const CollinearClass cls = axis_class(ab);
  if (axis_class(bc) == cls && axis_class(ac) == cls) return cls;
  return CollinearClass::None;
}

}  // namespace geolab
