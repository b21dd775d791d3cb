#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace geolab {

/// Axis-aligned box in image coordinates (x grows right, y grows down).
struct BBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }

  BBox translated(double dx, double dy) const { return {x1 + dx, y1 + dy, x2 + dx, y2 + dy}; }
  BBox scaled(double s) const { return {x1 * s, y1 * s, x2 * s, y2 * s}; }
  bool contains(const BBox& o) const { return o.x1 >= x1 && o.y1 >= y1 && o.x2 <= x2 && o.y2 <= y2; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Throws InvalidInputError unless x1 < x2, y1 < y2 and all coordinates are
/// finite and non-negative.
void validate(const BBox& b);
bool is_valid(const BBox& b) noexcept;

/// Smallest box containing both.
BBox hull(const BBox& a, const BBox& b);

/// Compass sectors are numbered clockwise from Right in image coordinates, so
/// sector k is centred on k * 45 degrees of atan2(dy, dx).
enum class Direction : std::uint8_t {
  Right = 0,
  BottomRight,
  Bottom,
  BottomLeft,
  Left,
  TopLeft,
  Top,
  TopRight,
  Overlap,
};

inline constexpr std::size_t kNumDirections = 9;
inline constexpr std::size_t kNumCompass = 8;

enum class CollinearClass : std::uint8_t {
  Horizontal = 0,
  Vertical,
  ForwardSlash,
  Backslash,
  None,
};

inline constexpr std::size_t kNumCollinearClasses = 5;

std::string_view to_string(Direction d);
std::string_view to_string(CollinearClass c);

/// Opposite compass direction; Overlap maps to itself.
Direction antiphase(Direction d);

/// True when the rectangles share a region of positive area. Touching edges
/// or corners do not count.
bool overlaps(const BBox& a, const BBox& b);

/// Direction of b as seen from a: Overlap for positive-area intersection,
/// otherwise the 45-degree sector (lower bound inclusive) containing the
/// angle of the vector from a's centre to b's centre.
Direction direction(const BBox& a, const BBox& b);

/// Euclidean distance between the closest points of the two rectangles.
double min_distance(const BBox& a, const BBox& b);

/// Nearest segment index per compass direction (indexed by Direction value).
using NearestMap = std::array<std::optional<std::size_t>, kNumCompass>;

/// For every compass direction d, the index j minimising min_distance among
/// segments with direction(anchor, j) == d; ties go to the smaller index.
NearestMap nearest_in_direction(std::size_t anchor, std::span<const BBox> segments);

/// Collinearity class of an unordered triple. Any overlapping pair yields
/// None; otherwise all three pairwise directions must fall in one antiphase
/// pair (Right/Left, Top/Bottom, TopRight/BottomLeft, TopLeft/BottomRight).
CollinearClass collinearity(const BBox& a, const BBox& b, const BBox& c);

}  // namespace geolab
