#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tep {

struct FrameDims {
  int width = 0;
  int height = 0;

  std::int64_t area() const { return static_cast<std::int64_t>(width) * height; }
  friend bool operator==(const FrameDims&, const FrameDims&) = default;
};

struct Pixel {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Pixel& a, const Pixel& b) {
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Axis-aligned pixel rectangle with half-open extents [x0,x1) x [y0,y1).
/// Always non-degenerate; "no box" is std::optional<BBox>.
class BBox {
 public:
  /// Throws InvalidArgument unless x0 < x1 and y0 < y1.
  BBox(int x0, int y0, int x1, int y1);

  /// Absent when the extents are degenerate.
  static std::optional<BBox> from_extents(int x0, int y0, int x1, int y1);

  int x0() const { return x0_; }
  int y0() const { return y0_; }
  int x1() const { return x1_; }
  int y1() const { return y1_; }
  int width() const { return x1_ - x0_; }
  int height() const { return y1_ - y0_; }
  std::int64_t area() const { return static_cast<std::int64_t>(width()) * height(); }
  bool contains(Pixel p) const { return p.x >= x0_ && p.x < x1_ && p.y >= y0_ && p.y < y1_; }
  BBox translated(int dx, int dy) const { return {x0_ + dx, y0_ + dy, x1_ + dx, y1_ + dy}; }

  friend bool operator==(const BBox&, const BBox&) = default;

 private:
  int x0_, y0_, x1_, y1_;
};

std::string to_string(const BBox& b);

/// Binary mask stored as a canonical row-major run-length encoding.
///
/// runs[0] counts leading zeros (may be 0); every later run is >= 1 and runs
/// alternate zero/one. The counts sum to width*height, so the encoding of a
/// grid is unique and equality of masks is equality of runs.
class Mask {
 public:
  static Mask empty(FrameDims dims);
  /// grid is row-major, nonzero means foreground.
  static Mask from_grid(FrameDims dims, std::span<const std::uint8_t> grid);
  /// Validates canonical form; throws InvalidArgument otherwise.
  static Mask from_runs(FrameDims dims, std::vector<std::uint32_t> runs);
  static Mask from_bbox(FrameDims dims, const BBox& box);
  /// Parses "<w> <h> <c0> <c1> ...".
  static Mask parse(std::string_view text);

  FrameDims dims() const { return dims_; }
  int width() const { return dims_.width; }
  int height() const { return dims_.height; }
  const std::vector<std::uint32_t>& runs() const { return runs_; }
  bool is_empty() const { return runs_.size() == 1; }

  std::vector<std::uint8_t> to_grid() const;
  std::string to_string() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  Mask(FrameDims dims, std::vector<std::uint32_t> runs) : dims_(dims), runs_(std::move(runs)) {}

  FrameDims dims_;
  std::vector<std::uint32_t> runs_;
};

std::int64_t mask_area(const Mask& m);

/// Tightest box containing every foreground pixel; absent for empty masks.
std::optional<BBox> mask_to_bbox(const Mask& m);

std::int64_t bbox_intersection_area(const BBox& a, const BBox& b);
double bbox_iou(const BBox& a, const BBox& b);

/// Intersection and union pixel counts; the ratio is formed once, at the end.
struct OverlapCounts {
  std::int64_t intersection = 0;
  std::int64_t union_ = 0;
};
OverlapCounts mask_overlap(const Mask& a, const Mask& b);

/// Both-empty masks score 1.0. Throws DimensionMismatch.
double mask_iou(const Mask& a, const Mask& b);

/// Foreground pixels with a 4-neighbour that is background or off-image,
/// in row-major order.
std::vector<Pixel> boundary_pixels(const Mask& m);

/// b grown by pad on every side and clamped to the frame.
BBox crop(FrameDims frame, const BBox& b, int pad);

/// Shifts foreground by (dx, dy); pixels leaving the frame are dropped.
Mask translate(const Mask& m, int dx, int dy);

/// Nearest-neighbour rescale of the foreground about its bbox centre.
/// Shrinks only: factor <= 0 yields an empty mask, factor >= 1 the input.
Mask scale_about_center(const Mask& m, double factor);

}  // namespace tep
