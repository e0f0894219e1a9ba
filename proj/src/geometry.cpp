#include "tep/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "tep/errors.hpp"

namespace tep {
namespace {

void check_dims(FrameDims dims) {
  if (dims.width < 1 || dims.height < 1) {
    throw Error(ErrorKind::InvalidArgument, "mask dimensions must be >= 1, got " +
                                                std::to_string(dims.width) + "x" +
                                                std::to_string(dims.height));
  }
}

void require_same_dims(const Mask& a, const Mask& b) {
  if (a.dims() != b.dims()) {
    throw Error(ErrorKind::DimensionMismatch,
                std::to_string(a.width()) + "x" + std::to_string(a.height()) + " vs " +
                    std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
}

// Calls fn(start, length) for every foreground run, in raster order.
template <typename Fn>
void for_each_fg_run(const Mask& m, Fn&& fn) {
  std::int64_t pos = 0;
  const auto& runs = m.runs();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (i % 2 == 1) fn(pos, static_cast<std::int64_t>(runs[i]));
    pos += runs[i];
  }
}

}  // namespace

BBox::BBox(int x0, int y0, int x1, int y1) : x0_(x0), y0_(y0), x1_(x1), y1_(y1) {
  if (x0 >= x1 || y0 >= y1) {
    throw Error(ErrorKind::InvalidArgument, "degenerate bbox " + tep::to_string(*this));
  }
}

std::optional<BBox> BBox::from_extents(int x0, int y0, int x1, int y1) {
  if (x0 >= x1 || y0 >= y1) return std::nullopt;
  return BBox(x0, y0, x1, y1);
}

std::string to_string(const BBox& b) {
  return "[" + std::to_string(b.x0()) + "," + std::to_string(b.y0()) + "," +
         std::to_string(b.x1()) + "," + std::to_string(b.y1()) + "]";
}

Mask Mask::empty(FrameDims dims) {
  check_dims(dims);
  return Mask(dims, {static_cast<std::uint32_t>(dims.area())});
}

Mask Mask::from_grid(FrameDims dims, std::span<const std::uint8_t> grid) {
  check_dims(dims);
  if (static_cast<std::int64_t>(grid.size()) != dims.area()) {
    throw Error(ErrorKind::DimensionMismatch, "grid has " + std::to_string(grid.size()) +
                                                  " pixels, expected " +
                                                  std::to_string(dims.area()));
  }
  std::vector<std::uint32_t> runs;
  bool current = false;
  std::uint32_t count = 0;
  for (std::uint8_t v : grid) {
    const bool fg = v != 0;
    if (fg != current) {
      runs.push_back(count);
      current = fg;
      count = 0;
    }
    ++count;
  }
  runs.push_back(count);
  return Mask(dims, std::move(runs));
}

Mask Mask::from_runs(FrameDims dims, std::vector<std::uint32_t> runs) {
  check_dims(dims);
  if (runs.empty()) throw Error(ErrorKind::InvalidArgument, "RLE has no counts");
  std::int64_t total = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (i > 0 && runs[i] == 0) {
      throw Error(ErrorKind::InvalidArgument,
                  "RLE count " + std::to_string(i) + " is zero (not canonical)");
    }
    total += runs[i];
  }
  if (total != dims.area()) {
    throw Error(ErrorKind::InvalidArgument, "RLE counts sum to " + std::to_string(total) +
                                                ", expected " + std::to_string(dims.area()));
  }
  return Mask(dims, std::move(runs));
}

Mask Mask::from_bbox(FrameDims dims, const BBox& box) {
  check_dims(dims);
  std::vector<std::uint8_t> grid(static_cast<std::size_t>(dims.area()), 0);
  for (int y = std::max(0, box.y0()); y < std::min(dims.height, box.y1()); ++y) {
    for (int x = std::max(0, box.x0()); x < std::min(dims.width, box.x1()); ++x) {
      grid[static_cast<std::size_t>(y) * dims.width + x] = 1;
    }
  }
  return from_grid(dims, grid);
}

Mask Mask::parse(std::string_view text) {
  std::vector<std::int64_t> values;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\n' || text[i] == '\r' ||
                               text[i] == '\t')) {
      ++i;
    }
    if (i >= text.size()) break;
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data() + i, text.data() + text.size(), v);
    if (ec != std::errc() || v < 0) {
      throw Error(ErrorKind::InvalidArgument, "malformed RLE text near offset " + std::to_string(i));
    }
    values.push_back(v);
    i = static_cast<std::size_t>(ptr - text.data());
    if (i < text.size() && text[i] != ' ' && text[i] != '\n' && text[i] != '\r' &&
        text[i] != '\t') {
      throw Error(ErrorKind::InvalidArgument, "malformed RLE text near offset " + std::to_string(i));
    }
  }
  if (values.size() < 3) throw Error(ErrorKind::InvalidArgument, "RLE text too short");
  if (values[0] > INT32_MAX || values[1] > INT32_MAX) {
    throw Error(ErrorKind::InvalidArgument, "RLE dimensions out of range");
  }
  FrameDims dims{static_cast<int>(values[0]), static_cast<int>(values[1])};
  std::vector<std::uint32_t> runs;
  runs.reserve(values.size() - 2);
  for (std::size_t k = 2; k < values.size(); ++k) {
    if (values[k] > UINT32_MAX) throw Error(ErrorKind::InvalidArgument, "RLE count out of range");
    runs.push_back(static_cast<std::uint32_t>(values[k]));
  }
  return from_runs(dims, std::move(runs));
}

std::vector<std::uint8_t> Mask::to_grid() const {
  std::vector<std::uint8_t> grid(static_cast<std::size_t>(dims_.area()), 0);
  for_each_fg_run(*this, [&](std::int64_t start, std::int64_t len) {
    std::fill_n(grid.begin() + start, len, std::uint8_t{1});
  });
  return grid;
}

std::string Mask::to_string() const {
  std::string out = std::to_string(dims_.width) + " " + std::to_string(dims_.height);
  for (std::uint32_t c : runs_) {
    out += ' ';
    out += std::to_string(c);
  }
  return out;
}

std::int64_t mask_area(const Mask& m) {
  std::int64_t area = 0;
  for_each_fg_run(m, [&](std::int64_t, std::int64_t len) { area += len; });
  return area;
}

std::optional<BBox> mask_to_bbox(const Mask& m) {
  if (m.is_empty()) return std::nullopt;
  const std::int64_t w = m.width();
  std::int64_t min_x = w, max_x = -1, min_y = m.height(), max_y = -1;
  for_each_fg_run(m, [&](std::int64_t start, std::int64_t len) {
    const std::int64_t end = start + len - 1;
    const std::int64_t y_start = start / w, y_end = end / w;
    min_y = std::min(min_y, y_start);
    max_y = std::max(max_y, y_end);
    if (y_start != y_end) {
      // A run that wraps a row ends at column w-1 and restarts at column 0.
      min_x = 0;
      max_x = w - 1;
    } else {
      min_x = std::min(min_x, start % w);
      max_x = std::max(max_x, end % w);
    }
  });
  return BBox(static_cast<int>(min_x), static_cast<int>(min_y), static_cast<int>(max_x + 1),
              static_cast<int>(max_y + 1));
}

std::int64_t bbox_intersection_area(const BBox& a, const BBox& b) {
  const int w = std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0());
  const int h = std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0());
  if (w <= 0 || h <= 0) return 0;
  return static_cast<std::int64_t>(w) * h;
}

double bbox_iou(const BBox& a, const BBox& b) {
  const std::int64_t inter = bbox_intersection_area(a, b);
  const std::int64_t uni = a.area() + b.area() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

OverlapCounts mask_overlap(const Mask& a, const Mask& b) {
  require_same_dims(a, b);
  // Merge-walk over both run lists; no decoding needed.
  OverlapCounts counts;
  const auto& ra = a.runs();
  const auto& rb = b.runs();
  std::size_t ia = 0, ib = 0;
  std::int64_t left_a = ra[0], left_b = rb[0];
  const std::int64_t total = a.dims().area();
  std::int64_t pos = 0;
  while (pos < total) {
    while (left_a == 0) left_a = ra[++ia];
    while (left_b == 0) left_b = rb[++ib];
    const std::int64_t step = std::min(left_a, left_b);
    const bool fa = ia % 2 == 1, fb = ib % 2 == 1;
    if (fa && fb) counts.intersection += step;
    if (fa || fb) counts.union_ += step;
    left_a -= step;
    left_b -= step;
    pos += step;
  }
  return counts;
}

double mask_iou(const Mask& a, const Mask& b) {
  const OverlapCounts c = mask_overlap(a, b);
  if (c.union_ == 0) return 1.0;
  return static_cast<double>(c.intersection) / static_cast<double>(c.union_);
}

std::vector<Pixel> boundary_pixels(const Mask& m) {
  std::vector<Pixel> out;
  if (m.is_empty()) return out;
  const auto grid = m.to_grid();
  const int w = m.width(), h = m.height();
  auto fg = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < w && y < h && grid[static_cast<std::size_t>(y) * w + x] != 0;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!fg(x, y)) continue;
      if (!fg(x - 1, y) || !fg(x + 1, y) || !fg(x, y - 1) || !fg(x, y + 1)) {
        out.push_back({x, y});
      }
    }
  }
  return out;
}

BBox crop(FrameDims frame, const BBox& b, int pad) {
  const int x0 = std::clamp(b.x0() - pad, 0, frame.width);
  const int y0 = std::clamp(b.y0() - pad, 0, frame.height);
  const int x1 = std::clamp(b.x1() + pad, 0, frame.width);
  const int y1 = std::clamp(b.y1() + pad, 0, frame.height);
  if (auto clipped = BBox::from_extents(x0, y0, x1, y1)) return *clipped;
  throw Error(ErrorKind::InvalidArgument, "bbox " + to_string(b) + " lies outside the frame");
}

Mask translate(const Mask& m, int dx, int dy) {
  if (dx == 0 && dy == 0) return m;
  const int w = m.width(), h = m.height();
  const auto src = m.to_grid();
  std::vector<std::uint8_t> dst(src.size(), 0);
  for (int y = 0; y < h; ++y) {
    const int ty = y + dy;
    if (ty < 0 || ty >= h) continue;
    for (int x = 0; x < w; ++x) {
      const int tx = x + dx;
      if (tx < 0 || tx >= w) continue;
      dst[static_cast<std::size_t>(ty) * w + tx] = src[static_cast<std::size_t>(y) * w + x];
    }
  }
  return Mask::from_grid(m.dims(), dst);
}

Mask scale_about_center(const Mask& m, double factor) {
  if (factor >= 1.0 || m.is_empty()) return m;
  if (factor <= 0.0) return Mask::empty(m.dims());
  const BBox box = *mask_to_bbox(m);
  const double cx = (box.x0() + box.x1()) / 2.0;
  const double cy = (box.y0() + box.y1()) / 2.0;
  const int w = m.width(), h = m.height();
  const auto src = m.to_grid();
  std::vector<std::uint8_t> dst(src.size(), 0);
  for (int y = box.y0(); y < box.y1(); ++y) {
    for (int x = box.x0(); x < box.x1(); ++x) {
      // Inverse map the pixel centre back into the source.
      const double sx = cx + (x + 0.5 - cx) / factor;
      const double sy = cy + (y + 0.5 - cy) / factor;
      const int ix = static_cast<int>(std::floor(sx));
      const int iy = static_cast<int>(std::floor(sy));
      if (ix < 0 || iy < 0 || ix >= w || iy >= h) continue;
      dst[static_cast<std::size_t>(y) * w + x] = src[static_cast<std::size_t>(iy) * w + ix];
    }
  }
  return Mask::from_grid(m.dims(), dst);
}

}  // namespace tep
