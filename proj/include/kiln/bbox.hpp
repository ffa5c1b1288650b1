#pragma once

namespace kiln {

/// Axis-aligned box [x0, x1] x [y0, y1]. For detections the coordinates are
/// pixel edges: a single pixel (c, r) is [c, r, c + 1, r + 1].
struct BBox {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double area() const { return (x1 - x0) * (y1 - y0); }
  bool valid() const { return x0 <= x1 && y0 <= y1; }
  friend bool operator==(const BBox &, const BBox &) = default;
};

} // namespace kiln
