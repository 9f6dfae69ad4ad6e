#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace lumenreg {

/// Row-major H x W grid.
template <typename T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  T& operator()(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& operator()(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(int w, int h) const { return width == w && height == h; }
  template <typename U>
  bool same_shape(const Grid<U>& o) const { return width == o.width && height == o.height; }
};

/// Depth along the camera z axis in millimeters. `hit` is 0 where the ray
/// missed; depth there is 0 and carries no meaning.
struct DepthFrame {
  Grid<double> depth;
  Grid<std::uint8_t> hit;

  DepthFrame() = default;
  DepthFrame(int w, int h) : depth(w, h, 0.0), hit(w, h, 0) {}
  int width() const { return depth.width; }
  int height() const { return depth.height; }
};

/// Camera-frame unit normals facing the camera.
struct NormalFrame {
  Grid<Eigen::Vector3d> normal;
  Grid<std::uint8_t> hit;

  NormalFrame() = default;
  NormalFrame(int w, int h) : normal(w, h, Eigen::Vector3d::Zero()), hit(w, h, 0) {}
};

/// Pixel displacement (du, dv) from frame i-1 to frame i, indexed on the grid
/// of frame i-1: the point seen at (u, v) appears at (u + du, v + dv).
struct FlowFrame {
  Grid<Eigen::Vector2d> flow;
  Grid<std::uint8_t> valid;

  FlowFrame() = default;
  FlowFrame(int w, int h) : flow(w, h, Eigen::Vector2d::Zero()), valid(w, h, 0) {}
};

using OcclusionFrame = Grid<std::uint8_t>;  // values in {0, 1}
using EdgeFrame = Grid<double>;             // values in [0, 1]

/// One observed flag per mesh face.
using CoverageMap = std::vector<std::uint8_t>;

}  // namespace lumenreg
