#include "lumenreg/edges.hpp"

#include "lumenreg/errors.hpp"
#include "lumenreg/render.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace lumenreg {

void EdgeConfig::validate() const {
  if (!(canny_low > 0.0 && canny_low < canny_high && canny_high <= 1.0))
    throw InvalidArgument("canny thresholds must satisfy 0 < low < high <= 1");
  if (!(blur_sigma > 0.0)) throw InvalidArgument("blur sigma must be positive");
  if (blur_radius < static_cast<int>(std::ceil(3.0 * blur_sigma)))
    throw InvalidArgument("blur radius must be at least ceil(3 * sigma)");
}

EdgeConfig EdgeConfig::scaled(int factor) const {
  EdgeConfig c = *this;
  c.blur_sigma = blur_sigma / factor;
  c.blur_radius = static_cast<int>(std::ceil(3.0 * c.blur_sigma));
  return c;
}

Grid<double> clamped_depth(const DepthFrame& d) {
  Grid<double> out(d.width(), d.height(), kFarClampMm);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (d.hit.data[i]) out.data[i] = std::clamp(d.depth.data[i], 0.0, kFarClampMm);
  return out;
}

namespace {

std::vector<double> gaussian_kernel(double sigma, int radius, bool unit_sum) {
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + radius)];
  }
  if (unit_sum)
    for (double& v : k) v /= sum;
  return k;
}

// Separable convolution with replicated borders.
Grid<double> convolve(const Grid<double>& in, const std::vector<double>& k) {
  const int r = static_cast<int>(k.size() / 2);
  const int w = in.width, h = in.height;
  Grid<double> tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * in(std::clamp(x + i, 0, w - 1), y);
      tmp(x, y) = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * tmp(x, std::clamp(y + i, 0, h - 1));
      out(x, y) = s;
    }
  return out;
}

void sobel(const Grid<double>& in, Grid<double>& gx, Grid<double>& gy) {
  const int w = in.width, h = in.height;
  gx = Grid<double>(w, h);
  gy = Grid<double>(w, h);
  const auto at = [&](int x, int y) { return in(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      gx(x, y) = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)) -
                 (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
      gy(x, y) = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)) -
                 (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
    }
}

double ncc(const Grid<double>& a, const Grid<double>& b, bool& degenerate) {
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a.data[i];
    mb += b.data[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a.data[i] - ma, db = b.data[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  degenerate = !(saa > 0.0 && sbb > 0.0);
  return degenerate ? 0.0 : sab / std::sqrt(saa * sbb);
}

}  // namespace

Grid<std::uint8_t> canny(const Grid<double>& image, double low_fraction, double high_fraction) {
  const int w = image.width, h = image.height;
  Grid<std::uint8_t> edges(w, h, 0);
  if (w < 3 || h < 3) return edges;

  const Grid<double> smooth = convolve(image, gaussian_kernel(1.0, 3, true));
  Grid<double> gx, gy;
  sobel(smooth, gx, gy);
  Grid<double> mag(w, h);
  double max_mag = 0.0;
  for (std::size_t i = 0; i < mag.size(); ++i) {
    mag.data[i] = std::hypot(gx.data[i], gy.data[i]);
    max_mag = std::max(max_mag, mag.data[i]);
  }
  // Numerical noise on flat frames must not produce edges.
  if (max_mag <= 1e-9) return edges;

  // Non-maximum suppression along the quantized gradient direction.
  Grid<double> thin(w, h, 0.0);
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      const double m = mag(x, y);
      if (m <= 0.0) continue;
      const double ax = std::abs(gx(x, y)), ay = std::abs(gy(x, y));
      int dx, dy;
      if (ay <= 0.41421356 * ax) {
        dx = 1, dy = 0;
      } else if (ax <= 0.41421356 * ay) {
        dx = 0, dy = 1;
      } else {
        dx = 1;
        dy = (gx(x, y) > 0.0) == (gy(x, y) > 0.0) ? 1 : -1;
      }
      if (m >= mag(x - dx, y - dy) && m > mag(x + dx, y + dy)) thin(x, y) = m;
    }

  const double hi = high_fraction * max_mag, lo = low_fraction * max_mag;
  std::vector<int> stack;
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x)
      if (thin(x, y) >= hi && !edges(x, y)) {
        edges(x, y) = 1;
        stack.push_back(y * w + x);
        while (!stack.empty()) {
          const int p = stack.back();
          stack.pop_back();
          const int px = p % w, py = p / w;
          for (int ny = py - 1; ny <= py + 1; ++ny)
            for (int nx = px - 1; nx <= px + 1; ++nx)
              if (!edges(nx, ny) && thin(nx, ny) >= lo) {
                edges(nx, ny) = 1;
                stack.push_back(ny * w + nx);
              }
        }
      }
  return edges;
}

EdgeFrame blur_edges(const Grid<std::uint8_t>& edges, double sigma, int radius) {
  Grid<double> in(edges.width, edges.height);
  for (std::size_t i = 0; i < in.size(); ++i) in.data[i] = edges.data[i] ? 1.0 : 0.0;
  // Zero padding (not replication) so border edges do not smear outward.
  const auto k = gaussian_kernel(sigma, radius, false);
  const int w = in.width, h = in.height;
  Grid<double> tmp(w, h, 0.0);
  EdgeFrame out(w, h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (in(x, y) == 0.0) continue;
      for (int i = std::max(-radius, -x); i <= std::min(radius, w - 1 - x); ++i)
        tmp(x + i, y) += k[static_cast<std::size_t>(i + radius)];
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = tmp(x, y);
      if (v == 0.0) continue;
      for (int i = std::max(-radius, -y); i <= std::min(radius, h - 1 - y); ++i)
        out(x, y + i) += v * k[static_cast<std::size_t>(i + radius)];
    }
  for (double& v : out.data) v = std::min(v, 1.0);
  return out;
}

EdgeFrame edge_operator(const DepthFrame& d, const EdgeConfig& cfg) {
  return blur_edges(canny(clamped_depth(d), cfg.canny_low, cfg.canny_high), cfg.blur_sigma,
                    cfg.blur_radius);
}

double similarity(std::span<const EdgeFrame> rendered, std::span<const EdgeFrame> target) {
  if (rendered.size() != target.size() || rendered.empty())
    throw InvalidArgument("similarity needs equal, nonzero frame counts");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < rendered.size(); ++k) {
    if (!rendered[k].same_shape(target[k]) || !rendered[k].same_shape(rendered[0]))
      throw InvalidArgument("similarity frame dimensions differ");
    for (std::size_t i = 0; i < rendered[k].size(); ++i) sum += rendered[k].data[i] * target[k].data[i];
    n += rendered[k].size();
  }
  return sum / static_cast<double>(n);
}

LossMetric parse_metric(std::string_view name) {
  if (name == "l1") return LossMetric::L1;
  if (name == "l2") return LossMetric::L2;
  if (name == "ncc") return LossMetric::NCC;
  if (name == "gc") return LossMetric::GC;
  if (name == "dice") return LossMetric::DICE;
  throw InvalidArgument("unknown loss metric '" + std::string(name) + "'");
}

std::string_view metric_name(LossMetric m) {
  switch (m) {
    case LossMetric::L1: return "l1";
    case LossMetric::L2: return "l2";
    case LossMetric::NCC: return "ncc";
    case LossMetric::GC: return "gc";
    case LossMetric::DICE: return "dice";
  }
  return "?";
}

double frame_loss(std::span<const Grid<double>> a, std::span<const Grid<double>> b, LossMetric metric) {
  if (a.size() != b.size() || a.empty()) throw InvalidArgument("frame_loss needs equal, nonzero frame counts");
  for (std::size_t k = 0; k < a.size(); ++k)
    if (!a[k].same_shape(b[k])) throw InvalidArgument("frame_loss frame dimensions differ");

  switch (metric) {
    case LossMetric::L1:
    case LossMetric::L2: {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        for (std::size_t i = 0; i < a[k].size(); ++i) {
          const double d = a[k].data[i] - b[k].data[i];
          sum += metric == LossMetric::L1 ? std::abs(d) : d * d;
        }
        n += a[k].size();
      }
      return sum / static_cast<double>(n);
    }
    case LossMetric::NCC: {
      double loss = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        bool degenerate = false;
        const double c = ncc(a[k], b[k], degenerate);
        loss += degenerate ? 1.0 : 1.0 - c;
      }
      return loss / static_cast<double>(a.size());
    }
    case LossMetric::GC: {
      double loss = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        Grid<double> ax, ay, bx, by;
        sobel(a[k], ax, ay);
        sobel(b[k], bx, by);
        bool dx = false, dy = false;
        const double cx = ncc(ax, bx, dx);
        const double cy = ncc(ay, by, dy);
        loss += (dx || dy) ? 1.0 : 1.0 - 0.5 * (cx + cy);
      }
      return loss / static_cast<double>(a.size());
    }
    case LossMetric::DICE: {
      double inter = 0.0, total = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k)
        for (std::size_t i = 0; i < a[k].size(); ++i) {
          const double x = a[k].data[i], y = b[k].data[i];
          if ((x != 0.0 && x != 1.0) || (y != 0.0 && y != 1.0))
            throw InvalidArgument("DICE requires binary frames");
          inter += x * y;
          total += x + y;
        }
      return total == 0.0 ? 0.0 : 1.0 - 2.0 * inter / total;
    }
  }
  return 1.0;
}

}  // namespace lumenreg
