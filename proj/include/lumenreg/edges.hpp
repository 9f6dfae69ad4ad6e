#pragma once

#include "lumenreg/frames.hpp"

#include <cstdint>
#include <span>
#include <string_view>

namespace lumenreg {

struct EdgeConfig {
  double canny_low = 0.1;   // fraction of the frame's max gradient magnitude
  double canny_high = 0.2;
  double blur_sigma = 4.0;  // pixels
  int blur_radius = 12;     // >= ceil(3 * sigma)

  /// Throws InvalidArgument on a violated invariant.
  void validate() const;
  /// Blur width for a grid decimated by `factor`.
  EdgeConfig scaled(int factor) const;
};

/// Depth as the edge operator sees it: misses at the far clamp, values
/// limited to [0, kFarClampMm].
Grid<double> clamped_depth(const DepthFrame& d);

/// Binary Canny edge map (Gaussian sigma 1 pre-smoothing, Sobel gradients,
/// non-maximum suppression, hysteresis at fractions of the max magnitude).
Grid<std::uint8_t> canny(const Grid<double>& image, double low_fraction, double high_fraction);

/// Convolves a binary map with a unit-peak Gaussian and clips to [0, 1].
EdgeFrame blur_edges(const Grid<std::uint8_t>& edges, double sigma, int radius);

/// The registration edge operator: canny on clamped depth, then blur.
EdgeFrame edge_operator(const DepthFrame& d, const EdgeConfig& cfg);

/// Mean over all K*H*W entries of the elementwise product.
double similarity(std::span<const EdgeFrame> rendered, std::span<const EdgeFrame> target);

enum class LossMetric { L1, L2, NCC, GC, DICE };

LossMetric parse_metric(std::string_view name);
std::string_view metric_name(LossMetric m);

/// Alternative frame losses (lower is better, 0 at equality):
///   L1 / L2: mean absolute / squared difference over all frames.
///   NCC: mean over frames of 1 - zero-mean normalized cross-correlation.
///   GC:  mean over frames of 1 - mean(NCC of Sobel x, NCC of Sobel y).
///   DICE: 1 - 2|A and B| / (|A| + |B|) over binary frames.
/// A frame with zero variance contributes a loss of 1.0 to NCC and GC.
double frame_loss(std::span<const Grid<double>> a, std::span<const Grid<double>> b, LossMetric metric);

}  // namespace lumenreg
