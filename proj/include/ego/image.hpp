#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ego/camera.hpp"

namespace ego {

/// Single-channel depth image; a pixel is valid iff its value is finite and > 0.
struct DepthMap {
  int width = 0, height = 0;
  std::vector<float> data;

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h, 0.0f) {}

  float& at(int col, int row) { return data[static_cast<size_t>(row) * width + col]; }
  float at(int col, int row) const { return data[static_cast<size_t>(row) * width + col]; }
  static bool is_valid_depth(float d) { return std::isfinite(d) && d > 0.0f; }
  size_t valid_count() const;
};

/// Multi-channel image, channel-major (C x H x W).
struct FeatureImage {
  int channels = 0, width = 0, height = 0;
  std::vector<double> data;

  FeatureImage() = default;
  FeatureImage(int c, int w, int h)
      : channels(c), width(w), height(h), data(static_cast<size_t>(c) * w * h, 0.0) {}

  double& at(int c, int col, int row) {
    return data[(static_cast<size_t>(c) * height + row) * width + col];
  }
  double at(int c, int col, int row) const {
    return data[(static_cast<size_t>(c) * height + row) * width + col];
  }
};

/// Bilinear sample of every channel at continuous pixel coordinates (u, v);
/// samples are clamped to the border pixels. Writes `channels` values to out.
void sample_bilinear(const FeatureImage& img, double u, double v, std::span<double> out);

/// Resamples a depth map rendered by `src` into the `dst` pinhole camera,
/// converting to the destination's depth convention. Bilinear where all four
/// neighbors are valid, otherwise invalid.
DepthMap rectify_depth(const DepthMap& depth, const Camera& src, const RectifyMap& map,
                       const PinholeCamera& dst);

}  // namespace ego
