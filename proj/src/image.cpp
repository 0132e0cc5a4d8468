#include "ego/image.hpp"

#include <algorithm>

namespace ego {

size_t DepthMap::valid_count() const {
  return static_cast<size_t>(std::count_if(data.begin(), data.end(), is_valid_depth));
}

void sample_bilinear(const FeatureImage& img, double u, double v, std::span<double> out) {
  const double x = std::clamp(u - 0.5, 0.0, static_cast<double>(img.width - 1));
  const double y = std::clamp(v - 0.5, 0.0, static_cast<double>(img.height - 1));
  const int x0 = std::min(static_cast<int>(x), img.width - 1);
  const int y0 = std::min(static_cast<int>(y), img.height - 1);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double ax = x - x0, ay = y - y0;
  for (int c = 0; c < img.channels; ++c) {
    const double top = (1.0 - ax) * img.at(c, x0, y0) + ax * img.at(c, x1, y0);
    const double bot = (1.0 - ax) * img.at(c, x0, y1) + ax * img.at(c, x1, y1);
    out[c] = (1.0 - ay) * top + ay * bot;
  }
}

DepthMap rectify_depth(const DepthMap& depth, const Camera& src, const RectifyMap& map,
                       const PinholeCamera& dst) {
  DepthMap out(dst.width, dst.height);
  for (int row = 0; row < dst.height; ++row) {
    for (int col = 0; col < dst.width; ++col) {
      const size_t i = static_cast<size_t>(row) * dst.width + col;
      if (!map.valid[i]) continue;
      const double x = map.src[i].x() - 0.5, y = map.src[i].y() - 0.5;
      const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
      if (x0 < 0 || y0 < 0 || x0 + 1 >= depth.width || y0 + 1 >= depth.height) continue;
      const float d00 = depth.at(x0, y0), d10 = depth.at(x0 + 1, y0);
      const float d01 = depth.at(x0, y0 + 1), d11 = depth.at(x0 + 1, y0 + 1);
      if (!DepthMap::is_valid_depth(d00) || !DepthMap::is_valid_depth(d10) ||
          !DepthMap::is_valid_depth(d01) || !DepthMap::is_valid_depth(d11)) {
        continue;
      }
      const double ax = x - x0, ay = y - y0;
      const double d = (1 - ay) * ((1 - ax) * d00 + ax * d10) + ay * ((1 - ax) * d01 + ax * d11);
      const Vec3 p = unproject(src, Pixel{map.src[i].x(), map.src[i].y(), true}, d);
      out.at(col, row) = static_cast<float>(p.z());
    }
  }
  return out;
}

}  // namespace ego
