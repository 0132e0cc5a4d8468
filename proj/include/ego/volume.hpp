#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ego {

/// Dense D x H x W array, i-major (D), then H, then W.
template <typename T>
struct Grid3 {
  int D = 0, H = 0, W = 0;
  std::vector<T> data;

  Grid3() = default;
  Grid3(int d, int h, int w, T fill = T{})
      : D(d), H(h), W(w), data(static_cast<size_t>(d) * h * w, fill) {}

  size_t size() const { return data.size(); }
  size_t index(int i, int j, int k) const { return (static_cast<size_t>(i) * H + j) * W + k; }
  T& operator()(int i, int j, int k) { return data[index(i, j, k)]; }
  const T& operator()(int i, int j, int k) const { return data[index(i, j, k)]; }
  bool same_shape(int d, int h, int w) const { return D == d && H == h && W == w; }
  template <typename U>
  bool same_shape(const Grid3<U>& o) const {
    return D == o.D && H == o.H && W == o.W;
  }
};

using DenseVolume = Grid3<double>;
using MaskVolume = Grid3<std::uint8_t>;

/// C x D x H x W tensor.
struct FeatureVolume {
  int C = 0, D = 0, H = 0, W = 0;
  std::vector<double> data;

  FeatureVolume() = default;
  FeatureVolume(int c, int d, int h, int w)
      : C(c), D(d), H(h), W(w), data(static_cast<size_t>(c) * d * h * w, 0.0) {}

  size_t voxel_count() const { return static_cast<size_t>(D) * H * W; }
  double& at(int c, size_t voxel) { return data[c * voxel_count() + voxel]; }
  double at(int c, size_t voxel) const { return data[c * voxel_count() + voxel]; }
};

}  // namespace ego
