#include "ego/voxel.hpp"

#include <algorithm>
#include <cmath>

#include "ego/error.hpp"
#include "ego/parallel.hpp"

namespace ego {

VoxelIndex VoxelGrid::unravel(size_t idx) const {
  VoxelIndex v;
  v.k = static_cast<int>(idx % W);
  idx /= W;
  v.j = static_cast<int>(idx % H);
  v.i = static_cast<int>(idx / H);
  return v;
}

Vec3 VoxelGrid::center_grid(int i, int j, int k) const {
  return Vec3(k + 0.5 - 0.5 * W, j + 0.5 - 0.5 * H, i + 0.5 - 0.5 * D) * voxel_size;
}

Vec3 VoxelGrid::to_index_coords(const Vec3& p_world) const {
  const Vec3 g = T_w_grid.inverse() * p_world;
  return Vec3(g.x() / voxel_size + 0.5 * W - 0.5, g.y() / voxel_size + 0.5 * H - 0.5,
              g.z() / voxel_size + 0.5 * D - 0.5);
}

std::optional<VoxelIndex> VoxelGrid::locate(const Vec3& p_world) const {
  const Vec3 c = to_index_coords(p_world) + Vec3::Constant(0.5);
  const double fk = std::floor(c.x()), fj = std::floor(c.y()), fi = std::floor(c.z());
  if (fk < 0 || fj < 0 || fi < 0 || fk >= W || fj >= H || fi >= D) return std::nullopt;
  return VoxelIndex{static_cast<int>(fi), static_cast<int>(fj), static_cast<int>(fk)};
}

double VoxelGrid::yaw() const {
  const Vec3 z = T_w_grid.rotation.col(2);
  return std::atan2(z.y(), z.x());
}

VoxelGrid anchor_grid(const Pose& T_w_cam, const GravityDir& g, double extent_m, int resolution) {
  if (!(extent_m > 0.0) || resolution < 1) {
    fail(ErrorCode::kInvalidArgument, "grid extent and resolution must be positive");
  }
  const Rotation R = gravity_align(T_w_cam.rotation, g);
  VoxelGrid grid;
  grid.D = grid.H = grid.W = resolution;
  grid.voxel_size = extent_m / resolution;
  // Column 2 of the aligned rotation is the unit horizontal viewing direction.
  grid.T_w_grid = Pose(R, T_w_cam.translation + 0.5 * extent_m * R.col(2));
  return grid;
}

VoxelGrid anchor_grid_at(const std::vector<Pose>& poses, size_t index, const GravityDir& g, double extent_m,
                         int resolution) {
  if (index >= poses.size()) fail(ErrorCode::kInvalidArgument, "anchor frame index out of range");
  for (size_t f = index + 1; f-- > 0;) {
    try {
      return anchor_grid(poses[f], g, extent_m, resolution);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateGravityAlignment) throw;
    }
  }
  fail(ErrorCode::kDegenerateGravityAlignment, "no frame up to the anchor has a non-vertical viewing axis");
}

std::vector<Vec3> voxel_centers(const VoxelGrid& grid) {
  std::vector<Vec3> out;
  out.reserve(grid.voxel_count());
  for (int i = 0; i < grid.D; ++i)
    for (int j = 0; j < grid.H; ++j)
      for (int k = 0; k < grid.W; ++k) out.push_back(grid.center_world(i, j, k));
  return out;
}

FeatureVolume lift_features(const VoxelGrid& grid, const std::vector<LiftFrame>& frames) {
  if (frames.empty()) fail(ErrorCode::kInvalidArgument, "lift_features needs at least one frame");
  const int F = frames.front().features.channels;
  for (const auto& f : frames) {
    if (f.features.channels != F) {
      fail(ErrorCode::kMismatchedFeatureDims, "frames disagree on feature dimension");
    }
  }
  std::vector<Pose> T_cam_w;
  for (const auto& f : frames) T_cam_w.push_back(f.T_w_cam.inverse());

  FeatureVolume out(2 * F, grid.D, grid.H, grid.W);
  parallel_for(grid.voxel_count(), [&](size_t begin, size_t end) {
    std::vector<double> sample(F), mean(F), m2(F);
    for (size_t v = begin; v < end; ++v) {
      const VoxelIndex idx = grid.unravel(v);
      const Vec3 c = grid.center_world(idx.i, idx.j, idx.k);
      std::fill(mean.begin(), mean.end(), 0.0);
      std::fill(m2.begin(), m2.end(), 0.0);
      int n = 0;
      for (size_t f = 0; f < frames.size(); ++f) {
        const Pixel px = project(frames[f].camera, T_cam_w[f] * c);
        if (!px.valid) continue;
        sample_bilinear(frames[f].features, px.u, px.v, sample);
        ++n;
        for (int ch = 0; ch < F; ++ch) {
          const double delta = sample[ch] - mean[ch];
          mean[ch] += delta / n;
          m2[ch] += delta * (sample[ch] - mean[ch]);
        }
      }
      if (n == 0) continue;
      for (int ch = 0; ch < F; ++ch) {
        out.at(ch, v) = mean[ch];
        out.at(F + ch, v) = n < 2 ? 0.0 : std::sqrt(std::max(0.0, m2[ch] / n));
      }
    }
  });
  return out;
}

MaskVolume rasterize_points(const VoxelGrid& grid, const PointCloudWithVisibility& pc) {
  MaskVolume mask(grid.D, grid.H, grid.W, 0);
  for (const Vec3& p : pc.points) {
    if (auto v = grid.locate(p)) mask(v->i, v->j, v->k) = 1;
  }
  return mask;
}

MaskVolume rasterize_freespace(const VoxelGrid& grid, const PointCloudWithVisibility& pc, int samples) {
  if (samples < 2) fail(ErrorCode::kInvalidArgument, "freespace rasterization needs at least 2 samples per ray");
  MaskVolume mask(grid.D, grid.H, grid.W, 0);
  for (size_t p = 0; p < pc.points.size(); ++p) {
    const Vec3& surface = pc.points[p];
    for (std::uint32_t cam : pc.observers[p]) {
      const Vec3& origin = pc.cameras.at(cam);
      const Vec3 ray = surface - origin;
      const double len = ray.norm();
      if (len <= grid.voxel_size) continue;
      const Vec3 stop = surface - ray * (grid.voxel_size / len);
      for (int s = 0; s < samples; ++s) {
        const double t = static_cast<double>(s) / (samples - 1);
        if (auto v = grid.locate(origin + t * (stop - origin))) mask(v->i, v->j, v->k) = 1;
      }
    }
  }
  const MaskVolume points = rasterize_points(grid, pc);
  for (size_t i = 0; i < mask.size(); ++i) {
    if (points.data[i]) mask.data[i] = 0;
  }
  return mask;
}

std::optional<TrilinearStencil> trilinear_stencil(const VoxelGrid& grid, const Vec3& p_world) {
  const Vec3 c = grid.to_index_coords(p_world);
  const int dims[3] = {grid.W, grid.H, grid.D};
  int lo[3];
  double frac[3];
  // Points within rounding distance of the outermost centers count as inside.
  constexpr double kEdgeTol = 1e-9;
  for (int a = 0; a < 3; ++a) {
    if (!(c[a] >= -kEdgeTol) || c[a] > dims[a] - 1 + kEdgeTol) return std::nullopt;
    const double x = std::clamp(c[a], 0.0, static_cast<double>(dims[a] - 1));
    lo[a] = std::min(static_cast<int>(std::floor(x)), std::max(dims[a] - 2, 0));
    frac[a] = x - lo[a];
  }
  TrilinearStencil st;
  int n = 0;
  for (int dz = 0; dz < 2; ++dz) {
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const int k = std::min(lo[0] + dx, grid.W - 1);
        const int j = std::min(lo[1] + dy, grid.H - 1);
        const int i = std::min(lo[2] + dz, grid.D - 1);
        st.idx[n] = grid.linear(i, j, k);
        st.w[n] = (dx ? frac[0] : 1.0 - frac[0]) * (dy ? frac[1] : 1.0 - frac[1]) *
                  (dz ? frac[2] : 1.0 - frac[2]);
        ++n;
      }
    }
  }
  return st;
}

std::optional<double> trilinear_sample(const DenseVolume& vol, const VoxelGrid& grid, const Vec3& p_world) {
  if (!vol.same_shape(grid.D, grid.H, grid.W)) {
    fail(ErrorCode::kShapeMismatch, "volume shape does not match grid");
  }
  const auto st = trilinear_stencil(grid, p_world);
  if (!st) return std::nullopt;
  double v = 0.0;
  for (int n = 0; n < 8; ++n) v += st->w[n] * vol.data[st->idx[n]];
  return v;
}

std::vector<std::optional<double>> trilinear_sample(const DenseVolume& vol, const VoxelGrid& grid,
                                                    const std::vector<Vec3>& pts_world) {
  std::vector<std::optional<double>> out;
  out.reserve(pts_world.size());
  for (const Vec3& p : pts_world) out.push_back(trilinear_sample(vol, grid, p));
  return out;
}

}  // namespace ego
