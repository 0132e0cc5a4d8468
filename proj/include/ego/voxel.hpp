#pragma once

// Local gravity-aligned voxel grid: feature lifting, point/freespace masks and
// trilinear sampling.
//
// Grid-frame voxel (i, j, k) has its center at
//   ((k + 0.5 - W/2), (j + 0.5 - H/2), (i + 0.5 - D/2)) * voxel_size,
// so the D axis runs along grid z, H along grid y and W along grid x.

#include <cstdint>
#include <optional>
#include <vector>

#include "ego/camera.hpp"
#include "ego/geom.hpp"
#include "ego/image.hpp"
#include "ego/volume.hpp"

namespace ego {

struct VoxelIndex {
  int i = 0, j = 0, k = 0;
  bool operator==(const VoxelIndex&) const = default;
};

struct VoxelGrid {
  Pose T_w_grid;
  int D = 1, H = 1, W = 1;
  double voxel_size = 1.0;

  size_t voxel_count() const { return static_cast<size_t>(D) * H * W; }
  size_t linear(int i, int j, int k) const { return (static_cast<size_t>(i) * H + j) * W + k; }
  VoxelIndex unravel(size_t idx) const;

  Vec3 center_grid(int i, int j, int k) const;
  Vec3 center_world(int i, int j, int k) const { return T_w_grid * center_grid(i, j, k); }
  /// Continuous index coordinates (k, j, i order as x, y, z); voxel centers
  /// sit at integers.
  Vec3 to_index_coords(const Vec3& p_world) const;
  /// Voxel containing a world point (floor convention), if inside the grid.
  std::optional<VoxelIndex> locate(const Vec3& p_world) const;
  /// Heading of the grid's horizontal z axis about world up.
  double yaw() const;
};

inline constexpr double kDefaultExtent = 4.0;
inline constexpr int kDefaultFreespaceSamples = 64;

/// Gravity-aligned grid centered half an extent ahead of the camera along the
/// horizontal projection of its viewing axis.
VoxelGrid anchor_grid(const Pose& T_w_cam, const GravityDir& g, double extent_m, int resolution);
/// Anchors at poses[index], or at the most recent earlier pose whose viewing
/// axis is not parallel to gravity. Throws DegenerateGravityAlignment if none is.
VoxelGrid anchor_grid_at(const std::vector<Pose>& poses, size_t index, const GravityDir& g, double extent_m,
                         int resolution);

/// World-space centers of every voxel in linear (i-major) order.
std::vector<Vec3> voxel_centers(const VoxelGrid& grid);

struct LiftFrame {
  FeatureImage features;
  Camera camera;
  Pose T_w_cam;
};

/// Channels [0, F) hold per-voxel means and [F, 2F) population standard
/// deviations over every valid bilinear sample across frames.
FeatureVolume lift_features(const VoxelGrid& grid, const std::vector<LiftFrame>& frames);

/// Semi-dense points with the camera centers they were observed from.
struct PointCloudWithVisibility {
  std::vector<Vec3> points;
  std::vector<Vec3> cameras;
  std::vector<std::vector<std::uint32_t>> observers;  // indices into cameras, per point
};

MaskVolume rasterize_points(const VoxelGrid& grid, const PointCloudWithVisibility& pc);

/// Marks voxels crossed by camera-to-point segments (sampled at S points and
/// stopped one voxel short of the surface). Voxels that contain a surface
/// point are never marked free.
MaskVolume rasterize_freespace(const VoxelGrid& grid, const PointCloudWithVisibility& pc,
                               int samples = kDefaultFreespaceSamples);

/// Trilinear interpolation between voxel centers; nullopt outside the
/// interpolation region (beyond the outermost centers).
std::optional<double> trilinear_sample(const DenseVolume& vol, const VoxelGrid& grid, const Vec3& p_world);
std::vector<std::optional<double>> trilinear_sample(const DenseVolume& vol, const VoxelGrid& grid,
                                                    const std::vector<Vec3>& pts_world);

/// Trilinear stencil: 8 voxel linear indices and weights (weights sum to 1).
struct TrilinearStencil {
  size_t idx[8];
  double w[8];
};
std::optional<TrilinearStencil> trilinear_stencil(const VoxelGrid& grid, const Vec3& p_world);

}  // namespace ego
