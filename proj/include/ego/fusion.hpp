#pragma once

// Global surface fusion: projective TSDF averaging of depth maps, running-mean
// fusion of local occupancy grids, and marching-cubes extraction.
//
// Global volumes reuse VoxelGrid's indexing: T_w_grid places the volume
// center, and voxel (i, j, k) spans grid z, y, x respectively.

#include <cstdint>

#include "ego/camera.hpp"
#include "ego/image.hpp"
#include "ego/mesh.hpp"
#include "ego/voxel.hpp"
#include "ego/volume.hpp"

namespace ego {

inline constexpr double kTruncationVoxels = 3.0;
inline constexpr double kMaxTsdfWeight = 128.0;
inline constexpr int kTsdfMinObs = 2;
inline constexpr int kOccupancyMinObs = 5;
inline constexpr double kTsdfIso = 0.0;
inline constexpr double kOccupancyIso = 0.5;

struct TsdfVolume {
  VoxelGrid grid;
  double truncation = 0.0;
  DenseVolume tsdf;     // normalized by truncation, in [-1, 1]
  DenseVolume weights;  // 0 means unobserved

  /// Fresh volume; truncation <= 0 selects kTruncationVoxels * voxel_size.
  static TsdfVolume make(const VoxelGrid& grid, double truncation = 0.0);
};

struct OccupancyVolume {
  VoxelGrid grid;
  DenseVolume occ;  // in [0, 1]
  Grid3<std::int32_t> counts;

  static OccupancyVolume make(const VoxelGrid& grid);
};

/// Projects every voxel center into the camera and averages the truncated
/// signed distance d - depth(voxel) against the nearest depth pixel. Voxels
/// more than one truncation behind the surface are left untouched.
void integrate_depth_inplace(TsdfVolume& vol, const DepthMap& depth, const Camera& cam, const Pose& T_w_cam);
TsdfVolume integrate_depth(TsdfVolume vol, const DepthMap& depth, const Camera& cam, const Pose& T_w_cam);
/// Valid depth pixels whose surface point falls outside the grid; their
/// content cannot be represented by the volume.
size_t count_out_of_extent(const VoxelGrid& grid, const DepthMap& depth, const Camera& cam, const Pose& T_w_cam);

/// Trilinearly samples `local_occ` at every global voxel center inside the
/// local grid's interpolation region and folds it into the running mean.
void integrate_occupancy_inplace(OccupancyVolume& global, const DenseVolume& local_occ, const VoxelGrid& local_grid);
OccupancyVolume integrate_occupancy(OccupancyVolume global, const DenseVolume& local_occ,
                                    const VoxelGrid& local_grid);

/// Marching cubes over voxel centers. A corner is inside when its value is
/// below `iso`; faces wind counter-clockwise seen from outside. Cubes with any
/// corner count below `min_obs` are skipped, and zero-area faces are dropped.
/// Vertices are shared between adjacent cubes and returned in world frame.
TriangleMesh marching_cubes(const DenseVolume& values, const DenseVolume& counts, double iso, double min_obs,
                            const VoxelGrid& grid);

/// Extraction at the conventional iso levels (0 for TSDF, 0.5 for occupancy;
/// occupancy is inside above iso).
TriangleMesh extract_mesh(const TsdfVolume& vol, int min_obs = kTsdfMinObs);
TriangleMesh extract_mesh(const OccupancyVolume& vol, int min_obs = kOccupancyMinObs);

}  // namespace ego
