#include "ego/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "ego/error.hpp"
#include "ego/parallel.hpp"
#include "mc_tables.hpp"

namespace ego {

TsdfVolume TsdfVolume::make(const VoxelGrid& grid, double truncation) {
  if (!(grid.voxel_size > 0.0) || grid.D < 1 || grid.H < 1 || grid.W < 1) {
    fail(ErrorCode::kInvalidArgument, "TSDF volume needs a positive voxel size and dims");
  }
  TsdfVolume v;
  v.grid = grid;
  v.truncation = truncation > 0.0 ? truncation : kTruncationVoxels * grid.voxel_size;
  v.tsdf = DenseVolume(grid.D, grid.H, grid.W, 0.0);
  v.weights = DenseVolume(grid.D, grid.H, grid.W, 0.0);
  return v;
}

OccupancyVolume OccupancyVolume::make(const VoxelGrid& grid) {
  if (!(grid.voxel_size > 0.0) || grid.D < 1 || grid.H < 1 || grid.W < 1) {
    fail(ErrorCode::kInvalidArgument, "occupancy volume needs a positive voxel size and dims");
  }
  OccupancyVolume v;
  v.grid = grid;
  v.occ = DenseVolume(grid.D, grid.H, grid.W, 0.0);
  v.counts = Grid3<std::int32_t>(grid.D, grid.H, grid.W, 0);
  return v;
}

namespace {

// Per-model fast path: z-depth cull for pinhole, view-cone cull for fisheye.
struct PinholeKernel {
  const PinholeCamera& cam;
  bool visible(const Vec3& p) const { return p.z() > 1e-9; }
  double depth(const Vec3& p) const { return p.z(); }
  Pixel project(const Vec3& p) const { return ego::project(cam, p); }
};

struct FisheyeKernel {
  const FisheyeCamera& cam;
  double cos_half_fov;
  bool visible(const Vec3& p) const {
    const double n = p.norm();
    return n > 1e-9 && p.z() >= cos_half_fov * n;
  }
  double depth(const Vec3& p) const { return p.norm(); }
  Pixel project(const Vec3& p) const { return ego::project(cam, p); }
};

template <typename Kernel>
void integrate_with(TsdfVolume& vol, const DepthMap& depth, const Kernel& kern, const Pose& T_w_cam) {
  const VoxelGrid& g = vol.grid;
  const Pose T_cam_grid = T_w_cam.inverse() * g.T_w_grid;
  const Mat3& R = T_cam_grid.rotation.matrix();
  const Vec3 step_k = R.col(0) * g.voxel_size;
  const double trunc = vol.truncation;
  const size_t rows = static_cast<size_t>(g.D) * g.H;
  parallel_for(rows, [&](size_t begin, size_t end) {
    for (size_t r = begin; r < end; ++r) {
      const int i = static_cast<int>(r / g.H), j = static_cast<int>(r % g.H);
      Vec3 p = T_cam_grid * g.center_grid(i, j, 0);
      const size_t base = g.linear(i, j, 0);
      for (int k = 0; k < g.W; ++k, p += step_k) {
        if (!kern.visible(p)) continue;
        const Pixel px = kern.project(p);
        if (!px.valid) continue;
        const int col = std::min(static_cast<int>(px.u), depth.width - 1);
        const int row = std::min(static_cast<int>(px.v), depth.height - 1);
        const float d = depth.at(col, row);
        if (!DepthMap::is_valid_depth(d)) continue;
        const double sdf = static_cast<double>(d) - kern.depth(p);
        if (sdf < -trunc) continue;
        const double t = std::min(1.0, sdf / trunc);
        double& w = vol.weights.data[base + k];
        double& v = vol.tsdf.data[base + k];
        v = (v * w + t) / (w + 1.0);
        w = std::min(w + 1.0, kMaxTsdfWeight);
      }
    }
  });
}

}  // namespace

void integrate_depth_inplace(TsdfVolume& vol, const DepthMap& depth, const Camera& cam, const Pose& T_w_cam) {
  if (depth.width != width_of(cam) || depth.height != height_of(cam)) {
    fail(ErrorCode::kShapeMismatch, "depth map size does not match camera");
  }
  if (const auto* pin = std::get_if<PinholeCamera>(&cam)) {
    integrate_with(vol, depth, PinholeKernel{*pin}, T_w_cam);
  } else {
    const auto& fe = std::get<FisheyeCamera>(cam);
    integrate_with(vol, depth, FisheyeKernel{fe, std::cos(std::min(fisheye_half_fov(fe), 3.14159))}, T_w_cam);
  }
}

TsdfVolume integrate_depth(TsdfVolume vol, const DepthMap& depth, const Camera& cam, const Pose& T_w_cam) {
  integrate_depth_inplace(vol, depth, cam, T_w_cam);
  return vol;
}

size_t count_out_of_extent(const VoxelGrid& grid, const DepthMap& depth, const Camera& cam, const Pose& T_w_cam) {
  if (depth.width != width_of(cam) || depth.height != height_of(cam)) {
    fail(ErrorCode::kShapeMismatch, "depth map size differs from the camera");
  }
  size_t out = 0;
  for (int row = 0; row < depth.height; ++row)
    for (int col = 0; col < depth.width; ++col) {
      const float d = depth.at(col, row);
      if (!DepthMap::is_valid_depth(d)) continue;
      const Vec3 p = T_w_cam * unproject(cam, Pixel{col + 0.5, row + 0.5, true}, d);
      out += !grid.locate(p).has_value();
    }
  return out;
}

void integrate_occupancy_inplace(OccupancyVolume& global, const DenseVolume& local_occ, const VoxelGrid& local_grid) {
  if (!local_occ.same_shape(local_grid.D, local_grid.H, local_grid.W)) {
    fail(ErrorCode::kShapeMismatch, "local occupancy does not match its grid");
  }
  const VoxelGrid& g = global.grid;
  // Global index-space bounds of the local grid's corners.
  Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
  const Vec3 half(0.5 * local_grid.W, 0.5 * local_grid.H, 0.5 * local_grid.D);
  for (int c = 0; c < 8; ++c) {
    const Vec3 s((c & 1) ? 1 : -1, (c & 2) ? 1 : -1, (c & 4) ? 1 : -1);
    const Vec3 corner = local_grid.T_w_grid * Vec3(s.cwiseProduct(half) * local_grid.voxel_size);
    const Vec3 ic = g.to_index_coords(corner);
    lo = lo.cwiseMin(ic);
    hi = hi.cwiseMax(ic);
  }
  const int k0 = std::max(0, static_cast<int>(std::floor(lo.x()))), k1 = std::min(g.W - 1, static_cast<int>(std::ceil(hi.x())));
  const int j0 = std::max(0, static_cast<int>(std::floor(lo.y()))), j1 = std::min(g.H - 1, static_cast<int>(std::ceil(hi.y())));
  const int i0 = std::max(0, static_cast<int>(std::floor(lo.z()))), i1 = std::min(g.D - 1, static_cast<int>(std::ceil(hi.z())));
  if (k0 > k1 || j0 > j1 || i0 > i1) return;
  const size_t nj = static_cast<size_t>(j1 - j0 + 1);
  const size_t rows = static_cast<size_t>(i1 - i0 + 1) * nj;
  parallel_for(rows, [&](size_t begin, size_t end) {
    for (size_t r = begin; r < end; ++r) {
      const int i = i0 + static_cast<int>(r / nj), j = j0 + static_cast<int>(r % nj);
      for (int k = k0; k <= k1; ++k) {
        const auto s = trilinear_sample(local_occ, local_grid, g.center_world(i, j, k));
        if (!s) continue;
        const size_t idx = g.linear(i, j, k);
        std::int32_t& n = global.counts.data[idx];
        double& o = global.occ.data[idx];
        o = std::clamp((o * n + *s) / (n + 1.0), 0.0, 1.0);
        ++n;
      }
    }
  });
}

OccupancyVolume integrate_occupancy(OccupancyVolume global, const DenseVolume& local_occ, const VoxelGrid& local_grid) {
  integrate_occupancy_inplace(global, local_occ, local_grid);
  return global;
}

namespace {

// Corner offsets in (x, y, z) = (k, j, i) and the corners each edge joins.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeCorners[12][2] = {{0, 1}, {1, 2}, {3, 2}, {0, 3}, {4, 5}, {5, 6},
                                     {7, 6}, {4, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

}  // namespace

TriangleMesh marching_cubes(const DenseVolume& values, const DenseVolume& counts, double iso, double min_obs,
                            const VoxelGrid& grid) {
  if (!values.same_shape(grid.D, grid.H, grid.W) || !counts.same_shape(values)) {
    fail(ErrorCode::kShapeMismatch, "marching cubes inputs do not match the grid");
  }
  TriangleMesh mesh;
  // Edge key: base corner linear index * 3 + axis (0 = x, 1 = y, 2 = z).
  std::unordered_map<std::uint64_t, std::int32_t> edge_vertex;
  const double min_area2 = 1e-24 * std::pow(grid.voxel_size, 4);
  for (int i = 0; i + 1 < grid.D; ++i) {
    for (int j = 0; j + 1 < grid.H; ++j) {
      for (int k = 0; k + 1 < grid.W; ++k) {
        double f[8];
        size_t lin[8];
        bool ok = true;
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          lin[c] = grid.linear(i + kCorner[c][2], j + kCorner[c][1], k + kCorner[c][0]);
          if (counts.data[lin[c]] < min_obs || !std::isfinite(values.data[lin[c]])) {
            ok = false;
            break;
          }
          f[c] = values.data[lin[c]];
          if (f[c] < iso) cube |= 1 << c;
        }
        if (!ok || cube == 0 || cube == 255) continue;
        std::int32_t vid[12];
        for (int e = 0; e < 12; ++e) {
          if (!(mc::edge_table[cube] & (1 << e))) continue;
          const int a = kEdgeCorners[e][0], b = kEdgeCorners[e][1];
          int axis = 0;
          while (kCorner[a][axis] == kCorner[b][axis]) ++axis;
          const std::uint64_t key = static_cast<std::uint64_t>(lin[a]) * 3 + axis;
          auto [it, inserted] = edge_vertex.try_emplace(key, static_cast<std::int32_t>(mesh.vertices.size()));
          if (inserted) {
            const double t = (iso - f[a]) / (f[b] - f[a]);
            const Vec3 pa = grid.center_grid(i + kCorner[a][2], j + kCorner[a][1], k + kCorner[a][0]);
            const Vec3 pb = grid.center_grid(i + kCorner[b][2], j + kCorner[b][1], k + kCorner[b][0]);
            mesh.vertices.push_back(grid.T_w_grid * (pa + t * (pb - pa)));
          }
          vid[e] = it->second;
        }
        for (int t = 0; mc::tri_table[cube][t] != -1; t += 3) {
          const std::array<std::int32_t, 3> face{vid[mc::tri_table[cube][t]], vid[mc::tri_table[cube][t + 2]],
                                                 vid[mc::tri_table[cube][t + 1]]};
          const Vec3& p0 = mesh.vertices[face[0]];
          const double a2 = (mesh.vertices[face[1]] - p0).cross(mesh.vertices[face[2]] - p0).squaredNorm();
          if (a2 > min_area2) mesh.faces.push_back(face);
        }
      }
    }
  }
  return mesh;
}

TriangleMesh extract_mesh(const TsdfVolume& vol, int min_obs) {
  return marching_cubes(vol.tsdf, vol.weights, kTsdfIso, min_obs, vol.grid);
}

TriangleMesh extract_mesh(const OccupancyVolume& vol, int min_obs) {
  // Occupied is inside: flip the sign so "below iso" means occupied.
  DenseVolume neg = vol.occ;
  for (double& x : neg.data) x = -x;
  DenseVolume counts(vol.grid.D, vol.grid.H, vol.grid.W);
  for (size_t n = 0; n < counts.data.size(); ++n) counts.data[n] = vol.counts.data[n];
  return marching_cubes(neg, counts, -kOccupancyIso, min_obs, vol.grid);
}

}  // namespace ego
