#pragma once

// File formats for every artifact the pipeline exchanges. Each format carries
// a version; readers throw VersionMismatch for unknown versions and ParseError
// (with a line number or byte offset) for malformed or truncated input.
//
//   trajectory   CSV: "# ego trajectory v1", header, rows t,tx,ty,tz,qw,qx,qy,qz
//   calibration  JSON object with "version" and "model" (pinhole | fisheye)
//   depth        16-byte header "DPT1%5d %5d\n" (width, height), then float32 LE
//   mesh, points PLY binary little-endian, double coordinates
//   boxes        JSON lines, one box per line
//   volumes      text header ending in "end\n", then float64 LE, C x D x H x W

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ego/camera.hpp"
#include "ego/image.hpp"
#include "ego/mesh.hpp"
#include "ego/obb.hpp"
#include "ego/scenegen.hpp"
#include "ego/voxel.hpp"
#include "ego/volume.hpp"

namespace ego {

namespace fs = std::filesystem;

inline constexpr int kFormatVersion = 1;

/// Shortest decimal that round-trips to the same double.
std::string format_double(double x);

void write_trajectory(const fs::path& path, const std::vector<TimedPose>& traj);
/// Also rejects timestamps that are not strictly increasing.
std::vector<TimedPose> read_trajectory(const fs::path& path);

void write_calibration(const fs::path& path, const Camera& cam);
Camera read_calibration(const fs::path& path);

void write_depth(const fs::path& path, const DepthMap& depth);
DepthMap read_depth(const fs::path& path);

void write_mesh_ply(const fs::path& path, const TriangleMesh& mesh);
TriangleMesh read_mesh_ply(const fs::path& path);

void write_points_ply(const fs::path& path, const PointCloudWithVisibility& pc);
PointCloudWithVisibility read_points_ply(const fs::path& path);

/// A box with its timestamp; tracks additionally carry id and observation count.
struct ObbRecord {
  double t = 0.0;
  Obb3 obb;
  int id = -1;  // -1: not a track
  int n = 0;
};

std::string obb_to_json_line(const ObbRecord& rec);
ObbRecord obb_from_json_line(const std::string& line, size_t line_no = 0);
void write_obbs_jsonl(const fs::path& path, const std::vector<ObbRecord>& recs);
std::vector<ObbRecord> read_obbs_jsonl(const fs::path& path);

struct VolumeFile {
  VoxelGrid grid;
  int channels = 1;
  std::vector<double> data;  // C x D x H x W

  DenseVolume channel(int c) const;
};

void write_volume(const fs::path& path, const VoxelGrid& grid, int channels, const std::vector<double>& data);
void write_volume(const fs::path& path, const VoxelGrid& grid, const DenseVolume& vol);
void write_volume(const fs::path& path, const VoxelGrid& grid, const FeatureVolume& vol);
VolumeFile read_volume(const fs::path& path);

/// Ties one simulated sequence together. Paths are stored relative to the
/// manifest's directory and resolved to absolute paths on load.
struct SequenceManifest {
  fs::path dir;
  std::uint64_t seed = 0;
  double rate = 10.0;
  Vec3 room = Vec3(4.0, 4.0, 3.0);
  std::vector<std::string> classes;
  fs::path calibration, trajectory, points, gt_mesh, gt_obbs;
  std::vector<fs::path> depth;  // one per trajectory pose

  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : dir / p; }
};

void write_manifest(const fs::path& path, const SequenceManifest& m);
/// Throws IoError if a referenced file is missing.
SequenceManifest read_manifest(const fs::path& path);

/// Writes text to a file, byte for byte.
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace ego
