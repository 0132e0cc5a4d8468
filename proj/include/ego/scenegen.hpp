#pragma once

// Synthetic scenes: shoebox rooms with floor-standing boxes, smooth
// egocentric trajectories, ray-cast depth, semi-dense points, jittered
// detections and an analytic occupancy field.
//
// Rooms span x, y in [-sx/2, sx/2] and z in [0, sz]; z is up. Cameras use
// x right, y down, z forward.

#include <cstdint>
#include <string>
#include <vector>

#include "ego/camera.hpp"
#include "ego/image.hpp"
#include "ego/mesh.hpp"
#include "ego/obb.hpp"
#include "ego/rng.hpp"
#include "ego/voxel.hpp"

namespace ego {

struct DetectionNoise {
  double sigma_c = 0.10;   // center, m, per axis
  double sigma_s = 0.10;   // dims, m, per axis
  double sigma_y = 0.1745329251994330;  // yaw, rad (10 degrees)
  double fp_rate = 0.10;   // expected false positives per visible box
  double score_min = 0.5, score_max = 1.0;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  Vec3 room{4.0, 4.0, 3.0};
  int min_boxes = 8, max_boxes = 8;
  std::vector<std::string> classes{"chair", "table", "sofa", "bed", "cabinet", "shelf"};
  double min_dim = 0.3, max_dim = 1.0, max_height = 1.2;
  double wall_gap = 0.1;  // minimum box-to-wall and box-to-box clearance, m
  double point_sigma = 0.0;
  int semidense_points = 20000;
  double edge_fraction = 0.7;
  double edge_band = 0.1;
  DetectionNoise det_noise;

  int num_classes() const { return static_cast<int>(classes.size()); }
  void validate() const;
};

inline constexpr int kPlacementAttempts = 1000;
inline constexpr double kEyeHeight = 1.5;

struct Scene {
  Vec3 room = Vec3(4.0, 4.0, 3.0);
  TriangleMesh room_mesh;
  std::vector<Obb3> obbs;
  std::vector<std::string> classes;

  /// Room plus every box surface in one mesh.
  TriangleMesh mesh() const;
};

/// Closed box surface with outward-facing triangles.
TriangleMesh box_mesh(const Vec3& center, double yaw, const Vec3& dims);
/// Interior room surface (normals facing inward).
TriangleMesh room_mesh(const Vec3& room);

/// Throws PlacementFailure when a box cannot be placed within the attempt cap.
Scene generate_scene(const SceneSpec& spec);

struct TimedPose {
  double t = 0.0;
  Pose T_w_cam;
};

struct TrajectoryLimits {
  double speed = 0.5;              // m/s
  double max_yaw_rate = 1.0;       // rad/s
  double wall_margin = 0.6;        // m
  double pitch_mean = -0.35;       // rad, looking slightly down
  double pitch_amplitude = 0.15;   // rad; |pitch| stays below 30 degrees
};

/// floor(duration * rate) poses at t = n / rate.
std::vector<TimedPose> simulate_trajectory(const Scene& scene, std::uint64_t seed, double duration,
                                           double rate = 10.0, const TrajectoryLimits& lim = {});

/// Camera pose looking along `forward` (roll-free).
Pose look_pose(const Vec3& eye, double yaw, double pitch);

/// Fisheye preset for synthetic data: square image, ~150 degree field of view.
FisheyeCamera synthetic_fisheye(int size);

class SceneRenderer {
 public:
  explicit SceneRenderer(const Scene& scene);
  explicit SceneRenderer(const TriangleMesh& mesh);

  /// Nearest-surface depth per pixel (camera depth convention); 0 where the
  /// ray misses or the pixel is outside the camera's valid area.
  DepthMap render(const Camera& cam, const Pose& T_w_cam) const;
  /// True if the segment from `eye` to `p` is unobstructed up to `tol`.
  bool visible(const Vec3& eye, const Vec3& p, double tol = 1e-4) const;
  const TriangleBvh& bvh() const { return bvh_; }

 private:
  TriangleBvh bvh_;
};

DepthMap render_depth(const Scene& scene, const Camera& cam, const Pose& T_w_cam);

/// Visibility-filtered, edge-biased surface samples with Gaussian noise.
PointCloudWithVisibility sample_semidense(const Scene& scene, const std::vector<TimedPose>& traj,
                                          const Camera& cam, const SceneSpec& spec);

/// Indices of boxes with at least one unoccluded surface probe in any frame.
std::vector<int> visible_boxes(const Scene& scene, const SceneRenderer& renderer, const Camera& cam,
                               const std::vector<Pose>& frames);

/// One detection per given box (jittered, class kept, one-hot probabilities)
/// plus Poisson false positives on the floor. Scores are uniform in range.
std::vector<Obb3> jitter_detections(const std::vector<Obb3>& boxes, const Scene& scene, const DetectionNoise& noise,
                                    Rng& rng);

/// Detections for one snippet, stamped with the snippet's last frame time.
struct SnippetDetections {
  double t = 0.0;
  int last_frame = 0;
  std::vector<int> visible;  // indices into scene.obbs
  std::vector<Obb3> dets;
};

/// Splits the trajectory into consecutive snippets of `frames_per_snippet`
/// poses (a trailing partial snippet is dropped). Without noise, each snippet
/// reports exactly its visible boxes with score 1.
std::vector<SnippetDetections> simulate_detections(const Scene& scene, const std::vector<TimedPose>& traj,
                                                   const Camera& cam, int frames_per_snippet,
                                                   const DetectionNoise* noise, std::uint64_t seed);

/// Signed distance to the scene solid: positive in free space.
double scene_signed_distance(const Scene& scene, const Vec3& p);

/// clamp(0.5 - sd / (2 delta), 0, 1) at every voxel center.
DenseVolume occupancy_oracle(const Scene& scene, const VoxelGrid& grid, double delta);

}  // namespace ego
