#include "ego/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ego/error.hpp"
#include "ego/parallel.hpp"

namespace ego {

namespace {

constexpr double kPi = std::numbers::pi;

// Corner index bits: x (1), y (2), z (4). Each quad is listed counter-clockwise
// seen from outside.
constexpr int kBoxFaces[12][3] = {{0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}, {0, 1, 5}, {0, 5, 4},
                                  {2, 6, 7}, {2, 7, 3}, {0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6}};

// Salts separating the random streams derived from one scene seed.
constexpr std::uint64_t kSaltSemidense = 0x5e3d'0001;

bool footprints_overlap(const Obb3& a, const Obb3& b, double gap) {
  Obb3 ga = a, gb = b;
  ga.dims += Vec3(gap, gap, 0.0);
  gb.dims += Vec3(gap, gap, 0.0);
  // Both boxes touch the floor, so 3D overlap reduces to footprint overlap.
  return box_intersection(box_params(ga), box_params(gb)) > 0.0;
}

bool inside_room(const Obb3& b, const Vec3& room, double gap) {
  for (const Vec3& c : b.corners()) {
    if (std::abs(c.x()) > 0.5 * room.x() - gap || std::abs(c.y()) > 0.5 * room.y() - gap) return false;
    if (c.z() > room.z() + 1e-12) return false;
  }
  return true;
}

Obb3 random_floor_box(Rng& rng, const Vec3& room, double min_dim, double max_dim, double max_height, int label,
                      int num_classes) {
  const Vec3 dims(rng.uniform(min_dim, max_dim), rng.uniform(min_dim, max_dim),
                  rng.uniform(min_dim, std::min(max_height, room.z())));
  const double yaw = rng.uniform(-kPi, kPi);
  const Vec3 c(rng.uniform(-0.5, 0.5) * room.x(), rng.uniform(-0.5, 0.5) * room.y(), 0.5 * dims.z());
  return Obb3::make(c, yaw, dims, label, num_classes, 1.0);
}

}  // namespace

void SceneSpec::validate() const {
  if (!(room.minCoeff() > 0.0)) fail(ErrorCode::kInvalidArgument, "room extents must be positive");
  if (classes.empty()) fail(ErrorCode::kInvalidArgument, "need at least one class");
  if (min_boxes < 0 || max_boxes < min_boxes) fail(ErrorCode::kInvalidArgument, "invalid box count range");
  if (!(min_dim > 0.0 && max_dim >= min_dim && max_height >= min_dim)) {
    fail(ErrorCode::kInvalidArgument, "invalid box size range");
  }
  if (!(point_sigma >= 0.0 && edge_band > 0.0 && edge_fraction >= 0.0 && edge_fraction <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "invalid semi-dense sampling parameters");
  }
  if (semidense_points < 0) fail(ErrorCode::kInvalidArgument, "semi-dense point count must be non-negative");
  const auto& n = det_noise;
  if (!(n.sigma_c >= 0 && n.sigma_s >= 0 && n.sigma_y >= 0 && n.fp_rate >= 0 && n.score_min <= n.score_max)) {
    fail(ErrorCode::kInvalidArgument, "invalid detection noise parameters");
  }
}

TriangleMesh box_mesh(const Vec3& center, double yaw, const Vec3& dims) {
  const Rotation R = Rotation::about_z(yaw);
  TriangleMesh m;
  for (int c = 0; c < 8; ++c) {
    const Vec3 s((c & 1) ? 0.5 : -0.5, (c & 2) ? 0.5 : -0.5, (c & 4) ? 0.5 : -0.5);
    m.vertices.push_back(center + R * s.cwiseProduct(dims));
  }
  for (const auto& f : kBoxFaces) m.faces.push_back({f[0], f[1], f[2]});
  return m;
}

TriangleMesh room_mesh(const Vec3& room) {
  TriangleMesh m = box_mesh(Vec3(0.0, 0.0, 0.5 * room.z()), 0.0, room);
  for (auto& f : m.faces) std::swap(f[1], f[2]);
  return m;
}

TriangleMesh Scene::mesh() const {
  TriangleMesh m = room_mesh;
  for (const Obb3& b : obbs) m.append(box_mesh(b.center, b.yaw, b.dims));
  return m;
}

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Scene s;
  s.room = spec.room;
  s.room_mesh = room_mesh(spec.room);
  s.classes = spec.classes;
  const int count = spec.min_boxes + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_boxes - spec.min_boxes) + 1));
  for (int n = 0; n < count; ++n) {
    const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.num_classes())));
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      const Obb3 b = random_floor_box(rng, spec.room, spec.min_dim, spec.max_dim, spec.max_height, label,
                                      spec.num_classes());
      if (!inside_room(b, spec.room, spec.wall_gap)) continue;
      if (std::any_of(s.obbs.begin(), s.obbs.end(),
                      [&](const Obb3& o) { return footprints_overlap(o, b, spec.wall_gap); })) {
        continue;
      }
      s.obbs.push_back(b);
      placed = true;
    }
    if (!placed) fail(ErrorCode::kPlacementFailure, "could not place box " + std::to_string(n));
  }
  return s;
}

Pose look_pose(const Vec3& eye, double yaw, double pitch) {
  const Vec3 f(std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw), std::sin(pitch));
  const Vec3 right = f.cross(Vec3::UnitZ()).normalized();
  const Vec3 down = f.cross(right);
  Mat3 R;
  R << right, down, f;
  return Pose(Rotation::from_matrix_unchecked(R), eye);
}

std::vector<TimedPose> simulate_trajectory(const Scene& scene, std::uint64_t seed, double duration, double rate,
                                           const TrajectoryLimits& lim) {
  if (!(duration > 0.0) || !(rate > 0.0)) fail(ErrorCode::kInvalidArgument, "duration and rate must be positive");
  Rng rng(seed);
  const double ax = std::max(0.0, 0.5 * scene.room.x() - lim.wall_margin);
  const double ay = std::max(0.0, 0.5 * scene.room.y() - lim.wall_margin);
  const double eye_z = std::min(kEyeHeight, 0.8 * scene.room.z());
  auto random_point = [&] { return Vec2(rng.uniform(-ax, ax), rng.uniform(-ay, ay)); };
  Vec2 pos = random_point();
  Vec2 wp = random_point();
  double yaw = rng.uniform(-kPi, kPi);
  double phase = rng.uniform(0.0, 2.0 * kPi);
  const double dt = 1.0 / rate;
  const int n = static_cast<int>(std::floor(duration * rate + 1e-9));
  std::vector<TimedPose> out;
  out.reserve(static_cast<size_t>(n));
  for (int s = 0; s < n; ++s) {
    const double pitch = lim.pitch_mean + lim.pitch_amplitude * std::sin(phase);
    out.push_back({s * dt, look_pose(Vec3(pos.x(), pos.y(), eye_z), yaw, pitch)});
    for (int tries = 0; (wp - pos).norm() < 0.3 && tries < 16; ++tries) wp = random_point();
    const Vec2 to = wp - pos;
    const double err = wrap_angle(std::atan2(to.y(), to.x()) - yaw);
    const double max_turn = lim.max_yaw_rate * dt;
    yaw = wrap_angle(yaw + std::clamp(err, -max_turn, max_turn));
    const double v = lim.speed * std::max(0.0, std::cos(err));
    pos += v * dt * Vec2(std::cos(yaw), std::sin(yaw));
    pos = Vec2(std::clamp(pos.x(), -ax, ax), std::clamp(pos.y(), -ay, ay));
    phase += dt * rng.uniform(0.5, 1.5);
  }
  return out;
}

FisheyeCamera synthetic_fisheye(int size) {
  FisheyeCamera c;
  c.width = c.height = size;
  c.cx = c.cy = 0.5 * size;
  c.k = {-0.015, 0.002, 0.0, 0.0};
  c.valid_radius = 0.5 * size;
  const double half_fov = 75.0 * kPi / 180.0;
  c.fx = c.fy = c.valid_radius / c.distort(half_fov);
  return c;
}

SceneRenderer::SceneRenderer(const Scene& scene) : bvh_(scene.mesh()) {}
SceneRenderer::SceneRenderer(const TriangleMesh& mesh) : bvh_(mesh) {}

DepthMap SceneRenderer::render(const Camera& cam, const Pose& T_w_cam) const {
  const int W = width_of(cam), H = height_of(cam);
  DepthMap depth(W, H);
  const bool pinhole = std::holds_alternative<PinholeCamera>(cam);
  const FisheyeCamera* fe = std::get_if<FisheyeCamera>(&cam);
  const Mat3& R = T_w_cam.rotation.matrix();
  parallel_for(static_cast<size_t>(H), [&](size_t r0, size_t r1) {
    for (size_t row = r0; row < r1; ++row) {
      for (int col = 0; col < W; ++col) {
        const Pixel px{col + 0.5, row + 0.5, true};
        if (fe && std::hypot(px.u - fe->cx, px.v - fe->cy) > fe->valid_radius) continue;
        const Vec3 ray = pixel_ray(cam, px);
        const auto hit = bvh_.raycast(T_w_cam.translation, R * ray);
        if (!hit) continue;
        depth.at(col, static_cast<int>(row)) = static_cast<float>(pinhole ? hit->t * ray.z() : hit->t);
      }
    }
  });
  return depth;
}

bool SceneRenderer::visible(const Vec3& eye, const Vec3& p, double tol) const {
  const Vec3 d = p - eye;
  const double dist = d.norm();
  if (dist <= tol) return true;
  return !bvh_.raycast(eye, d / dist, 1e-9, dist - tol);
}

DepthMap render_depth(const Scene& scene, const Camera& cam, const Pose& T_w_cam) {
  return SceneRenderer(scene).render(cam, T_w_cam);
}

namespace {

struct EdgeSource {
  Vec3 center;
  double yaw;
  Vec3 dims;
};

// Point on a surface adjacent to a random edge, at most `band` from the edge.
Vec3 sample_near_edge(const EdgeSource& s, double band, Rng& rng) {
  const Vec3 h = 0.5 * s.dims;
  const double pick = rng.uniform() * (h.x() + h.y() + h.z());
  const int a = pick < h.x() ? 0 : (pick < h.x() + h.y() ? 1 : 2);
  const int b = (a + 1) % 3, c = (a + 2) % 3;
  const double sb = rng.uniform() < 0.5 ? -1.0 : 1.0, sc = rng.uniform() < 0.5 ? -1.0 : 1.0;
  Vec3 local;
  local[a] = rng.uniform(-h[a], h[a]);
  local[b] = sb * h[b];
  local[c] = sc * h[c];
  // Slide into one of the two faces meeting at the edge.
  const int slide = rng.uniform() < 0.5 ? b : c;
  const double dist = rng.uniform() * std::min(band, 2.0 * h[slide]);
  local[slide] -= (slide == b ? sb : sc) * dist;
  return s.center + Rotation::about_z(s.yaw) * local;
}

}  // namespace

PointCloudWithVisibility sample_semidense(const Scene& scene, const std::vector<TimedPose>& traj, const Camera& cam,
                                          const SceneSpec& spec) {
  spec.validate();
  if (traj.empty()) fail(ErrorCode::kInvalidArgument, "semi-dense sampling needs a trajectory");
  Rng rng(spec.seed ^ kSaltSemidense);
  const SceneRenderer renderer(scene);
  const TriangleMesh& mesh = renderer.bvh().mesh();

  std::vector<EdgeSource> sources{{Vec3(0.0, 0.0, 0.5 * scene.room.z()), 0.0, scene.room}};
  for (const Obb3& b : scene.obbs) sources.push_back({b.center, b.yaw, b.dims});
  std::vector<double> edge_cdf, area_cdf;
  double edge_total = 0.0, area_total = 0.0;
  for (const auto& s : sources) edge_cdf.push_back(edge_total += s.dims.sum());
  for (size_t f = 0; f < mesh.faces.size(); ++f) area_cdf.push_back(area_total += mesh.face_area(f));

  std::vector<Pose> T_cw;
  PointCloudWithVisibility pc;
  for (const auto& tp : traj) {
    T_cw.push_back(tp.T_w_cam.inverse());
    pc.cameras.push_back(tp.T_w_cam.translation);
  }
  const long long cap = 50LL * spec.semidense_points + 1000;
  for (long long attempt = 0; attempt < cap && static_cast<int>(pc.points.size()) < spec.semidense_points;
       ++attempt) {
    Vec3 p;
    if (rng.uniform() < spec.edge_fraction) {
      const double pick = rng.uniform() * edge_total;
      const size_t s = std::min<size_t>(std::upper_bound(edge_cdf.begin(), edge_cdf.end(), pick) - edge_cdf.begin(),
                                        sources.size() - 1);
      p = sample_near_edge(sources[s], spec.edge_band, rng);
    } else {
      const double pick = rng.uniform() * area_total;
      const size_t f = std::min<size_t>(std::upper_bound(area_cdf.begin(), area_cdf.end(), pick) - area_cdf.begin(),
                                        mesh.faces.size() - 1);
      const double r1 = std::sqrt(rng.uniform()), r2 = rng.uniform();
      const auto [a, b, c] = mesh.triangle(f);
      p = (1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c;
    }
    std::vector<std::uint32_t> obs;
    for (size_t f = 0; f < traj.size(); ++f) {
      if (!project(cam, T_cw[f] * p).valid) continue;
      if (renderer.visible(pc.cameras[f], p)) obs.push_back(static_cast<std::uint32_t>(f));
    }
    if (obs.empty()) continue;
    if (spec.point_sigma > 0.0) {
      p += Vec3(rng.normal(), rng.normal(), rng.normal()) * spec.point_sigma;
    }
    pc.points.push_back(p);
    pc.observers.push_back(std::move(obs));
  }
  return pc;
}

std::vector<int> visible_boxes(const Scene& scene, const SceneRenderer& renderer, const Camera& cam,
                               const std::vector<Pose>& frames) {
  std::vector<Pose> T_cw;
  for (const Pose& T : frames) T_cw.push_back(T.inverse());
  std::vector<int> out;
  for (size_t bi = 0; bi < scene.obbs.size(); ++bi) {
    const Obb3& b = scene.obbs[bi];
    const Rotation R = Rotation::about_z(b.yaw);
    const Vec3 h = 0.5 * b.dims;
    bool seen = false;
    for (int axis = 0; axis < 3 && !seen; ++axis) {
      for (double sgn : {-1.0, 1.0}) {
        if (seen) break;
        Vec3 n_local = Vec3::Zero();
        n_local[axis] = sgn;
        const Vec3 normal = R * n_local;
        const int u = (axis + 1) % 3, v = (axis + 2) % 3;
        for (int probe = 0; probe < 5 && !seen; ++probe) {
          Vec3 local = Vec3::Zero();
          local[axis] = sgn * h[axis];
          if (probe > 0) {
            local[u] = ((probe & 1) ? 0.8 : -0.8) * h[u];
            local[v] = ((probe & 2) ? 0.8 : -0.8) * h[v];
          }
          const Vec3 p = b.center + R * local;
          for (size_t f = 0; f < frames.size() && !seen; ++f) {
            const Vec3& eye = frames[f].translation;
            if (normal.dot(eye - p) <= 0.0) continue;
            if (!project(cam, T_cw[f] * p).valid) continue;
            seen = renderer.visible(eye, p);
          }
        }
      }
    }
    if (seen) out.push_back(static_cast<int>(bi));
  }
  return out;
}

std::vector<Obb3> jitter_detections(const std::vector<Obb3>& boxes, const Scene& scene, const DetectionNoise& noise,
                                    Rng& rng) {
  std::vector<Obb3> out;
  const int k = std::max<int>(1, static_cast<int>(scene.classes.size()));
  for (const Obb3& b : boxes) {
    Obb3 d = b;
    d.center += Vec3(rng.normal(), rng.normal(), rng.normal()) * noise.sigma_c;
    for (int a = 0; a < 3; ++a) d.dims[a] = std::max(0.05, b.dims[a] + rng.normal(0.0, noise.sigma_s));
    d.yaw = wrap_angle(b.yaw + rng.normal(0.0, noise.sigma_y));
    d.score = rng.uniform(noise.score_min, noise.score_max);
    out.push_back(std::move(d));
  }
  const int fps = rng.poisson(noise.fp_rate * static_cast<double>(boxes.size()));
  for (int f = 0; f < fps; ++f) {
    const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    Obb3 d = random_floor_box(rng, scene.room, 0.3, 1.0, 1.2, label, k);
    d.score = rng.uniform(noise.score_min, noise.score_max);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<SnippetDetections> simulate_detections(const Scene& scene, const std::vector<TimedPose>& traj,
                                                   const Camera& cam, int frames_per_snippet,
                                                   const DetectionNoise* noise, std::uint64_t seed) {
  if (frames_per_snippet < 1) fail(ErrorCode::kInvalidArgument, "snippets need at least one frame");
  const SceneRenderer renderer(scene);
  Rng rng(seed);
  std::vector<SnippetDetections> out;
  for (size_t start = 0; start + frames_per_snippet <= traj.size(); start += frames_per_snippet) {
    SnippetDetections s;
    s.last_frame = static_cast<int>(start) + frames_per_snippet - 1;
    s.t = traj[s.last_frame].t;
    std::vector<Pose> frames;
    for (int f = 0; f < frames_per_snippet; ++f) frames.push_back(traj[start + f].T_w_cam);
    s.visible = visible_boxes(scene, renderer, cam, frames);
    std::vector<Obb3> boxes;
    for (int i : s.visible) boxes.push_back(scene.obbs[i]);
    if (noise) {
      s.dets = jitter_detections(boxes, scene, *noise, rng);
    } else {
      s.dets = boxes;
      for (Obb3& b : s.dets) b.score = 1.0;
    }
    out.push_back(std::move(s));
  }
  return out;
}

double scene_signed_distance(const Scene& scene, const Vec3& p) {
  const Vec3 h = 0.5 * scene.room;
  double sd = std::min({p.x() + h.x(), h.x() - p.x(), p.y() + h.y(), h.y() - p.y(), p.z(), scene.room.z() - p.z()});
  for (const Obb3& b : scene.obbs) {
    const Vec3 local = Rotation::about_z(b.yaw).inverse() * (p - b.center);
    const Vec3 q = local.cwiseAbs() - 0.5 * b.dims;
    const double box_sd = q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
    sd = std::min(sd, box_sd);
  }
  return sd;
}

DenseVolume occupancy_oracle(const Scene& scene, const VoxelGrid& grid, double delta) {
  if (!(delta > 0.0)) fail(ErrorCode::kInvalidArgument, "occupancy band must be positive");
  DenseVolume occ(grid.D, grid.H, grid.W);
  for (size_t v = 0; v < grid.voxel_count(); ++v) {
    const VoxelIndex idx = grid.unravel(v);
    const double sd = scene_signed_distance(scene, grid.center_world(idx.i, idx.j, idx.k));
    occ.data[v] = std::clamp(0.5 - sd / (2.0 * delta), 0.0, 1.0);
  }
  return occ;
}

}  // namespace ego
