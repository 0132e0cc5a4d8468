// Command-line front end: one binary with a subcommand per pipeline stage.
// Every subcommand is a pure function of its flags, input files and seeds.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ego/error.hpp"
#include "ego/fusion.hpp"
#include "ego/gradcheck.hpp"
#include "ego/io.hpp"
#include "ego/metrics.hpp"
#include "ego/scenegen.hpp"
#include "ego/tracker.hpp"
#include "ego/voxel.hpp"

namespace {

using namespace ego;
using json = nlohmann::ordered_json;

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr int kMetricsSchemaVersion = 1;

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string out;
  std::uint64_t seed = 0;
  double duration = 30.0;
  double rate = 10.0;
  std::string camera = "fisheye";
  int size = 256;
  int boxes = 8;
  double point_sigma = 0.0;
  int points = 20000;
  int snippet = 10;
  double sigma_c = DetectionNoise{}.sigma_c;
  double sigma_s = DetectionNoise{}.sigma_s;
  double sigma_y_deg = 10.0;
  double fp_rate = DetectionNoise{}.fp_rate;
};

Camera make_camera(const std::string& kind, int size) {
  const FisheyeCamera fe = synthetic_fisheye(size);
  if (kind == "fisheye") return fe;
  if (kind == "max-linear") return max_linear(fe, size, size);
  return scannet_linear();
}

std::string frame_name(size_t f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "depth/%06zu.dpt", f);
  return buf;
}

std::vector<ObbRecord> stamp(const std::vector<Obb3>& boxes, double t) {
  std::vector<ObbRecord> out;
  for (const Obb3& b : boxes) out.push_back({t, b});
  return out;
}

int run_simulate(const SimulateArgs& a) {
  SceneSpec spec;
  spec.seed = a.seed;
  spec.min_boxes = spec.max_boxes = a.boxes;
  spec.point_sigma = a.point_sigma;
  spec.semidense_points = a.points;
  spec.det_noise.sigma_c = a.sigma_c;
  spec.det_noise.sigma_s = a.sigma_s;
  spec.det_noise.sigma_y = a.sigma_y_deg * kDegToRad;
  spec.det_noise.fp_rate = a.fp_rate;
  spec.validate();

  const fs::path dir(a.out);
  fs::create_directories(dir / "depth");
  const Scene scene = generate_scene(spec);
  const auto traj = simulate_trajectory(scene, a.seed, a.duration, a.rate);
  if (traj.empty()) fail(ErrorCode::kInvalidArgument, "--duration * --rate yields no frames");
  const Camera cam = make_camera(a.camera, a.size);

  SequenceManifest m;
  m.dir = dir;
  m.seed = a.seed;
  m.rate = a.rate;
  m.room = scene.room;
  m.classes = scene.classes;
  m.calibration = "calibration.json";
  m.trajectory = "trajectory.csv";
  m.points = "points.ply";
  m.gt_mesh = "gt_mesh.ply";
  m.gt_obbs = "gt_obbs.jsonl";

  write_calibration(dir / m.calibration, cam);
  write_trajectory(dir / m.trajectory, traj);
  write_mesh_ply(dir / m.gt_mesh, scene.mesh());
  write_obbs_jsonl(dir / m.gt_obbs, stamp(scene.obbs, 0.0));

  const SceneRenderer renderer(scene);
  for (size_t f = 0; f < traj.size(); ++f) {
    m.depth.push_back(frame_name(f));
    write_depth(dir / m.depth.back(), renderer.render(cam, traj[f].T_w_cam));
  }
  write_points_ply(dir / m.points, sample_semidense(scene, traj, cam, spec));

  const auto noisy = simulate_detections(scene, traj, cam, a.snippet, &spec.det_noise, a.seed);
  const auto clean = simulate_detections(scene, traj, cam, a.snippet, nullptr, a.seed);
  std::vector<ObbRecord> dets, clean_dets, gt_snippets;
  for (size_t s = 0; s < noisy.size(); ++s) {
    for (auto& r : stamp(noisy[s].dets, noisy[s].t)) dets.push_back(r);
    for (auto& r : stamp(clean[s].dets, clean[s].t)) clean_dets.push_back(r);
    for (int i : noisy[s].visible) gt_snippets.push_back({noisy[s].t, scene.obbs[i]});
  }
  write_obbs_jsonl(dir / "detections.jsonl", dets);
  write_obbs_jsonl(dir / "detections_clean.jsonl", clean_dets);
  write_obbs_jsonl(dir / "gt_snippets.jsonl", gt_snippets);
  write_manifest(dir / "manifest.json", m);

  std::printf("simulated %zu frames, %zu boxes, %zu snippets into %s\n", traj.size(), scene.obbs.size(),
              noisy.size(), dir.string().c_str());
  return 0;
}

// ---------------------------------------------------------------- shared helpers

Scene scene_from_manifest(const SequenceManifest& m) {
  Scene s;
  s.room = m.room;
  s.room_mesh = room_mesh(m.room);
  s.classes = m.classes;
  for (const auto& r : read_obbs_jsonl(m.resolve(m.gt_obbs))) s.obbs.push_back(r.obb);
  return s;
}

// Index of the last pose with time <= t; throws if t precedes the sequence.
std::vector<Pose> poses_of(const std::vector<TimedPose>& traj) {
  std::vector<Pose> out;
  out.reserve(traj.size());
  for (const auto& p : traj) out.push_back(p.T_w_cam);
  return out;
}

size_t frame_at(const std::vector<TimedPose>& traj, double t) {
  const auto it = std::upper_bound(traj.begin(), traj.end(), t,
                                   [](double v, const TimedPose& p) { return v < p.t; });
  if (it == traj.begin()) fail(ErrorCode::kInvalidArgument, "time " + format_double(t) + " precedes the trajectory");
  return static_cast<size_t>(it - traj.begin()) - 1;
}

void emit_json(const std::string& path, const json& j) {
  const std::string text = j.dump(2) + "\n";
  if (path == "-") {
    std::cout << text;
  } else {
    write_text(path, text);
  }
}

json vec_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

// ---------------------------------------------------------------- fuse

struct FuseArgs {
  std::string manifest;
  std::string mode = "tsdf";
  double voxel = 0.04;
  double margin = 0.2;
  double extent = kDefaultExtent;
  int resolution = 96;
  int snippet = 10;
  int min_obs = -1;
  std::string out;
};

// World-aligned grid covering the room plus a margin on every side.
VoxelGrid room_grid(const Vec3& room, double voxel, double margin) {
  VoxelGrid g;
  g.voxel_size = voxel;
  g.W = static_cast<int>(std::ceil((room.x() + 2.0 * margin) / voxel));
  g.H = static_cast<int>(std::ceil((room.y() + 2.0 * margin) / voxel));
  g.D = static_cast<int>(std::ceil((room.z() + 2.0 * margin) / voxel));
  g.T_w_grid = Pose::from_translation(Vec3(0.0, 0.0, 0.5 * room.z()));
  return g;
}

int run_fuse(const FuseArgs& a) {
  const SequenceManifest m = read_manifest(a.manifest);
  const auto traj = read_trajectory(m.resolve(m.trajectory));
  if (traj.size() != m.depth.size()) fail(ErrorCode::kShapeMismatch, "manifest depth count differs from trajectory");
  const VoxelGrid grid = room_grid(m.room, a.voxel, a.margin);
  TriangleMesh mesh;
  if (a.mode == "tsdf") {
    const Camera cam = read_calibration(m.resolve(m.calibration));
    TsdfVolume vol = TsdfVolume::make(grid);
    size_t dropped = 0;
    for (size_t f = 0; f < traj.size(); ++f) {
      const DepthMap depth = read_depth(m.resolve(m.depth[f]));
      dropped += count_out_of_extent(grid, depth, cam, traj[f].T_w_cam);
      integrate_depth_inplace(vol, depth, cam, traj[f].T_w_cam);
    }
    if (dropped > 0) {
      std::fprintf(stderr, "warning: %zu depth samples fall outside the fusion volume and were dropped; raise --margin\n",
                   dropped);
    }
    mesh = extract_mesh(vol, a.min_obs < 0 ? kTsdfMinObs : a.min_obs);
  } else {
    // Per-snippet local predictions come from the analytic scene occupancy.
    const Scene scene = scene_from_manifest(m);
    OccupancyVolume vol = OccupancyVolume::make(grid);
    const double local_voxel = a.extent / a.resolution;
    const std::vector<Pose> poses = poses_of(traj);
    for (size_t f = static_cast<size_t>(a.snippet) - 1; f < traj.size(); f += static_cast<size_t>(a.snippet)) {
      const VoxelGrid local = anchor_grid_at(poses, f, GravityDir(), a.extent, a.resolution);
      integrate_occupancy_inplace(vol, occupancy_oracle(scene, local, local_voxel), local);
    }
    mesh = extract_mesh(vol, a.min_obs < 0 ? kOccupancyMinObs : a.min_obs);
  }
  write_mesh_ply(a.out, mesh);
  std::printf("fused %zu frames (%s): %zu vertices, %zu faces -> %s\n", traj.size(), a.mode.c_str(),
              mesh.vertices.size(), mesh.faces.size(), a.out.c_str());
  return 0;
}

// ---------------------------------------------------------------- track

struct TrackArgs {
  std::string manifest, detections, out;
  TrackerConfig cfg;
  double p_assoc = -1.0;  // negative: p_inst - 0.05
};

int run_track(TrackArgs a) {
  a.cfg.p_assoc = a.p_assoc < 0.0 ? std::max(0.0, a.cfg.p_inst - 0.05) : a.p_assoc;
  a.cfg.validate();
  const SequenceManifest m = read_manifest(a.manifest);
  const auto traj = read_trajectory(m.resolve(m.trajectory));
  const Camera cam = read_calibration(m.resolve(m.calibration));
  const auto recs = read_obbs_jsonl(a.detections);

  std::map<double, std::vector<Obb3>> by_time;
  for (const auto& r : recs) by_time[r.t].push_back(r.obb);
  SceneState scene;
  for (const auto& [t, dets] : by_time) scene = step(scene, dets, t, ViewContext{cam, traj[frame_at(traj, t)].T_w_cam}, a.cfg);

  std::vector<ObbRecord> out;
  for (const auto& tr : scene.tracks) out.push_back({scene.time, tr.obb, tr.id, tr.n});
  write_obbs_jsonl(a.out, out);
  std::printf("tracked %zu snippets: %zu objects -> %s\n", by_time.size(), out.size(), a.out.c_str());
  return 0;
}

// ---------------------------------------------------------------- eval-obb

struct EvalObbArgs {
  std::string pred, gt, json_out;
  bool per_snippet = false;
};

json detection_json(const DetectionMetrics& dm) {
  json j;
  j["map"] = dm.map;
  j["thresholds"] = vec_json(dm.thresholds);
  j["map_at"] = vec_json(dm.map_at());
  json pc = json::object();
  for (const auto& [c, ap] : dm.per_class_ap) pc[std::to_string(c)] = vec_json(ap);
  j["per_class_ap"] = pc;
  return j;
}

int run_eval_obb(const EvalObbArgs& a) {
  const auto pred = read_obbs_jsonl(a.pred);
  const auto gt = read_obbs_jsonl(a.gt);
  json report;
  report["version"] = kMetricsSchemaVersion;
  if (a.per_snippet) {
    std::map<double, std::pair<std::vector<Obb3>, std::vector<Obb3>>> groups;
    for (const auto& r : pred) groups[r.t].first.push_back(r.obb);
    for (const auto& r : gt) groups[r.t].second.push_back(r.obb);
    double sum = 0.0;
    int count = 0;
    json snippets = json::array();
    for (const auto& [t, g] : groups) {
      if (g.second.empty()) continue;  // no ground truth: mAP undefined
      const double map = average_precision(g.first, g.second).map;
      sum += map;
      ++count;
      snippets.push_back(json{{"t", t}, {"map", map}});
    }
    const double mean = count > 0 ? sum / count : 0.0;
    report["mode"] = "snippet";
    report["map"] = mean;
    report["snippets"] = snippets;
    std::printf("snippet mAP %s over %d snippets\n", format_double(mean).c_str(), count);
  } else {
    std::vector<Obb3> p, g;
    for (const auto& r : pred) p.push_back(r.obb);
    for (const auto& r : gt) g.push_back(r.obb);
    const DetectionMetrics dm = average_precision(p, g);
    report["mode"] = "sequence";
    report.update(detection_json(dm));
    std::printf("mAP %s\n", format_double(dm.map).c_str());
    const auto at = dm.map_at();
    for (size_t i = 0; i < at.size(); ++i)
      std::printf("  mAP@%s %s\n", format_double(dm.thresholds[i]).c_str(), format_double(at[i]).c_str());
  }
  if (!a.json_out.empty()) emit_json(a.json_out, report);
  return 0;
}

// ---------------------------------------------------------------- eval-surface

struct EvalSurfaceArgs {
  std::string pred, gt, json_out;
  int samples = kDefaultSurfaceSamples;
  double tau = kDefaultSurfaceTau;
  std::uint64_t seed = kDefaultSampleSeed;
};

int run_eval_surface(const EvalSurfaceArgs& a) {
  const SurfaceMetrics s = surface_metrics(read_mesh_ply(a.pred), read_mesh_ply(a.gt), a.samples, a.tau, a.seed);
  std::printf("acc %s\ncomp %s\nprec %s\nrecal %s\n", format_double(s.acc).c_str(), format_double(s.comp).c_str(),
              format_double(s.prec).c_str(), format_double(s.recal).c_str());
  if (!a.json_out.empty()) {
    json j;
    j["version"] = kMetricsSchemaVersion;
    j["tau"] = a.tau;
    j["samples"] = a.samples;
    j["acc"] = s.acc;
    j["comp"] = s.comp;
    j["prec"] = s.prec;
    j["recal"] = s.recal;
    emit_json(a.json_out, j);
  }
  return 0;
}

// ---------------------------------------------------------------- lift

struct LiftArgs {
  std::string manifest, out_dir;
  double time = 0.0;
  int frames = 10;
  double extent = kDefaultExtent;
  int resolution = 64;
  int freespace_samples = kDefaultFreespaceSamples;
};

int run_lift(const LiftArgs& a) {
  const SequenceManifest m = read_manifest(a.manifest);
  const auto traj = read_trajectory(m.resolve(m.trajectory));
  const Camera cam = read_calibration(m.resolve(m.calibration));
  const size_t last = frame_at(traj, a.time);
  const size_t first = last + 1 >= static_cast<size_t>(a.frames) ? last + 1 - static_cast<size_t>(a.frames) : 0;
  const VoxelGrid grid = anchor_grid_at(poses_of(traj), last, GravityDir(), a.extent, a.resolution);

  std::vector<LiftFrame> frames;
  for (size_t f = first; f <= last; ++f) {
    const DepthMap d = read_depth(m.resolve(m.depth[f]));
    FeatureImage img(1, d.width, d.height);
    for (size_t p = 0; p < d.data.size(); ++p) img.data[p] = d.data[p];
    frames.push_back({std::move(img), cam, traj[f].T_w_cam});
  }
  const FeatureVolume features = lift_features(grid, frames);

  // Keep points seen within the snippet, with observers restricted to it.
  const PointCloudWithVisibility all = read_points_ply(m.resolve(m.points));
  PointCloudWithVisibility pc;
  pc.cameras = all.cameras;
  for (size_t i = 0; i < all.points.size(); ++i) {
    std::vector<std::uint32_t> obs;
    for (std::uint32_t o : all.observers[i])
      if (o >= first && o <= last) obs.push_back(o);
    if (obs.empty()) continue;
    pc.points.push_back(all.points[i]);
    pc.observers.push_back(std::move(obs));
  }
  const MaskVolume pts = rasterize_points(grid, pc);
  const MaskVolume free = rasterize_freespace(grid, pc, a.freespace_samples);
  auto as_dense = [](const MaskVolume& mv) {
    DenseVolume d(mv.D, mv.H, mv.W);
    for (size_t i = 0; i < mv.size(); ++i) d.data[i] = mv.data[i];
    return d;
  };
  const fs::path out(a.out_dir);
  fs::create_directories(out);
  write_volume(out / "features.vol", grid, features);
  write_volume(out / "point_mask.vol", grid, as_dense(pts));
  write_volume(out / "freespace_mask.vol", grid, as_dense(free));
  std::printf("lifted frames %zu..%zu (%zu points) into %d^3 voxels -> %s\n", first, last, pc.points.size(),
              a.resolution, out.string().c_str());
  return 0;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  std::uint64_t seed = 0;
  int points = 100;
  std::string json_out;
};

int run_gradcheck_cmd(const GradcheckArgs& a) {
  bool ok = true;
  json j;
  j["version"] = kMetricsSchemaVersion;
  json checks = json::array();
  for (const auto& r : run_gradcheck(a.seed, a.points)) {
    ok = ok && r.passed();
    std::printf("%-16s %s  max rel error %.3e (tolerance %.0e, %d points)\n", r.name.c_str(),
                r.passed() ? "PASS" : "FAIL", r.max_rel_error, r.tolerance, r.points);
    checks.push_back(json{{"name", r.name}, {"points", r.points}, {"max_rel_error", r.max_rel_error},
                          {"tolerance", r.tolerance}, {"passed", r.passed()}});
  }
  j["checks"] = checks;
  j["passed"] = ok;
  if (!a.json_out.empty()) emit_json(a.json_out, j);
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Egocentric 3D perception toolkit: simulation, fusion, tracking and evaluation.\n"
               "Set EGO_NUM_THREADS to override the worker thread count."};
  app.require_subcommand(1);
  app.get_formatter()->column_width(44);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Generate a synthetic sequence directory");
  c_sim->add_option("--out", sim.out, "Output directory")->required();
  c_sim->add_option("--seed", sim.seed, "Scene, trajectory and noise seed")->capture_default_str();
  c_sim->add_option("--duration", sim.duration, "Trajectory length, s")->capture_default_str()->check(CLI::PositiveNumber);
  c_sim->add_option("--rate", sim.rate, "Frame rate, Hz (10 Hz snippets)")->capture_default_str()->check(CLI::PositiveNumber);
  c_sim->add_option("--camera", sim.camera, "Depth camera model")
      ->capture_default_str()
      ->check(CLI::IsMember({"fisheye", "max-linear", "scannet"}));
  c_sim->add_option("--size", sim.size, "Image width and height for fisheye/max-linear, px")
      ->capture_default_str()
      ->check(CLI::Range(16, 4096));
  c_sim->add_option("--boxes", sim.boxes, "Number of boxes in the room")->capture_default_str()->check(CLI::Range(0, 64));
  c_sim->add_option("--point-sigma", sim.point_sigma, "Semi-dense point noise, m")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  c_sim->add_option("--points", sim.points, "Semi-dense point count")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_sim->add_option("--snippet", sim.snippet, "Frames per detection snippet (1 s at 10 Hz)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_sim->add_option("--sigma-c", sim.sigma_c, "Detection center noise, m")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_sim->add_option("--sigma-s", sim.sigma_s, "Detection size noise, m")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_sim->add_option("--sigma-y", sim.sigma_y_deg, "Detection yaw noise, degrees")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  c_sim->add_option("--fp-rate", sim.fp_rate, "Expected false positives per visible box")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);

  FuseArgs fuse;
  auto* c_fuse = app.add_subcommand("fuse", "Fuse a sequence into a mesh (TSDF from depth, or occupancy)");
  c_fuse->add_option("--manifest", fuse.manifest, "Sequence manifest.json")->required()->check(CLI::ExistingFile);
  c_fuse->add_option("--mode", fuse.mode, "Fusion mode")->capture_default_str()->check(CLI::IsMember({"tsdf", "occupancy"}));
  c_fuse->add_option("--voxel", fuse.voxel, "Global voxel size, m (surface default 4 cm)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_fuse->add_option("--margin", fuse.margin, "Volume margin around the room, m")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  c_fuse->add_option("--extent", fuse.extent, "Occupancy mode: local volume extent, m")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_fuse->add_option("--resolution", fuse.resolution, "Occupancy mode: local voxels per side (96 at 4 m)")
      ->capture_default_str()
      ->check(CLI::Range(2, 512));
  c_fuse->add_option("--snippet", fuse.snippet, "Occupancy mode: frames per snippet")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_fuse->add_option("--min-obs", fuse.min_obs, "Minimum observations per cube corner (default: 2 tsdf, 5 occupancy)");
  c_fuse->add_option("--out", fuse.out, "Output mesh PLY")->required();

  TrackArgs track;
  auto* c_track = app.add_subcommand("track", "Fuse per-snippet detections into scene-level boxes");
  c_track->add_option("--manifest", track.manifest, "Sequence manifest.json")->required()->check(CLI::ExistingFile);
  c_track->add_option("--detections", track.detections, "Detections JSON lines")->required()->check(CLI::ExistingFile);
  c_track->add_option("--out", track.out, "Output tracks JSON lines")->required();
  c_track->add_option("--p-inst", track.cfg.p_inst, "Instantiation score threshold")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  c_track->add_option("--p-assoc", track.p_assoc, "Association score threshold (default p_inst - 0.05)")
      ->check(CLI::Range(0.0, 1.0));
  c_track->add_option("--iou-gate", track.cfg.iou_gate, "Match gate on 3D or 2D IoU")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  c_track->add_option("--n-min", track.cfg.n_min, "Observations needed to survive t_inst")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_track->add_option("--t-inst", track.cfg.t_inst, "Grace period before removal, s")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  c_track->add_option("--weights", track.cfg.w, "Cost weights: class, 2D center, 3D center, 2D IoU, 3D IoU")
      ->capture_default_str()
      ->expected(5);

  EvalObbArgs eobb;
  auto* c_eobb = app.add_subcommand("eval-obb", "Detection mAP over IoU thresholds 0.0..0.5");
  c_eobb->add_option("--pred", eobb.pred, "Predicted boxes JSON lines")->required()->check(CLI::ExistingFile);
  c_eobb->add_option("--gt", eobb.gt, "Ground-truth boxes JSON lines")->required()->check(CLI::ExistingFile);
  c_eobb->add_flag("--per-snippet", eobb.per_snippet, "Group by timestamp and average mAP over snippets");
  c_eobb->add_option("--json", eobb.json_out, "Also write the report as JSON ('-' for stdout)");

  EvalSurfaceArgs esurf;
  auto* c_esurf = app.add_subcommand("eval-surface", "Mesh accuracy, completeness, precision and recall");
  c_esurf->add_option("pred", esurf.pred, "Predicted mesh PLY")->required()->check(CLI::ExistingFile);
  c_esurf->add_option("gt", esurf.gt, "Ground-truth mesh PLY")->required()->check(CLI::ExistingFile);
  c_esurf->add_option("--samples", esurf.samples, "Surface samples per mesh")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_esurf->add_option("--tau", esurf.tau, "Precision/recall distance threshold, m")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_esurf->add_option("--seed", esurf.seed, "Sampling seed")->capture_default_str();
  c_esurf->add_option("--json", esurf.json_out, "Also write the report as JSON ('-' for stdout)");

  LiftArgs lift;
  auto* c_lift = app.add_subcommand("lift", "Lift a snippet into feature, point-mask and freespace volumes");
  c_lift->add_option("--manifest", lift.manifest, "Sequence manifest.json")->required()->check(CLI::ExistingFile);
  c_lift->add_option("--time", lift.time, "Snippet end time, s")->required();
  c_lift->add_option("--out-dir", lift.out_dir, "Output directory")->required();
  c_lift->add_option("--frames", lift.frames, "Frames per snippet")->capture_default_str()->check(CLI::PositiveNumber);
  c_lift->add_option("--extent", lift.extent, "Volume extent, m")->capture_default_str()->check(CLI::PositiveNumber);
  c_lift->add_option("--resolution", lift.resolution, "Voxels per side (64 at 4 m: 6.25 cm)")
      ->capture_default_str()
      ->check(CLI::Range(1, 512));
  c_lift->add_option("--freespace-samples", lift.freespace_samples, "Samples per camera-to-point segment")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Compare loss gradients against finite differences");
  c_gc->add_option("--seed", gc.seed, "Seed of the random probe points")->capture_default_str();
  c_gc->add_option("--points", gc.points, "Probe points per loss")->capture_default_str()->check(CLI::PositiveNumber);
  c_gc->add_option("--json", gc.json_out, "Also write the report as JSON ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (c_sim->parsed()) return run_simulate(sim);
    if (c_fuse->parsed()) return run_fuse(fuse);
    if (c_track->parsed()) return run_track(track);
    if (c_eobb->parsed()) return run_eval_obb(eobb);
    if (c_esurf->parsed()) return run_eval_surface(esurf);
    if (c_lift->parsed()) return run_lift(lift);
    if (c_gc->parsed()) return run_gradcheck_cmd(gc);
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(to_string(e.code())).c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
