#include <unistd.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "ego/io.hpp"
#include "test_util.hpp"

using namespace ego;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("ego_test_io_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

void truncate_file(const fs::path& p, size_t keep) {
  std::string s = read_text(p);
  s.resize(std::min(keep, s.size()));
  write_text(p, s);
}

void replace_in_file(const fs::path& p, const std::string& from, const std::string& to) {
  std::string s = read_text(p);
  const size_t at = s.find(from);
  REQUIRE(at != std::string::npos);
  s.replace(at, from.size(), to);
  write_text(p, s);
}

std::vector<TimedPose> random_trajectory(Rng& rng, int n) {
  std::vector<TimedPose> traj;
  for (int i = 0; i < n; ++i) traj.push_back({0.1 * i + rng.uniform(0, 0.01), ego::test::random_pose(rng)});
  return traj;
}

TriangleMesh random_mesh(Rng& rng) {
  TriangleMesh m;
  for (int i = 0; i < 30; ++i) m.vertices.push_back(ego::test::random_vec(rng, -3, 3));
  for (int f = 0; f < 40; ++f)
    m.faces.push_back({static_cast<std::int32_t>(rng.below(30)), static_cast<std::int32_t>(rng.below(30)),
                       static_cast<std::int32_t>(rng.below(30))});
  return m;
}

}  // namespace

TEST_CASE("format_double round-trips") {
  Rng rng(1);
  for (int n = 0; n < 1000; ++n) {
    const double x = rng.uniform(-1e6, 1e6) * std::pow(10.0, rng.uniform(-20, 20));
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(0.15) == "0.15");
  CHECK(format_double(1.0) == "1");
}

TEST_CASE("trajectory round trip and validation") {
  TempDir dir;
  Rng rng(2);
  const auto traj = random_trajectory(rng, 50);
  write_trajectory(dir / "t.csv", traj);
  const auto back = read_trajectory(dir / "t.csv");
  REQUIRE(back.size() == traj.size());
  for (size_t n = 0; n < traj.size(); ++n) {
    CHECK(back[n].t == traj[n].t);
    CHECK((back[n].T_w_cam.translation - traj[n].T_w_cam.translation).norm() <= 1e-12);
    CHECK((back[n].T_w_cam.rotation.matrix() - traj[n].T_w_cam.rotation.matrix()).norm() <= 1e-12);
  }

  auto swapped = traj;
  std::swap(swapped[3].t, swapped[4].t);
  write_trajectory(dir / "bad.csv", swapped);
  CHECK(ego::test::throws_code([&] { read_trajectory(dir / "bad.csv"); }, ErrorCode::kParseError));

  truncate_file(dir / "t.csv", read_text(dir / "t.csv").size() - 20);
  CHECK(ego::test::throws_code([&] { read_trajectory(dir / "t.csv"); }, ErrorCode::kParseError));

  write_trajectory(dir / "v.csv", traj);
  replace_in_file(dir / "v.csv", "trajectory v1", "trajectory v2");
  CHECK(ego::test::throws_code([&] { read_trajectory(dir / "v.csv"); }, ErrorCode::kVersionMismatch));
  CHECK(ego::test::throws_code([&] { read_trajectory(dir / "missing.csv"); }, ErrorCode::kIoError));
}

TEST_CASE("calibration round trip") {
  TempDir dir;
  const FisheyeCamera fe = synthetic_fisheye(128);
  write_calibration(dir / "fe.json", fe);
  const Camera back = read_calibration(dir / "fe.json");
  const auto* f = std::get_if<FisheyeCamera>(&back);
  REQUIRE(f != nullptr);
  CHECK(f->fx == fe.fx);
  CHECK(f->cy == fe.cy);
  CHECK(f->k == fe.k);
  CHECK(f->width == fe.width);
  CHECK(f->valid_radius == fe.valid_radius);

  const PinholeCamera ph{577.87, 577.87, 319.5, 239.5, 640, 480};
  write_calibration(dir / "ph.json", ph);
  const Camera pb = read_calibration(dir / "ph.json");
  const auto* p = std::get_if<PinholeCamera>(&pb);
  REQUIRE(p != nullptr);
  CHECK(p->fx == ph.fx);
  CHECK(p->height == ph.height);

  replace_in_file(dir / "ph.json", "\"version\": 1", "\"version\": 9");
  CHECK(ego::test::throws_code([&] { read_calibration(dir / "ph.json"); }, ErrorCode::kVersionMismatch));
  write_text(dir / "broken.json", "{\"version\":1,\"model\":");
  CHECK(ego::test::throws_code([&] { read_calibration(dir / "broken.json"); }, ErrorCode::kParseError));
}

TEST_CASE("depth round trip is bit exact") {
  TempDir dir;
  Rng rng(3);
  DepthMap d(17, 9);
  for (float& v : d.data) v = rng.uniform() < 0.2 ? 0.0f : static_cast<float>(rng.uniform(0.1, 8));
  write_depth(dir / "d.dpt", d);
  const DepthMap back = read_depth(dir / "d.dpt");
  CHECK(back.width == 17);
  CHECK(back.height == 9);
  CHECK(back.data == d.data);
  CHECK(fs::file_size(dir / "d.dpt") == 16 + 4 * 17 * 9);
  truncate_file(dir / "d.dpt", 100);
  CHECK(ego::test::throws_code([&] { read_depth(dir / "d.dpt"); }, ErrorCode::kParseError));
  write_depth(dir / "v.dpt", d);
  replace_in_file(dir / "v.dpt", "DPT1", "DPT2");
  CHECK(ego::test::throws_code([&] { read_depth(dir / "v.dpt"); }, ErrorCode::kVersionMismatch));
}

TEST_CASE("mesh PLY round trip is bit exact") {
  TempDir dir;
  Rng rng(4);
  const TriangleMesh m = random_mesh(rng);
  write_mesh_ply(dir / "m.ply", m);
  const TriangleMesh back = read_mesh_ply(dir / "m.ply");
  CHECK(back.vertices == m.vertices);
  CHECK(back.faces == m.faces);
  // Rewriting the loaded mesh reproduces the same bytes.
  write_mesh_ply(dir / "m2.ply", back);
  CHECK(read_text(dir / "m.ply") == read_text(dir / "m2.ply"));

  truncate_file(dir / "m2.ply", fs::file_size(dir / "m2.ply") - 7);
  CHECK(ego::test::throws_code([&] { read_mesh_ply(dir / "m2.ply"); }, ErrorCode::kParseError));
  write_mesh_ply(dir / "v.ply", m);
  replace_in_file(dir / "v.ply", "format_version 1", "format_version 2");
  CHECK(ego::test::throws_code([&] { read_mesh_ply(dir / "v.ply"); }, ErrorCode::kVersionMismatch));
  // A file without the version comment is read as the current version.
  write_mesh_ply(dir / "nc.ply", m);
  replace_in_file(dir / "nc.ply", "comment format_version 1\n", "");
  CHECK(read_mesh_ply(dir / "nc.ply").vertices == m.vertices);
}

TEST_CASE("points PLY round trip keeps observers") {
  TempDir dir;
  Rng rng(5);
  PointCloudWithVisibility pc;
  for (int c = 0; c < 5; ++c) pc.cameras.push_back(ego::test::random_vec(rng, -2, 2));
  for (int n = 0; n < 40; ++n) {
    pc.points.push_back(ego::test::random_vec(rng, -2, 2));
    std::vector<std::uint32_t> obs;
    for (std::uint32_t c = 0; c < 5; ++c)
      if (rng.uniform() < 0.5) obs.push_back(c);
    pc.observers.push_back(obs);
  }
  write_points_ply(dir / "p.ply", pc);
  const PointCloudWithVisibility back = read_points_ply(dir / "p.ply");
  CHECK(back.points == pc.points);
  CHECK(back.cameras == pc.cameras);
  CHECK(back.observers == pc.observers);
  truncate_file(dir / "p.ply", fs::file_size(dir / "p.ply") - 3);
  CHECK(ego::test::throws_code([&] { read_points_ply(dir / "p.ply"); }, ErrorCode::kParseError));
}

TEST_CASE("box JSON lines round trip") {
  TempDir dir;
  Rng rng(6);
  std::vector<ObbRecord> recs;
  for (int n = 0; n < 30; ++n) {
    ObbRecord r;
    r.t = rng.uniform(0, 100);
    r.obb = Obb3::make(ego::test::random_vec(rng, -3, 3), rng.uniform(-3, 3), ego::test::random_vec(rng, 0.1, 2),
                       static_cast<int>(rng.below(4)), 4, rng.uniform());
    if (n % 2) {
      r.id = n;
      r.n = n + 3;
    }
    recs.push_back(r);
  }
  write_obbs_jsonl(dir / "b.jsonl", recs);
  const auto back = read_obbs_jsonl(dir / "b.jsonl");
  REQUIRE(back.size() == recs.size());
  for (size_t n = 0; n < recs.size(); ++n) {
    CHECK(std::abs(back[n].t - recs[n].t) <= 1e-12);
    CHECK((back[n].obb.center - recs[n].obb.center).norm() <= 1e-12);
    CHECK((back[n].obb.dims - recs[n].obb.dims).norm() <= 1e-12);
    CHECK(std::abs(back[n].obb.yaw - recs[n].obb.yaw) <= 1e-12);
    CHECK(std::abs(back[n].obb.score - recs[n].obb.score) <= 1e-12);
    CHECK(back[n].obb.label() == recs[n].obb.label());
    CHECK(back[n].id == recs[n].id);
    CHECK(back[n].n == recs[n].n);
  }
  CHECK(ego::test::throws_code([] { obb_from_json_line("{\"v\":1,\"t\":0", 3); }, ErrorCode::kParseError));
  std::string line = obb_to_json_line(recs[0]);
  line.replace(line.find("\"v\":1"), 5, "\"v\":2");
  CHECK(ego::test::throws_code([&] { obb_from_json_line(line, 1); }, ErrorCode::kVersionMismatch));
}

TEST_CASE("volume round trip") {
  TempDir dir;
  Rng rng(7);
  VoxelGrid grid;
  grid.D = 3;
  grid.H = 4;
  grid.W = 5;
  grid.voxel_size = 0.07;
  grid.T_w_grid = ego::test::random_pose(rng);
  std::vector<double> data(2 * grid.voxel_count());
  for (double& x : data) x = rng.uniform(-1, 1);
  write_volume(dir / "v.vol", grid, 2, data);
  const VolumeFile vf = read_volume(dir / "v.vol");
  CHECK(vf.channels == 2);
  CHECK(vf.data == data);
  CHECK(vf.grid.D == 3);
  CHECK(vf.grid.W == 5);
  CHECK(vf.grid.voxel_size == 0.07);
  CHECK((vf.grid.T_w_grid.translation - grid.T_w_grid.translation).norm() <= 1e-12);
  CHECK((vf.grid.T_w_grid.rotation.matrix() - grid.T_w_grid.rotation.matrix()).norm() <= 1e-12);
  CHECK(vf.channel(1).data[0] == data[grid.voxel_count()]);
  CHECK(ego::test::throws_code([&] { write_volume(dir / "x.vol", grid, 3, data); }, ErrorCode::kShapeMismatch));
  truncate_file(dir / "v.vol", fs::file_size(dir / "v.vol") - 8);
  CHECK(ego::test::throws_code([&] { read_volume(dir / "v.vol"); }, ErrorCode::kParseError));
}

TEST_CASE("manifest round trip and missing files") {
  TempDir dir;
  SequenceManifest m;
  m.dir = dir.path;
  m.seed = 42;
  m.rate = 10;
  m.classes = {"chair", "table"};
  for (const char* f : {"calibration.json", "trajectory.csv", "points.ply", "gt_mesh.ply", "gt_obbs.jsonl", "d0.dpt"})
    write_text(dir / f, "x");
  m.calibration = "calibration.json";
  m.trajectory = "trajectory.csv";
  m.points = "points.ply";
  m.gt_mesh = "gt_mesh.ply";
  m.gt_obbs = "gt_obbs.jsonl";
  m.depth = {"d0.dpt"};
  write_manifest(dir / "manifest.json", m);
  const SequenceManifest back = read_manifest(dir / "manifest.json");
  CHECK(back.seed == 42);
  CHECK(back.classes == m.classes);
  CHECK(back.resolve(back.trajectory) == dir.path / "trajectory.csv");
  REQUIRE(back.depth.size() == 1);
  fs::remove(dir / "d0.dpt");
  CHECK(ego::test::throws_code([&] { read_manifest(dir / "manifest.json"); }, ErrorCode::kIoError));
}
