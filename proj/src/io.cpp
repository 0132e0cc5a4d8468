#include "ego/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "ego/error.hpp"

namespace ego {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void parse_error(const fs::path& path, const std::string& where, const std::string& what) {
  fail(ErrorCode::kParseError, path.string() + " (" + where + "): " + what);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  return f;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kIoError, "cannot open " + path.string());
  return f;
}

void close_out(std::ofstream& f, const fs::path& path) {
  f.flush();
  if (!f) fail(ErrorCode::kIoError, "failed writing " + path.string());
}

// Little-endian scalar encoding independent of the host byte order.
template <typename T>
void put_le(std::string& buf, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  buf.append(bytes.data(), sizeof(T));
}

template <typename T>
T get_le(const char* p) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T v;
  std::memcpy(&v, bytes.data(), sizeof(T));
  return v;
}

double parse_number(const std::string& s, const fs::path& path, const std::string& where) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || b == e) parse_error(path, where, "not a number: '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

// Version suffix "vN" of a tagged first line such as "# ego trajectory v1".
void check_tag_line(const std::string& line, const std::string& tag, const fs::path& path) {
  if (line.rfind(tag + " v", 0) != 0) parse_error(path, "line 1", "missing '" + tag + "' header");
  const double v = parse_number(line.substr(tag.size() + 2), path, "line 1");
  if (v != kFormatVersion) fail(ErrorCode::kVersionMismatch, path.string() + ": unsupported version " + line);
}

json parse_json(const std::string& text, const fs::path& path, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    parse_error(path, where + ", byte " + std::to_string(e.byte), "invalid JSON");
  }
}

void check_json_version(const json& j, const fs::path& path, const std::string& where) {
  if (!j.is_object() || !j.contains("version") || !j["version"].is_number_integer()) {
    parse_error(path, where, "missing integer 'version'");
  }
  if (j["version"].get<int>() != kFormatVersion) {
    fail(ErrorCode::kVersionMismatch, path.string() + ": unsupported version " + j["version"].dump());
  }
}

template <typename T>
T get_field(const json& j, const char* key, const fs::path& path, const std::string& where) {
  if (!j.contains(key)) parse_error(path, where, std::string("missing field '") + key + "'");
  try {
    return j[key].get<T>();
  } catch (const json::exception&) {
    parse_error(path, where, std::string("bad field '") + key + "'");
  }
}

Vec3 get_vec3(const json& j, const char* key, const fs::path& path, const std::string& where) {
  const auto v = get_field<std::vector<double>>(j, key, path, where);
  if (v.size() != 3) parse_error(path, where, std::string("field '") + key + "' must have 3 entries");
  return Vec3(v[0], v[1], v[2]);
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  auto f = open_out(path);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  close_out(f, path);
}

std::string read_text(const fs::path& path) {
  auto f = open_in(path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// ---- trajectory -----------------------------------------------------------

void write_trajectory(const fs::path& path, const std::vector<TimedPose>& traj) {
  std::string out = "# ego trajectory v1\nt,tx,ty,tz,qw,qx,qy,qz\n";
  for (const auto& tp : traj) {
    const Eigen::Quaterniond q = tp.T_w_cam.rotation.quaternion();
    const Vec3& t = tp.T_w_cam.translation;
    for (double v : {tp.t, t.x(), t.y(), t.z(), q.w(), q.x(), q.y(), q.z()}) {
      out += format_double(v);
      out += ',';
    }
    out.back() = '\n';
  }
  write_text(path, out);
}

std::vector<TimedPose> read_trajectory(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) parse_error(path, "line 1", "empty file");
  check_tag_line(line, "# ego trajectory", path);
  if (!std::getline(in, line) || line != "t,tx,ty,tz,qw,qx,qy,qz") parse_error(path, "line 2", "bad column header");
  std::vector<TimedPose> out;
  size_t no = 2;
  while (std::getline(in, line)) {
    ++no;
    const std::string where = "line " + std::to_string(no);
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 8) parse_error(path, where, "expected 8 columns");
    double v[8];
    for (int c = 0; c < 8; ++c) v[c] = parse_number(cols[c], path, where);
    const Eigen::Quaterniond q(v[4], v[5], v[6], v[7]);
    if (!(q.norm() > 0.5)) parse_error(path, where, "quaternion is not unit length");
    if (!out.empty() && !(v[0] > out.back().t)) parse_error(path, where, "timestamps must strictly increase");
    out.push_back({v[0], Pose(Rotation::from_quaternion(q), Vec3(v[1], v[2], v[3]))});
  }
  return out;
}

// ---- calibration ----------------------------------------------------------

void write_calibration(const fs::path& path, const Camera& cam) {
  json j;
  j["version"] = kFormatVersion;
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        j["model"] = std::is_same_v<T, PinholeCamera> ? "pinhole" : "fisheye";
        j["width"] = c.width;
        j["height"] = c.height;
        j["fx"] = c.fx;
        j["fy"] = c.fy;
        j["cx"] = c.cx;
        j["cy"] = c.cy;
        if constexpr (std::is_same_v<T, FisheyeCamera>) {
          j["k"] = c.k;
          j["valid_radius"] = c.valid_radius;
        }
      },
      cam);
  write_text(path, j.dump(2) + "\n");
}

Camera read_calibration(const fs::path& path) {
  const json j = parse_json(read_text(path), path, "calibration");
  check_json_version(j, path, "calibration");
  const auto model = get_field<std::string>(j, "model", path, "calibration");
  auto fill = [&](auto& c) {
    c.width = get_field<int>(j, "width", path, "calibration");
    c.height = get_field<int>(j, "height", path, "calibration");
    c.fx = get_field<double>(j, "fx", path, "calibration");
    c.fy = get_field<double>(j, "fy", path, "calibration");
    c.cx = get_field<double>(j, "cx", path, "calibration");
    c.cy = get_field<double>(j, "cy", path, "calibration");
  };
  Camera cam;
  if (model == "pinhole") {
    PinholeCamera c;
    fill(c);
    cam = c;
  } else if (model == "fisheye") {
    FisheyeCamera c;
    fill(c);
    const auto k = get_field<std::vector<double>>(j, "k", path, "calibration");
    if (k.size() != 4) parse_error(path, "calibration", "fisheye needs 4 coefficients");
    std::copy(k.begin(), k.end(), c.k.begin());
    c.valid_radius = get_field<double>(j, "valid_radius", path, "calibration");
    cam = c;
  } else {
    parse_error(path, "calibration", "unknown camera model '" + model + "'");
  }
  if (!is_valid(cam)) parse_error(path, "calibration", "camera parameters violate model invariants");
  return cam;
}

// ---- depth ----------------------------------------------------------------

void write_depth(const fs::path& path, const DepthMap& depth) {
  if (depth.width < 0 || depth.height < 0 || depth.width > 99999 || depth.height > 99999) fail(ErrorCode::kInvalidArgument, "depth map too large");
  char header[32];
  std::snprintf(header, sizeof(header), "DPT1%5d %5d\n", depth.width, depth.height);
  std::string out(header, 16);  // width and height are at most 5 digits
  out.reserve(16 + depth.data.size() * 4);
  for (float v : depth.data) put_le(out, v);
  write_text(path, out);
}

DepthMap read_depth(const fs::path& path) {
  const std::string buf = read_text(path);
  if (buf.size() < 16) parse_error(path, "offset 0", "truncated header");
  if (buf.compare(0, 4, "DPT1") != 0) {
    if (buf.compare(0, 3, "DPT") == 0) fail(ErrorCode::kVersionMismatch, path.string() + ": unsupported depth version");
    parse_error(path, "offset 0", "bad magic");
  }
  if (buf[9] != ' ' || buf[15] != '\n') parse_error(path, "offset 4", "malformed header");
  const double w = parse_number(buf.substr(4, 5), path, "offset 4");
  const double h = parse_number(buf.substr(10, 5), path, "offset 10");
  if (w < 1 || h < 1 || w != std::floor(w) || h != std::floor(h)) parse_error(path, "offset 4", "bad dimensions");
  DepthMap d(static_cast<int>(w), static_cast<int>(h));
  const size_t need = 16 + d.data.size() * 4;
  if (buf.size() != need) {
    parse_error(path, "offset " + std::to_string(std::min(buf.size(), need)),
                buf.size() < need ? "truncated pixel data" : "trailing bytes");
  }
  for (size_t i = 0; i < d.data.size(); ++i) d.data[i] = get_le<float>(buf.data() + 16 + 4 * i);
  return d;
}

// ---- PLY ------------------------------------------------------------------

namespace {

struct PlyProperty {
  std::string name;
  std::string type;        // scalar type, or item type for lists
  std::string count_type;  // empty unless a list
};

struct PlyElement {
  std::string name;
  size_t count = 0;
  std::vector<PlyProperty> props;
  // Decoded body: per row, scalar values in property order and list values.
  std::vector<std::vector<double>> scalars;
  std::vector<std::vector<std::vector<double>>> lists;
};

size_t ply_type_size(const std::string& t) {
  static const std::map<std::string, size_t> sizes{
      {"char", 1},  {"uchar", 1},  {"int8", 1},    {"uint8", 1},  {"short", 2},   {"ushort", 2},
      {"int16", 2}, {"uint16", 2}, {"int", 4},     {"uint", 4},   {"int32", 4},   {"uint32", 4},
      {"float", 4}, {"float32", 4}, {"double", 8}, {"float64", 8}};
  const auto it = sizes.find(t);
  return it == sizes.end() ? 0 : it->second;
}

double ply_read_scalar(const std::string& t, const char* p) {
  if (t == "char" || t == "int8") return get_le<std::int8_t>(p);
  if (t == "uchar" || t == "uint8") return get_le<std::uint8_t>(p);
  if (t == "short" || t == "int16") return get_le<std::int16_t>(p);
  if (t == "ushort" || t == "uint16") return get_le<std::uint16_t>(p);
  if (t == "int" || t == "int32") return get_le<std::int32_t>(p);
  if (t == "uint" || t == "uint32") return get_le<std::uint32_t>(p);
  if (t == "float" || t == "float32") return get_le<float>(p);
  return get_le<double>(p);
}

std::vector<PlyElement> read_ply(const fs::path& path) {
  const std::string buf = read_text(path);
  size_t pos = 0, line_no = 0;
  auto next_line = [&]() -> std::string {
    const size_t nl = buf.find('\n', pos);
    if (nl == std::string::npos) parse_error(path, "line " + std::to_string(line_no + 1), "truncated header");
    std::string line = buf.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = nl + 1;
    ++line_no;
    return line;
  };
  if (next_line() != "ply") parse_error(path, "line 1", "not a PLY file");
  std::vector<PlyElement> elems;
  bool format_ok = false;
  for (;;) {
    const std::string line = next_line();
    const std::string where = "line " + std::to_string(line_no);
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "end_header") break;
    if (kw == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt != "binary_little_endian") parse_error(path, where, "only binary_little_endian PLY is supported");
      if (ver != "1.0") fail(ErrorCode::kVersionMismatch, path.string() + ": unsupported PLY version " + ver);
      format_ok = true;
    } else if (kw == "comment") {
      std::string key;
      ls >> key;
      if (key == "format_version") {
        std::string v;
        ls >> v;
        if (parse_number(v, path, where) != kFormatVersion) {
          fail(ErrorCode::kVersionMismatch, path.string() + ": unsupported format_version " + v);
        }
      }
    } else if (kw == "element") {
      PlyElement e;
      std::string count;
      ls >> e.name >> count;
      const double n = parse_number(count, path, where);
      if (n < 0 || n != std::floor(n)) parse_error(path, where, "bad element count");
      e.count = static_cast<size_t>(n);
      elems.push_back(std::move(e));
    } else if (kw == "property") {
      if (elems.empty()) parse_error(path, where, "property before element");
      PlyProperty p;
      std::string t;
      ls >> t;
      if (t == "list") {
        ls >> p.count_type >> p.type >> p.name;
        if (!ply_type_size(p.count_type)) parse_error(path, where, "bad list count type");
      } else {
        p.type = t;
        ls >> p.name;
      }
      if (!ply_type_size(p.type) || p.name.empty()) parse_error(path, where, "bad property");
      elems.back().props.push_back(p);
    } else if (kw != "obj_info") {
      parse_error(path, where, "unknown header keyword '" + kw + "'");
    }
  }
  if (!format_ok) parse_error(path, "header", "missing format line");

  for (auto& e : elems) {
    e.scalars.resize(e.count);
    e.lists.resize(e.count);
    for (size_t r = 0; r < e.count; ++r) {
      for (const auto& p : e.props) {
        const std::string where = "offset " + std::to_string(pos);
        if (p.count_type.empty()) {
          const size_t sz = ply_type_size(p.type);
          if (pos + sz > buf.size()) parse_error(path, where, "truncated body in element " + e.name);
          e.scalars[r].push_back(ply_read_scalar(p.type, buf.data() + pos));
          pos += sz;
        } else {
          const size_t csz = ply_type_size(p.count_type), isz = ply_type_size(p.type);
          if (pos + csz > buf.size()) parse_error(path, where, "truncated body in element " + e.name);
          const double n = ply_read_scalar(p.count_type, buf.data() + pos);
          pos += csz;
          if (n < 0) parse_error(path, where, "negative list length");
          const size_t cnt = static_cast<size_t>(n);
          if (pos + cnt * isz > buf.size()) parse_error(path, where, "truncated body in element " + e.name);
          std::vector<double> items(cnt);
          for (size_t i = 0; i < cnt; ++i) items[i] = ply_read_scalar(p.type, buf.data() + pos + i * isz);
          pos += cnt * isz;
          e.lists[r].push_back(std::move(items));
        }
      }
    }
  }
  if (pos != buf.size()) parse_error(path, "offset " + std::to_string(pos), "trailing bytes after PLY body");
  return elems;
}

const PlyElement* find_element(const std::vector<PlyElement>& elems, const std::string& name) {
  for (const auto& e : elems)
    if (e.name == name) return &e;
  return nullptr;
}

int scalar_index(const PlyElement& e, const std::string& name) {
  int idx = 0;
  for (const auto& p : e.props) {
    if (!p.count_type.empty()) continue;
    if (p.name == name) return idx;
    ++idx;
  }
  return -1;
}

int list_index(const PlyElement& e, const std::string& name) {
  int idx = 0;
  for (const auto& p : e.props) {
    if (p.count_type.empty()) continue;
    if (p.name == name) return idx;
    ++idx;
  }
  return -1;
}

std::vector<Vec3> read_xyz(const PlyElement& e, const fs::path& path) {
  const int ix = scalar_index(e, "x"), iy = scalar_index(e, "y"), iz = scalar_index(e, "z");
  if (ix < 0 || iy < 0 || iz < 0) parse_error(path, "header", "element " + e.name + " lacks x/y/z");
  std::vector<Vec3> out;
  out.reserve(e.count);
  for (const auto& row : e.scalars) out.emplace_back(row[ix], row[iy], row[iz]);
  return out;
}

std::string ply_header(const std::vector<std::string>& body_lines) {
  std::string h = "ply\nformat binary_little_endian 1.0\ncomment format_version 1\n";
  for (const auto& l : body_lines) h += l + "\n";
  return h + "end_header\n";
}

}  // namespace

void write_mesh_ply(const fs::path& path, const TriangleMesh& mesh) {
  if (!mesh.indices_valid()) fail(ErrorCode::kInvalidArgument, "mesh has out-of-range face indices");
  std::string out = ply_header({"element vertex " + std::to_string(mesh.vertices.size()), "property double x",
                                "property double y", "property double z",
                                "element face " + std::to_string(mesh.faces.size()),
                                "property list uchar int vertex_indices"});
  for (const Vec3& v : mesh.vertices)
    for (int a = 0; a < 3; ++a) put_le(out, v[a]);
  for (const auto& f : mesh.faces) {
    put_le<std::uint8_t>(out, 3);
    for (int a = 0; a < 3; ++a) put_le(out, f[a]);
  }
  write_text(path, out);
}

TriangleMesh read_mesh_ply(const fs::path& path) {
  const auto elems = read_ply(path);
  const PlyElement* ve = find_element(elems, "vertex");
  if (!ve) parse_error(path, "header", "no vertex element");
  TriangleMesh m;
  m.vertices = read_xyz(*ve, path);
  if (const PlyElement* fe = find_element(elems, "face")) {
    int li = list_index(*fe, "vertex_indices");
    if (li < 0) li = list_index(*fe, "vertex_index");
    if (li < 0) parse_error(path, "header", "face element lacks vertex_indices");
    for (size_t r = 0; r < fe->count; ++r) {
      const auto& idx = fe->lists[r][li];
      if (idx.size() != 3) parse_error(path, "face " + std::to_string(r), "only triangles are supported");
      m.faces.push_back({static_cast<std::int32_t>(idx[0]), static_cast<std::int32_t>(idx[1]),
                         static_cast<std::int32_t>(idx[2])});
    }
  }
  if (!m.indices_valid()) parse_error(path, "body", "face index out of range");
  return m;
}

void write_points_ply(const fs::path& path, const PointCloudWithVisibility& pc) {
  if (pc.observers.size() != pc.points.size()) fail(ErrorCode::kInvalidArgument, "one observer list per point required");
  std::string out = ply_header({"element camera " + std::to_string(pc.cameras.size()), "property double x",
                                "property double y", "property double z",
                                "element vertex " + std::to_string(pc.points.size()), "property double x",
                                "property double y", "property double z", "property list uint uint observers"});
  for (const Vec3& c : pc.cameras)
    for (int a = 0; a < 3; ++a) put_le(out, c[a]);
  for (size_t i = 0; i < pc.points.size(); ++i) {
    for (int a = 0; a < 3; ++a) put_le(out, pc.points[i][a]);
    put_le(out, static_cast<std::uint32_t>(pc.observers[i].size()));
    for (std::uint32_t o : pc.observers[i]) {
      if (o >= pc.cameras.size()) fail(ErrorCode::kInvalidArgument, "observer index out of range");
      put_le(out, o);
    }
  }
  write_text(path, out);
}

PointCloudWithVisibility read_points_ply(const fs::path& path) {
  const auto elems = read_ply(path);
  const PlyElement* ve = find_element(elems, "vertex");
  const PlyElement* ce = find_element(elems, "camera");
  if (!ve || !ce) parse_error(path, "header", "point cloud needs camera and vertex elements");
  PointCloudWithVisibility pc;
  pc.cameras = read_xyz(*ce, path);
  pc.points = read_xyz(*ve, path);
  const int li = list_index(*ve, "observers");
  if (li < 0) parse_error(path, "header", "vertex element lacks observers");
  for (size_t r = 0; r < ve->count; ++r) {
    std::vector<std::uint32_t> obs;
    for (double o : ve->lists[r][li]) {
      if (o >= static_cast<double>(pc.cameras.size())) parse_error(path, "vertex " + std::to_string(r), "observer out of range");
      obs.push_back(static_cast<std::uint32_t>(o));
    }
    pc.observers.push_back(std::move(obs));
  }
  return pc;
}

// ---- boxes ----------------------------------------------------------------

std::string obb_to_json_line(const ObbRecord& rec) {
  json j;
  j["v"] = kFormatVersion;
  j["t"] = rec.t;
  j["center"] = vec_json(rec.obb.center);
  j["yaw"] = rec.obb.yaw;
  j["dims"] = vec_json(rec.obb.dims);
  j["class"] = rec.obb.label();
  j["class_probs"] = rec.obb.class_probs;
  j["score"] = rec.obb.score;
  if (rec.id >= 0) {
    j["id"] = rec.id;
    j["n"] = rec.n;
  }
  return j.dump();
}

ObbRecord obb_from_json_line(const std::string& line, size_t line_no) {
  const fs::path path("<jsonl>");
  const std::string where = "line " + std::to_string(line_no);
  const json j = parse_json(line, path, where);
  if (!j.is_object() || !j.contains("v")) parse_error(path, where, "missing 'v'");
  if (get_field<int>(j, "v", path, where) != kFormatVersion) {
    fail(ErrorCode::kVersionMismatch, "box record " + where + ": unsupported version " + j["v"].dump());
  }
  ObbRecord r;
  r.t = get_field<double>(j, "t", path, where);
  r.obb.center = get_vec3(j, "center", path, where);
  r.obb.yaw = get_field<double>(j, "yaw", path, where);
  r.obb.dims = get_vec3(j, "dims", path, where);
  r.obb.score = get_field<double>(j, "score", path, where);
  if (j.contains("class_probs")) {
    r.obb.class_probs = get_field<std::vector<double>>(j, "class_probs", path, where);
  } else {
    const int cls = get_field<int>(j, "class", path, where);
    if (cls < 0) parse_error(path, where, "negative class");
    r.obb.class_probs.assign(static_cast<size_t>(cls) + 1, 0.0);
    r.obb.class_probs[cls] = 1.0;
  }
  if (r.obb.class_probs.empty()) parse_error(path, where, "empty class_probs");
  if (j.contains("id")) {
    r.id = get_field<int>(j, "id", path, where);
    r.n = get_field<int>(j, "n", path, where);
  }
  return r;
}

void write_obbs_jsonl(const fs::path& path, const std::vector<ObbRecord>& recs) {
  std::string out;
  for (const auto& r : recs) out += obb_to_json_line(r) + "\n";
  write_text(path, out);
}

std::vector<ObbRecord> read_obbs_jsonl(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::vector<ObbRecord> out;
  size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    try {
      out.push_back(obb_from_json_line(line, no));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kParseError) fail(ErrorCode::kParseError, path.string() + ": " + e.what());
      throw;
    }
  }
  return out;
}

// ---- volumes --------------------------------------------------------------

DenseVolume VolumeFile::channel(int c) const {
  if (c < 0 || c >= channels) fail(ErrorCode::kInvalidArgument, "volume channel out of range");
  DenseVolume v(grid.D, grid.H, grid.W);
  const size_t n = v.size();
  std::copy(data.begin() + static_cast<std::ptrdiff_t>(c * n), data.begin() + static_cast<std::ptrdiff_t>((c + 1) * n),
            v.data.begin());
  return v;
}

void write_volume(const fs::path& path, const VoxelGrid& grid, int channels, const std::vector<double>& data) {
  if (channels < 1 || data.size() != static_cast<size_t>(channels) * grid.voxel_count()) {
    fail(ErrorCode::kShapeMismatch, "volume data does not match grid and channel count");
  }
  const Eigen::Quaterniond q = grid.T_w_grid.rotation.quaternion();
  const Vec3& t = grid.T_w_grid.translation;
  std::string out = "EGOVOL 1\n";
  out += "dims " + std::to_string(channels) + " " + std::to_string(grid.D) + " " + std::to_string(grid.H) + " " +
         std::to_string(grid.W) + "\n";
  out += "dtype f64\n";
  out += "voxel_size " + format_double(grid.voxel_size) + "\n";
  out += "pose";
  for (double v : {t.x(), t.y(), t.z(), q.w(), q.x(), q.y(), q.z()}) out += " " + format_double(v);
  out += "\nend\n";
  out.reserve(out.size() + data.size() * 8);
  for (double v : data) put_le(out, v);
  write_text(path, out);
}

void write_volume(const fs::path& path, const VoxelGrid& grid, const DenseVolume& vol) {
  if (!vol.same_shape(grid.D, grid.H, grid.W)) fail(ErrorCode::kShapeMismatch, "volume does not match grid");
  write_volume(path, grid, 1, vol.data);
}

void write_volume(const fs::path& path, const VoxelGrid& grid, const FeatureVolume& vol) {
  if (vol.D != grid.D || vol.H != grid.H || vol.W != grid.W) fail(ErrorCode::kShapeMismatch, "volume does not match grid");
  write_volume(path, grid, vol.C, vol.data);
}

VolumeFile read_volume(const fs::path& path) {
  const std::string buf = read_text(path);
  size_t pos = 0, line_no = 0;
  auto next_line = [&]() -> std::string {
    const size_t nl = buf.find('\n', pos);
    if (nl == std::string::npos) parse_error(path, "line " + std::to_string(line_no + 1), "truncated header");
    std::string line = buf.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    return line;
  };
  const std::string magic = next_line();
  if (magic.rfind("EGOVOL ", 0) != 0) parse_error(path, "line 1", "bad magic");
  if (magic != "EGOVOL 1") fail(ErrorCode::kVersionMismatch, path.string() + ": unsupported volume version");
  VolumeFile vf;
  bool have_dims = false, have_vs = false, have_pose = false;
  for (;;) {
    const std::string line = next_line();
    const std::string where = "line " + std::to_string(line_no);
    if (line == "end") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    std::vector<std::string> vals;
    for (std::string v; ls >> v;) vals.push_back(v);
    auto num = [&](size_t i) { return parse_number(vals.at(i), path, where); };
    if (key == "dims" && vals.size() == 4) {
      vf.channels = static_cast<int>(num(0));
      vf.grid.D = static_cast<int>(num(1));
      vf.grid.H = static_cast<int>(num(2));
      vf.grid.W = static_cast<int>(num(3));
      have_dims = true;
    } else if (key == "dtype" && vals.size() == 1) {
      if (vals[0] != "f64") parse_error(path, where, "unsupported dtype " + vals[0]);
    } else if (key == "voxel_size" && vals.size() == 1) {
      vf.grid.voxel_size = num(0);
      have_vs = true;
    } else if (key == "pose" && vals.size() == 7) {
      const Eigen::Quaterniond q(num(3), num(4), num(5), num(6));
      vf.grid.T_w_grid = Pose(Rotation::from_quaternion(q), Vec3(num(0), num(1), num(2)));
      have_pose = true;
    } else {
      parse_error(path, where, "unrecognized header line '" + line + "'");
    }
  }
  if (!have_dims || !have_vs || !have_pose) parse_error(path, "header", "missing dims, voxel_size or pose");
  if (vf.channels < 1 || vf.grid.D < 1 || vf.grid.H < 1 || vf.grid.W < 1) parse_error(path, "header", "bad dims");
  const size_t n = static_cast<size_t>(vf.channels) * vf.grid.voxel_count();
  if (buf.size() - pos != n * 8) {
    parse_error(path, "offset " + std::to_string(pos), buf.size() - pos < n * 8 ? "truncated data" : "trailing bytes");
  }
  vf.data.resize(n);
  for (size_t i = 0; i < n; ++i) vf.data[i] = get_le<double>(buf.data() + pos + 8 * i);
  return vf;
}

// ---- manifest -------------------------------------------------------------

void write_manifest(const fs::path& path, const SequenceManifest& m) {
  json j;
  j["version"] = kFormatVersion;
  j["seed"] = m.seed;
  j["rate"] = m.rate;
  j["room"] = vec_json(m.room);
  j["classes"] = m.classes;
  j["calibration"] = m.calibration.generic_string();
  j["trajectory"] = m.trajectory.generic_string();
  j["points"] = m.points.generic_string();
  j["gt_mesh"] = m.gt_mesh.generic_string();
  j["gt_obbs"] = m.gt_obbs.generic_string();
  json depth = json::array();
  for (const auto& d : m.depth) depth.push_back(d.generic_string());
  j["depth"] = depth;
  write_text(path, j.dump(2) + "\n");
}

SequenceManifest read_manifest(const fs::path& path) {
  const json j = parse_json(read_text(path), path, "manifest");
  check_json_version(j, path, "manifest");
  SequenceManifest m;
  m.dir = fs::absolute(path).parent_path();
  m.seed = get_field<std::uint64_t>(j, "seed", path, "manifest");
  m.rate = get_field<double>(j, "rate", path, "manifest");
  m.room = get_vec3(j, "room", path, "manifest");
  m.classes = get_field<std::vector<std::string>>(j, "classes", path, "manifest");
  auto p = [&](const char* key) { return fs::path(get_field<std::string>(j, key, path, "manifest")); };
  m.calibration = p("calibration");
  m.trajectory = p("trajectory");
  m.points = p("points");
  m.gt_mesh = p("gt_mesh");
  m.gt_obbs = p("gt_obbs");
  for (const auto& d : get_field<std::vector<std::string>>(j, "depth", path, "manifest")) m.depth.emplace_back(d);
  std::vector<fs::path> refs{m.calibration, m.trajectory, m.points, m.gt_mesh, m.gt_obbs};
  refs.insert(refs.end(), m.depth.begin(), m.depth.end());
  for (const auto& r : refs) {
    if (!fs::exists(m.resolve(r))) fail(ErrorCode::kIoError, path.string() + ": referenced file missing: " + r.string());
  }
  return m;
}

}  // namespace ego
