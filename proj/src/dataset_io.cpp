#include "lumenreg/dataset_io.hpp"

#include "lumenreg/errors.hpp"
#include "lumenreg/mesh.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lumenreg {

namespace fs = std::filesystem;
using nlohmann::json;

EncodedImage::EncodedImage(int w, int h, int c, int depth) : width(w), height(h), channels(c), bit_depth(depth) {
  if (w <= 0 || h <= 0) throw InvalidArgument("image dimensions must be positive");
  if (c != 1 && c != 3) throw InvalidArgument("images have 1 or 3 channels");
  if (depth != 8 && depth != 16) throw InvalidArgument("bit depth must be 8 or 16");
  payload.assign(expected_size(), 0);
}

std::uint16_t EncodedImage::sample(int x, int y, int c) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * channels + c;
  if (bit_depth == 8) return payload[i];
  return static_cast<std::uint16_t>(payload[2 * i] << 8 | payload[2 * i + 1]);
}

void EncodedImage::set_sample(int x, int y, int c, std::uint16_t value) {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * channels + c;
  if (bit_depth == 8) {
    payload[i] = static_cast<std::uint8_t>(value);
  } else {
    payload[2 * i] = static_cast<std::uint8_t>(value >> 8);
    payload[2 * i + 1] = static_cast<std::uint8_t>(value & 0xff);
  }
}

std::uint16_t quantize(double value01, int max_code) {
  // std::round rounds halfway cases away from zero.
  const double code = std::round(std::clamp(value01, 0.0, 1.0) * max_code);
  return static_cast<std::uint16_t>(code);
}

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw EncodingError(std::string("non-finite value in ") + what + " frame");
}

void require_layout(const EncodedImage& img, int channels, int bit_depth, const char* kind) {
  if (img.channels != channels || img.bit_depth != bit_depth)
    throw FormatError(kind, 0,
                      "expected " + std::to_string(channels) + " channel(s) at " + std::to_string(bit_depth) +
                          " bits, got " + std::to_string(img.channels) + " at " + std::to_string(img.bit_depth));
  if (img.payload.size() != img.expected_size()) throw FormatError(kind, 0, "payload size does not match dimensions");
}

double decode_unit(std::uint16_t code) { return code / 65535.0; }

}  // namespace

EncodedImage encode_frame(const DepthFrame& d) {
  EncodedImage img(d.width(), d.height(), 1, 16);
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x) {
      if (!d.hit(x, y)) {
        img.set_sample(x, y, 0, 65535);
        continue;
      }
      require_finite(d.depth(x, y), "depth");
      img.set_sample(x, y, 0, quantize(d.depth(x, y) / kFarClampMm));
    }
  return img;
}

EncodedImage encode_frame(const NormalFrame& n) {
  EncodedImage img(n.normal.width, n.normal.height, 3, 16);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (!n.hit(x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        require_finite(n.normal(x, y)[c], "normal");
        img.set_sample(x, y, c, quantize((n.normal(x, y)[c] + 1.0) / 2.0));
      }
    }
  return img;
}

EncodedImage encode_frame(const FlowFrame& f) {
  EncodedImage img(f.flow.width, f.flow.height, 3, 16);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (!f.valid(x, y)) continue;
      for (int c = 0; c < 2; ++c) {
        require_finite(f.flow(x, y)[c], "flow");
        img.set_sample(x, y, c, quantize((f.flow(x, y)[c] + kFlowRangePx) / (2.0 * kFlowRangePx)));
      }
    }
  return img;
}

EncodedImage encode_frame(const OcclusionFrame& o) {
  EncodedImage img(o.width, o.height, 1, 8);
  for (int y = 0; y < o.height; ++y)
    for (int x = 0; x < o.width; ++x) img.set_sample(x, y, 0, o(x, y) ? 255 : 0);
  return img;
}

DepthFrame decode_depth(const EncodedImage& img) {
  require_layout(img, 1, 16, "depth");
  DepthFrame d(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const std::uint16_t code = img.sample(x, y, 0);
      d.depth(x, y) = decode_unit(code) * kFarClampMm;
      d.hit(x, y) = code != 65535;
    }
  return d;
}

NormalFrame decode_normals(const EncodedImage& img) {
  require_layout(img, 3, 16, "normals");
  NormalFrame n(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const std::array<std::uint16_t, 3> c{img.sample(x, y, 0), img.sample(x, y, 1), img.sample(x, y, 2)};
      if (c[0] == 0 && c[1] == 0 && c[2] == 0) continue;
      for (int k = 0; k < 3; ++k) n.normal(x, y)[k] = decode_unit(c[k]) * 2.0 - 1.0;
      n.hit(x, y) = 1;
    }
  return n;
}

FlowFrame decode_flow(const EncodedImage& img) {
  require_layout(img, 3, 16, "flow");
  FlowFrame f(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const std::uint16_t r = img.sample(x, y, 0), g = img.sample(x, y, 1);
      if (r == 0 && g == 0 && img.sample(x, y, 2) == 0) continue;
      f.flow(x, y) = {decode_unit(r) * 2.0 * kFlowRangePx - kFlowRangePx,
                      decode_unit(g) * 2.0 * kFlowRangePx - kFlowRangePx};
      f.valid(x, y) = 1;
    }
  return f;
}

OcclusionFrame decode_occlusion(const EncodedImage& img) {
  require_layout(img, 1, 8, "occlusion");
  OcclusionFrame o(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const std::uint16_t v = img.sample(x, y, 0);
      if (v != 0 && v != 255) throw FormatError("occlusion", 0, "occlusion values must be 0 or 255");
      o(x, y) = v == 255;
    }
  return o;
}

// ---- PNG ----------------------------------------------------------------

namespace {

struct PngReader {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* where = static_cast<std::string*>(png_get_error_ptr(png));
  *where = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

void png_write_to_vector(png_structp png, png_bytep bytes, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), bytes, bytes + n);
}

void png_read_from_span(png_structp png, png_bytep out, png_size_t n) {
  auto* r = static_cast<PngReader*>(png_get_io_ptr(png));
  if (r->pos + n > r->data.size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, r->data.data() + r->pos, n);
  r->pos += n;
}

}  // namespace

std::vector<std::uint8_t> png_bytes(const EncodedImage& img) {
  if (img.payload.size() != img.expected_size()) throw EncodingError("payload size does not match dimensions");
  std::vector<std::uint8_t> out;
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!png) throw EncodingError("cannot create PNG writer");
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw EncodingError("PNG encoding failed: " + err);
  }
  png_set_write_fn(png, &out, png_write_to_vector, nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), img.bit_depth,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels * (img.bit_depth / 8);
  for (int y = 0; y < img.height; ++y)
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(img.payload.data() + y * stride);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

EncodedImage decode_png(std::span<const std::uint8_t> bytes, const std::string& where) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw FormatError(where, 0, "not a PNG file");
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!png) throw FormatError(where, 0, "cannot create PNG reader");
  png_infop info = png_create_info_struct(png);
  PngReader reader{bytes, 0};
  EncodedImage img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(where, 0, "PNG decoding failed: " + err);
  }
  png_set_read_fn(png, &reader, png_read_from_span);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if ((color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_RGB) || (depth != 8 && depth != 16) ||
      png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(where, 0, "unsupported PNG layout (need 8/16-bit gray or RGB, non-interlaced)");
  }
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = color == PNG_COLOR_TYPE_RGB ? 3 : 1;
  img.bit_depth = depth;
  img.payload.assign(img.expected_size(), 0);
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels * (depth / 8);
  rows.resize(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = img.payload.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string(), 0, "cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WriteError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw WriteError("failed writing " + path.string());
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void write_png(const fs::path& path, const EncodedImage& img) { write_bytes(path, png_bytes(img)); }

EncodedImage read_png(const fs::path& path) { return decode_png(read_bytes(path), path.string()); }

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

// ---- Poses ------------------------------------------------------------------

std::string format_pose_line(const HomogeneousTransform& t) {
  std::string line;
  char buf[32];
  const auto v = t.row_major();
  for (std::size_t i = 0; i < v.size(); ++i) {
    // Avoid "-0" so equal matrices always print identically.
    std::snprintf(buf, sizeof buf, "%.9g", v[i] == 0.0 ? 0.0 : v[i]);
    if (i) line += ',';
    line += buf;
  }
  return line;
}

void write_pose_file(const fs::path& path, std::span<const HomogeneousTransform> poses) {
  std::string text;
  for (const auto& p : poses) text += format_pose_line(p) + "\n";
  write_bytes(path, as_bytes(text));
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& where, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(where, line, "invalid number '" + s + "'");
  }
}

HomogeneousTransform parse_matrix(const std::vector<std::string>& f, std::size_t offset, const std::string& where,
                                  std::size_t line) {
  Eigen::Matrix4d m;
  for (int i = 0; i < 16; ++i) m(i / 4, i % 4) = parse_number(f[offset + static_cast<std::size_t>(i)], where, line);
  if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0)
    throw FormatError(where, line, "last matrix row must be 0,0,0,1");
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  if ((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6 || r.determinant() < 0.0)
    throw FormatError(where, line, "rotation block is not a rotation");
  return HomogeneousTransform::from_rt(orthonormalize(r), m.topRightCorner<3, 1>());
}

}  // namespace

PoseLog parse_pose_log(const fs::path& path, double rate_hz) {
  const std::string where = path.string();
  std::istringstream in(read_text(path));
  PoseLog log;
  log.rate_hz = rate_hz;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_fields(line);
    const double index = static_cast<double>(log.samples.size());
    PoseSample s;
    if (f.size() == 16) {
      s.timestamp = rate_hz > 0.0 ? index / rate_hz : index;
      s.pose = parse_matrix(f, 0, where, line_no);
    } else if (f.size() == 17) {
      s.timestamp = parse_number(f[0], where, line_no);
      s.pose = parse_matrix(f, 1, where, line_no);
    } else if (f.size() == 2 && f[1] == "missing") {
      s.timestamp = parse_number(f[0], where, line_no);
    } else if (f.size() == 1 && f[0] == "missing") {
      s.timestamp = rate_hz > 0.0 ? index / rate_hz : index;
    } else {
      throw FormatError(where, line_no, "expected 16 matrix values (or 17 with a timestamp), got " +
                                            std::to_string(f.size()));
    }
    if (!log.samples.empty() && !(s.timestamp > log.samples.back().timestamp))
      throw FormatError(where, line_no, "timestamps must be strictly increasing");
    log.samples.push_back(std::move(s));
  }
  if (log.samples.empty()) throw FormatError(where, 0, "pose log holds no samples");
  return log;
}

HomogeneousTransform read_transform_file(const fs::path& path) {
  const PoseLog log = parse_pose_log(path);
  if (!log.samples.front().pose) throw FormatError(path.string(), 1, "transform is missing");
  return *log.samples.front().pose;
}

// ---- Intrinsics -------------------------------------------------------------

CameraIntrinsics intrinsics_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw FormatError(where, 0, "intrinsics must be a JSON object");
  auto num = [&](const char* key) {
    if (!j.contains(key)) throw FormatError(where, 0, std::string("missing key '") + key + "'");
    if (!j.at(key).is_number()) throw FormatError(where, 0, std::string("key '") + key + "' must be a number");
    return j.at(key).get<double>();
  };
  auto integer = [&](const char* key) {
    const double v = num(key);
    if (v != std::floor(v)) throw FormatError(where, 0, std::string("key '") + key + "' must be an integer");
    return static_cast<int>(v);
  };
  CameraIntrinsics k;
  k.width = integer("width");
  k.height = integer("height");
  k.cx = num("cx");
  k.cy = num("cy");
  k.a0 = num("a0");
  k.a2 = num("a2");
  k.a3 = num("a3");
  k.a4 = num("a4");
  k.e = num("e");
  k.f = num("f");
  k.g = num("g");
  k.validate();
  return k;
}

json intrinsics_to_json(const CameraIntrinsics& k) {
  return {{"width", k.width}, {"height", k.height}, {"cx", k.cx}, {"cy", k.cy}, {"a0", k.a0}, {"a2", k.a2},
          {"a3", k.a3},       {"a4", k.a4},         {"e", k.e},   {"f", k.f},   {"g", k.g}};
}

CameraIntrinsics parse_intrinsics(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string(), 0, e.what());
  }
  return intrinsics_from_json(j, path.string());
}

// ---- Coverage ---------------------------------------------------------------

std::string format_coverage(const CoverageMap& coverage) {
  std::string out;
  for (std::size_t i = 0; i < coverage.size(); ++i)
    out += std::to_string(i) + (coverage[i] ? ",1\n" : ",0\n");
  return out;
}

CoverageMap parse_coverage(const fs::path& path) {
  std::istringstream in(read_text(path));
  CoverageMap out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 2 || (f[1] != "0" && f[1] != "1"))
      throw FormatError(path.string(), line_no, "expected 'face_index,flag' with flag 0 or 1");
    if (f[0] != std::to_string(out.size())) throw FormatError(path.string(), line_no, "face indices must be sequential");
    out.push_back(f[1] == "1");
  }
  return out;
}

// ---- Sequence writer -------------------------------------------------------

namespace {

std::string frame_name(std::size_t i, const char* kind) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04zu_%s.png", i, kind);
  return buf;
}

struct StagedFile {
  std::string path;
  std::string kind;
  long frame;
  std::vector<std::uint8_t> bytes;
};

}  // namespace

json write_sequence(const fs::path& dir, const SequenceData& seq, const WriteOptions& opt) {
  const std::size_t n = seq.depth.size();
  if (n == 0) throw InvalidArgument("cannot write an empty sequence");
  if (seq.normals.size() != n || seq.occlusion.size() != n || seq.poses.size() != n)
    throw InvalidArgument("depth, normal, occlusion and pose counts must match");
  if (seq.flow.size() != n - 1) throw InvalidArgument("a sequence of N frames carries N-1 flow frames");
  const int w = seq.depth[0].width(), h = seq.depth[0].height();
  for (std::size_t i = 0; i < n; ++i)
    if (!seq.depth[i].depth.same_shape(w, h) || !seq.normals[i].normal.same_shape(w, h) ||
        !seq.occlusion[i].same_shape(w, h) || (i + 1 < n && !seq.flow[i].flow.same_shape(w, h)))
      throw InvalidArgument("frame " + std::to_string(i) + " has inconsistent dimensions");

  // Encode everything before touching the file system.
  std::vector<StagedFile> files;
  for (std::size_t i = 0; i < n; ++i) {
    const long fi = static_cast<long>(i);
    files.push_back({frame_name(i, "depth"), "depth", fi, png_bytes(encode_frame(seq.depth[i]))});
    files.push_back({frame_name(i, "normals"), "normals", fi, png_bytes(encode_frame(seq.normals[i]))});
    if (i > 0) files.push_back({frame_name(i, "flow"), "flow", fi, png_bytes(encode_frame(seq.flow[i - 1]))});
    files.push_back({frame_name(i, "occlusion"), "occlusion", fi, png_bytes(encode_frame(seq.occlusion[i]))});
  }
  std::string poses;
  for (const auto& p : seq.poses) poses += format_pose_line(p) + "\n";
  const std::string coverage = format_coverage(seq.coverage);
  files.push_back({"poses.txt", "poses", -1, {poses.begin(), poses.end()}});
  files.push_back({"coverage.txt", "coverage", -1, {coverage.begin(), coverage.end()}});

  json manifest;
  manifest["frame_count"] = n;
  manifest["width"] = w;
  manifest["height"] = h;
  manifest["mesh"] = seq.mesh_reference;
  manifest["files"] = json::array();
  for (const auto& f : files) {
    json e{{"path", f.path}, {"kind", f.kind}, {"sha256", sha256_hex(f.bytes)}, {"bytes", f.bytes.size()}};
    if (f.frame >= 0) e["frame"] = f.frame;
    manifest["files"].push_back(std::move(e));
  }

  const fs::path target = fs::absolute(dir).lexically_normal();
  const fs::path staging = target.parent_path() / ("." + target.filename().string() + ".staging");
  std::error_code ec;
  try {
    if (fs::exists(target) && !fs::exists(target / "manifest.json"))
      throw WriteError("refusing to replace " + target.string() + ": it is not a sequence directory");
    fs::remove_all(staging, ec);
    fs::create_directories(staging);
    for (const auto& f : files) {
      write_bytes(staging / f.path, f.bytes);
      if (opt.on_file_staged) opt.on_file_staged(staging / f.path);
    }
    const std::string text = manifest.dump(2) + "\n";
    write_bytes(staging / "manifest.json", as_bytes(text));
    // The previous sequence is moved aside, not deleted, until the new one
    // is in place.
    const fs::path retired = target.parent_path() / ("." + target.filename().string() + ".old");
    fs::remove_all(retired, ec);
    const bool replacing = fs::exists(target);
    if (replacing) fs::rename(target, retired);
    try {
      fs::rename(staging, target);
    } catch (...) {
      if (replacing) fs::rename(retired, target, ec);
      throw;
    }
    if (replacing) fs::remove_all(retired, ec);
  } catch (const WriteError&) {
    fs::remove_all(staging, ec);
    throw;
  } catch (const std::exception& e) {
    fs::remove_all(staging, ec);
    throw WriteError("writing " + target.string() + " failed: " + e.what());
  }
  return manifest;
}

// ---- Session file ------------------------------------------------------------

namespace {

HomogeneousTransform transform_from_json(const json& j, const fs::path& base, const std::string& where,
                                         const char* key) {
  if (j.is_string()) return read_transform_file(base / j.get<std::string>());
  if (j.is_array() && j.size() == 16) {
    std::vector<std::string> f;
    for (const auto& v : j) {
      if (!v.is_number()) throw FormatError(where, 0, std::string("'") + key + "' must hold numbers");
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
      f.emplace_back(buf);
    }
    return parse_matrix(f, 0, where + " (" + key + ")", 0);
  }
  throw FormatError(where, 0, std::string("'") + key + "' must be 16 row-major values or a pose file path");
}

}  // namespace

SessionFile load_session_file(const fs::path& path) {
  const std::string where = path.string();
  SessionFile s;
  s.path = path;
  try {
    s.raw = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw FormatError(where, 0, e.what());
  }
  const json& j = s.raw;
  const fs::path base = path.parent_path();
  auto need = [&](const char* key) -> const json& {
    if (!j.contains(key)) throw FormatError(where, 0, std::string("missing key '") + key + "'");
    return j.at(key);
  };
  try {
    s.mesh = base / need("mesh").get<std::string>();
    const json& k = need("intrinsics");
    s.intrinsics = k.is_string() ? parse_intrinsics(base / k.get<std::string>()) : intrinsics_from_json(k, where);
    s.pose_log = base / need("poses").get<std::string>();
    s.pose_rate_hz = j.value("pose_rate_hz", 0.0);
    for (const auto& t : need("targets")) s.targets.push_back({t.at("frame").get<int>(), base / t.at("depth").get<std::string>()});
    s.t_initial = j.contains("t_initial") ? transform_from_json(j.at("t_initial"), base, where, "t_initial")
                                          : HomogeneousTransform::identity();
    if (j.contains("bounds")) {
      s.bound_rotation = j.at("bounds").value("rotation", s.bound_rotation);
      s.bound_translation = j.at("bounds").value("translation", s.bound_translation);
    }
    s.cmaes = RegistrationSession::registration_defaults();
    if (j.contains("cmaes")) {
      const json& c = j.at("cmaes");
      s.cmaes.population = c.value("population", s.cmaes.population);
      s.cmaes.sigma = c.value("sigma", s.cmaes.sigma);
      s.cmaes.max_generations = c.value("max_generations", s.cmaes.max_generations);
      s.cmaes.stagnation_tol = c.value("stagnation_tol", s.cmaes.stagnation_tol);
      s.cmaes.tol_x = c.value("tol_x", s.cmaes.tol_x);
    }
    s.cmaes.seed = j.value("seed", s.cmaes.seed);
    if (j.contains("edges")) {
      const json& e = j.at("edges");
      s.edges.canny_low = e.value("canny_low", s.edges.canny_low);
      s.edges.canny_high = e.value("canny_high", s.edges.canny_high);
      s.edges.blur_sigma = e.value("blur_sigma", s.edges.blur_sigma);
      s.edges.blur_radius = e.value("blur_radius", static_cast<int>(std::ceil(3.0 * s.edges.blur_sigma)));
    }
    s.downsample = j.value("downsample", s.downsample);
    if (j.contains("handeye")) {
      const json& he = j.at("handeye");
      s.handeye_x = transform_from_json(he.at("x"), base, where, "handeye.x");
      s.handeye_a_cal = transform_from_json(he.at("a_cal"), base, where, "handeye.a_cal");
      s.handeye_b_cal = transform_from_json(he.at("b_cal"), base, where, "handeye.b_cal");
    }
    s.sync_offset = j.value("sync_offset", 0);
  } catch (const json::exception& e) {
    throw FormatError(where, 0, e.what());
  }
  s.intrinsics.validate();
  s.edges.validate();
  s.cmaes.validate();
  return s;
}

std::vector<HomogeneousTransform> session_camera_poses(const SessionFile& s) {
  PoseLog log = parse_pose_log(s.pose_log, s.pose_rate_hz);
  if (log.has_gaps()) log = interpolate_gaps(log);
  std::vector<HomogeneousTransform> poses = log.poses();
  if (s.handeye_x)
    for (auto& p : poses) p = robot_to_camera(p, *s.handeye_x, *s.handeye_a_cal, *s.handeye_b_cal);
  if (s.sync_offset == 0) return poses;
  std::vector<HomogeneousTransform> shifted;
  for (long i = 0;; ++i) {
    const long j = i + s.sync_offset;
    if (j >= static_cast<long>(poses.size())) break;
    if (j < 0) throw InvalidArgument("synchronization offset leaves frame " + std::to_string(i) + " without a pose");
    shifted.push_back(poses[static_cast<std::size_t>(j)]);
  }
  return shifted;
}

RegistrationSession build_registration_session(const SessionFile& s, std::optional<int> keyframes) {
  if (s.targets.empty()) throw InvalidArgument("session lists no target frames");
  const auto poses = session_camera_poses(s);
  std::vector<SessionFile::Target> chosen = s.targets;
  if (keyframes) {
    chosen.clear();
    for (int i : sample_keyframes(static_cast<int>(s.targets.size()), *keyframes))
      chosen.push_back(s.targets[static_cast<std::size_t>(i)]);
  }
  RegistrationSession r;
  r.accel = std::make_shared<const AccelStructure>(std::make_shared<const TriangleMesh>(load_mesh(s.mesh)));
  r.intrinsics = s.intrinsics;
  for (const auto& t : chosen) {
    if (t.frame < 0 || t.frame >= static_cast<int>(poses.size()))
      throw InvalidArgument("target frame " + std::to_string(t.frame) + " has no camera pose");
    r.keyframes.push_back({t.frame, poses[static_cast<std::size_t>(t.frame)], decode_depth(read_png(t.depth))});
  }
  r.t_initial = s.t_initial;
  r.bounds = BoundsSpec::registration(s.bound_rotation, s.bound_translation);
  r.optimizer = s.cmaes;
  r.edges = s.edges;
  r.downsample = s.downsample;
  r.validate();
  return r;
}

}  // namespace lumenreg
