#include "mononext/kitti_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "mononext/error.hpp"

namespace mononext {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::optional<double> to_double(std::string_view token) {
  double value = 0.0;
  const char* first = token.data();
  if (!token.empty() && token.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) return std::nullopt;
  return value;
}

std::string fmt(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

LabelRecord parse_label_line(std::string_view line, int line_number) {
  const auto fields = split_ws(line);
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError("label line " + std::to_string(line_number) + ": " + what);
  };
  if (fields.size() < 15 || fields.size() > 16) {
    throw fail("expected 15 or 16 fields, got " + std::to_string(fields.size()));
  }
  std::array<double, 16> num{};
  for (std::size_t i = 1; i < fields.size(); ++i) {
    const auto v = to_double(fields[i]);
    if (!v) throw fail("field " + std::to_string(i + 1) + " is not numeric ('" + std::string(fields[i]) + "')");
    num[i] = *v;
  }
  if (num[2] != std::floor(num[2])) throw fail("field 3 (occlusion) is not an integer");

  LabelRecord rec;
  rec.class_name = std::string(fields[0]);
  rec.truncation = num[1];
  rec.occlusion = static_cast<int>(num[2]);
  rec.alpha = num[3];
  rec.bbox2d = {num[4], num[5], num[6], num[7]};
  rec.dims = {num[8], num[9], num[10]};
  rec.location = {num[11], num[12], num[13]};
  rec.rotation_y = num[14];
  if (fields.size() == 16) rec.score = num[15];
  return rec;
}

std::string format_label_line(const LabelRecord& r) {
  std::string out = r.class_name;
  auto add = [&](double v) {
    out += ' ';
    out += fmt(v);
  };
  add(r.truncation);
  out += ' ' + std::to_string(r.occlusion);
  add(r.alpha);
  for (double v : r.bbox2d) add(v);
  for (double v : r.dims) add(v);
  for (double v : r.location) add(v);
  add(r.rotation_y);
  if (r.score) add(*r.score);
  return out;
}

std::vector<LabelRecord> parse_label_file(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  std::vector<LabelRecord> out;
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (split_ws(line).empty()) continue;
    try {
      out.push_back(parse_label_line(line, line_number));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }
  return out;
}

void write_label_file(const std::filesystem::path& path, const std::vector<LabelRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) out << format_label_line(r) << '\n';
}

std::optional<std::array<double, 2>> CalibBundle::project(const Vec3& p) const {
  const double u = at(0, 0) * p.x + at(0, 1) * p.y + at(0, 2) * p.z + at(0, 3);
  const double v = at(1, 0) * p.x + at(1, 1) * p.y + at(1, 2) * p.z + at(1, 3);
  const double w = at(2, 0) * p.x + at(2, 1) * p.y + at(2, 2) * p.z + at(2, 3);
  if (!(w > 1e-6) || !(p.z > 0.0)) return std::nullopt;
  return std::array<double, 2>{u / w, v / w};
}

CalibBundle parse_calib_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto fields = split_ws(line);
    if (fields.empty() || fields[0] != "P2:") continue;
    if (fields.size() != 13) {
      throw ParseError("calibration: P2 needs 12 values, got " + std::to_string(fields.size() - 1));
    }
    CalibBundle calib;
    for (int i = 0; i < 12; ++i) {
      const auto v = to_double(fields[i + 1]);
      if (!v || !std::isfinite(*v)) throw ParseError("calibration: P2 entry " + std::to_string(i) + " is not a finite number");
      calib.p2[i] = *v;
    }
    return calib;
  }
  throw ParseError("calibration: no 'P2:' line");
}

CalibBundle parse_calib(const std::filesystem::path& path) {
  try {
    return parse_calib_text(read_text(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_calib(const std::filesystem::path& path, const CalibBundle& calib) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P2:";
  for (double v : calib.p2) out << ' ' << fmt(v);
  out << '\n';
}

const char* to_string(Difficulty level) {
  switch (level) {
    case Difficulty::Easy: return "Easy";
    case Difficulty::Moderate: return "Moderate";
    case Difficulty::Hard: return "Hard";
    case Difficulty::Ignored: return "Ignored";
  }
  return "?";
}

Difficulty assign_difficulty(const LabelRecord& r) {
  const double height = r.bbox2d[3] - r.bbox2d[1];
  if (height >= 40.0 && r.occlusion <= 0 && r.truncation <= 0.15) return Difficulty::Easy;
  if (height >= 25.0 && r.occlusion <= 1 && r.truncation <= 0.30) return Difficulty::Moderate;
  if (height >= 25.0 && r.occlusion <= 2 && r.truncation <= 0.50) return Difficulty::Hard;
  return Difficulty::Ignored;
}

Frame load_frame(const std::filesystem::path& root, const std::string& frame_id) {
  Frame f;
  f.frame_id = frame_id;
  f.image = read_image(root / "image_2" / (frame_id + ".png"));
  f.labels = parse_label_file(root / "label_2" / (frame_id + ".txt"));
  f.calib = parse_calib(root / "calib" / (frame_id + ".txt"));
  return f;
}

void save_frame(const std::filesystem::path& root, const Frame& frame) {
  for (const char* sub : {"image_2", "label_2", "calib"}) std::filesystem::create_directories(root / sub);
  write_image(root / "image_2" / (frame.frame_id + ".png"), frame.image);
  write_label_file(root / "label_2" / (frame.frame_id + ".txt"), frame.labels);
  write_calib(root / "calib" / (frame.frame_id + ".txt"), frame.calib);
}

std::vector<std::string> list_frames(const std::filesystem::path& root) {
  std::vector<std::string> ids;
  const auto dir = root / "label_2";
  if (!std::filesystem::is_directory(dir)) return ids;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".txt") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<std::string> read_id_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("missing split file " + path.string());
  std::vector<std::string> ids;
  std::string token;
  while (in >> token) ids.push_back(token);
  return ids;
}

void write_id_file(const std::filesystem::path& path, const std::vector<std::string>& ids) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& id : ids) out << id << '\n';
}

SplitSpec make_split(const std::filesystem::path& image_set_dir,
                     const std::vector<std::string>& available) {
  const auto train_ids = read_id_file(image_set_dir / "train.txt");
  const auto val_ids = read_id_file(image_set_dir / "val.txt");
  const std::set<std::string> have(available.begin(), available.end());
  SplitSpec split;
  std::set<std::string> taken;
  for (const auto& id : train_ids) {
    if (have.contains(id) && taken.insert(id).second) split.train.push_back(id);
  }
  for (const auto& id : val_ids) {
    if (have.contains(id) && taken.insert(id).second) split.val.push_back(id);
  }
  return split;
}

SplitSpec make_seeded_split(std::vector<std::string> ids, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw ArgumentError("make_seeded_split: train fraction must lie in [0, 1]");
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ids.size())));
  SplitSpec split;
  split.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(cut));
  split.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(cut), ids.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  return split;
}

Frame flip_frame(const Frame& frame) {
  Frame out = frame;
  const double width = frame.image.width;
  out.image = mirror_horizontal(frame.image);
  for (auto& r : out.labels) {
    r.location[0] = -r.location[0];
    r.rotation_y = normalize_angle(std::numbers::pi - r.rotation_y);
    r.alpha = normalize_angle(std::numbers::pi - r.alpha);
    const double left = r.bbox2d[0];
    r.bbox2d[0] = width - r.bbox2d[2];
    r.bbox2d[2] = width - left;
  }
  // u' = W - u with x' = -x.
  auto& p = out.calib.p2;
  const auto& q = frame.calib.p2;
  p[0] = q[0] - width * q[8];
  for (int c = 1; c < 4; ++c) p[c] = width * q[8 + c] - q[c];
  p[4] = -q[4];
  p[8] = -q[8];
  return out;
}

Image adjust_contrast(const Image& image, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw ArgumentError("adjust_contrast: factor must be a positive finite number");
  }
  Image out = image;
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  if (n == 0) return out;
  for (int ch = 0; ch < 3; ++ch) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += image.pixels[i * 3 + ch];
    const double mean = sum / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = mean + factor * (image.pixels[i * 3 + ch] - mean);
      out.pixels[i * 3 + ch] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
    }
  }
  return out;
}

std::optional<int> ClassMap::id_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

BoxSpec label_to_box(const LabelRecord& r, int class_id) {
  BoxSpec b;
  b.h = r.dims[0];
  b.w = r.dims[1];
  b.l = r.dims[2];
  b.center = {r.location[0], r.location[1] - 0.5 * b.h, r.location[2]};
  b.yaw = normalize_angle(r.rotation_y);
  b.class_id = class_id;
  b.score = r.score;
  return b;
}

LabelRecord box_to_label(const BoxSpec& box, const std::string& class_name, const CalibBundle& calib,
                         int image_width, int image_height) {
  LabelRecord r;
  r.class_name = class_name;
  r.dims = {box.h, box.w, box.l};
  r.location = {box.center.x, box.center.y + 0.5 * box.h, box.center.z};
  r.rotation_y = box.yaw;
  r.alpha = normalize_angle(box.yaw - std::atan2(box.center.x, box.center.z));
  r.score = box.score;

  double left = 1e300, top = 1e300, right = -1e300, bottom = -1e300;
  bool any = false;
  for (const auto& corner : box_corners_3d(box)) {
    const auto uv = calib.project(corner);
    if (!uv) continue;
    any = true;
    left = std::min(left, (*uv)[0]);
    right = std::max(right, (*uv)[0]);
    top = std::min(top, (*uv)[1]);
    bottom = std::max(bottom, (*uv)[1]);
  }
  if (any) {
    const double w = image_width;
    const double h = image_height;
    r.bbox2d = {std::clamp(left, 0.0, w), std::clamp(top, 0.0, h), std::clamp(right, 0.0, w),
                std::clamp(bottom, 0.0, h)};
  }
  return r;
}

}  // namespace mononext
