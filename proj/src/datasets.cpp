#include "handfk/datasets.hpp"

#include "handfk/corpus.hpp"
#include "handfk/errors.hpp"
#include "handfk/png_io.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace handfk {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModule = "preproc";
constexpr std::size_t kMaxSkipReasons = 20;

struct RawFrame {
  DepthImage depth;
  Eigen::Matrix3Xd joints;  // mm, camera frame
  std::string subject;
  std::string frame;
};

// Tag fields are fixed width; keep the most specific (trailing) part.
std::string fit_width(const std::string& text, std::size_t width) {
  return text.size() <= width ? text : text.substr(text.size() - width);
}

std::string first_component(const std::string& rel) {
  const auto slash = rel.find('/');
  return slash == std::string::npos ? std::string("default") : rel.substr(0, slash);
}

std::vector<double> parse_numbers(std::istringstream& fields, std::size_t expected, const std::string& where) {
  std::vector<double> values;
  values.reserve(expected);
  double v = 0.0;
  while (fields >> v) {
    values.push_back(v);
  }
  if (!fields.eof() || values.size() != expected) {
    throw ParseError(kModule, where + ": expected " + std::to_string(expected) + " numbers");
  }
  return values;
}

DepthImage depth_from_gray16(const Image<std::uint16_t>& img) {
  DepthImage d{img.width, img.height, {}};
  d.values.assign(img.data.begin(), img.data.end());
  return d;
}

DepthImage depth_from_rgb8(const Image<std::uint8_t>& img) {
  DepthImage d{img.width, img.height, {}};
  d.values.resize(static_cast<std::size_t>(img.width) * img.height);
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    const unsigned g = img.data[3 * i + 1];
    const unsigned b = img.data[3 * i + 2];
    d.values[i] = static_cast<float>((g << 8) | b);
  }
  return d;
}

DepthImage read_msra_bin(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw RuntimeFailure(kModule, "cannot open '" + path.string() + "'");
  }
  std::int32_t header[6];
  if (!in.read(reinterpret_cast<char*>(header), sizeof(header))) {
    throw ParseError(kModule, path.string() + ": truncated header");
  }
  const int width = header[0], height = header[1];
  const int left = header[2], top = header[3], right = header[4], bottom = header[5];
  if (width <= 0 || height <= 0 || left < 0 || top < 0 || right > width || bottom > height || left >= right ||
      top >= bottom) {
    throw ParseError(kModule, path.string() + ": invalid header");
  }
  DepthImage d{width, height, std::vector<float>(static_cast<std::size_t>(width) * height, 0.0f)};
  std::vector<float> box(static_cast<std::size_t>(right - left) * (bottom - top));
  if (!in.read(reinterpret_cast<char*>(box.data()), static_cast<std::streamsize>(box.size() * sizeof(float)))) {
    throw ParseError(kModule, path.string() + ": truncated depth payload");
  }
  for (int r = top; r < bottom; ++r) {
    std::copy_n(
        box.begin() + static_cast<std::ptrdiff_t>(r - top) * (right - left), right - left,
        d.values.begin() + static_cast<std::ptrdiff_t>(r) * width + left);
  }
  return d;
}

using FrameSink = std::function<void(RawFrame)>;
using SkipSink = std::function<void(const std::string&)>;

// "<png path> <numbers...>" label files shared by icvl and nyu.
void walk_label_file(
    const fs::path& root,
    const std::string& label_name,
    DatasetKind kind,
    const CameraIntrinsics& cam,
    const FrameSink& emit,
    const SkipSink& skip) {
  std::ifstream labels(root / label_name);
  if (!labels) {
    return;
  }
  const int raw_joints = raw_joint_count(kind);
  std::string line;
  int lineno = 0;
  while (std::getline(labels, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::string rel;
    if (!(fields >> rel) || rel.front() == '#') {
      continue;
    }
    const std::string where = label_name + " line " + std::to_string(lineno);
    try {
      const auto values = parse_numbers(fields, static_cast<std::size_t>(3 * raw_joints), where);
      RawFrame frame;
      frame.joints.resize(3, raw_joints);
      for (int j = 0; j < raw_joints; ++j) {
        const double a = values[3 * j], b = values[3 * j + 1], c = values[3 * j + 2];
        if (kind == DatasetKind::icvl) {
          frame.joints.col(j) = back_project(a, b, c, cam);
        } else {
          frame.joints.col(j) = Eigen::Vector3d(a, -b, c);
        }
      }
      const std::string png = (root / rel).string();
      frame.depth = kind == DatasetKind::icvl ? depth_from_gray16(read_png_gray16(png))
                                              : depth_from_rgb8(read_png_rgb8(png));
      frame.subject = first_component(rel);
      frame.frame = rel;
      emit(std::move(frame));
    } catch (const Error& e) {
      skip(where + ": " + e.what());
    }
  }
}

void walk_msra(const fs::path& root, const FrameSink& emit, const SkipSink& skip) {
  if (!fs::is_directory(root)) {
    return;
  }
  std::vector<fs::path> subjects;
  for (const auto& entry : fs::directory_iterator(root)) {
    const auto name = entry.path().filename().string();
    if (entry.is_directory() && !name.empty() && name[0] == 'P') {
      subjects.push_back(entry.path());
    }
  }
  std::sort(subjects.begin(), subjects.end());
  const int raw_joints = raw_joint_count(DatasetKind::msra2015);
  for (const auto& subject : subjects) {
    std::vector<fs::path> gestures;
    for (const auto& entry : fs::directory_iterator(subject)) {
      if (entry.is_directory()) {
        gestures.push_back(entry.path());
      }
    }
    std::sort(gestures.begin(), gestures.end());
    for (const auto& gesture : gestures) {
      const std::string rel_dir = subject.filename().string() + "/" + gesture.filename().string();
      std::ifstream labels(gesture / "joint.txt");
      if (!labels) {
        skip(rel_dir + ": missing joint.txt");
        continue;
      }
      long long count = 0;
      if (!(labels >> count) || count < 0) {
        skip(rel_dir + "/joint.txt: bad frame count");
        continue;
      }
      std::string rest;
      std::getline(labels, rest);
      for (long long i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "%06lld_depth.bin", i);
        const std::string where = rel_dir + "/" + name;
        std::string line;
        if (!std::getline(labels, line)) {
          skip(where + ": missing annotation line");
          continue;
        }
        try {
          std::istringstream fields(line);
          const auto values = parse_numbers(fields, static_cast<std::size_t>(3 * raw_joints), where);
          RawFrame frame;
          frame.joints.resize(3, raw_joints);
          for (int j = 0; j < raw_joints; ++j) {
            frame.joints.col(j) = Eigen::Vector3d(values[3 * j], -values[3 * j + 1], -values[3 * j + 2]);
          }
          frame.depth = read_msra_bin(gesture / name);
          frame.subject = subject.filename().string();
          frame.frame = where;
          emit(std::move(frame));
        } catch (const Error& e) {
          skip(where + ": " + e.what());
        }
      }
    }
  }
}

} // namespace

DatasetKind parse_dataset_kind(std::string_view text) {
  if (text == "icvl") {
    return DatasetKind::icvl;
  }
  if (text == "nyu") {
    return DatasetKind::nyu;
  }
  if (text == "msra2015") {
    return DatasetKind::msra2015;
  }
  throw ValidationError(kModule, "unknown dataset kind '" + std::string(text) + "' (icvl, nyu, msra2015)");
}

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::icvl:
      return "icvl";
    case DatasetKind::nyu:
      return "nyu";
    case DatasetKind::msra2015:
      return "msra2015";
  }
  return "?";
}

CameraIntrinsics default_intrinsics(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::nyu:
      return {588.03, 587.07, 320.0, 240.0, 1.0};
    case DatasetKind::icvl:
    case DatasetKind::msra2015:
      return {241.42, 241.42, 160.0, 120.0, 1.0};
  }
  return {};
}

int raw_joint_count(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::icvl:
      return 16;
    case DatasetKind::nyu:
      return 36;
    case DatasetKind::msra2015:
      return 21;
  }
  return 0;
}

bool bones_plausible(const JointSet& joints, const KinematicTree& tree, double lo_mm, double hi_mm) {
  for (const auto& bone : tree.bones()) {
    const double len = (joints.positions.col(bone.child) - joints.positions.col(bone.parent)).norm();
    if (!(len >= lo_mm && len <= hi_mm)) {
      return false;
    }
  }
  return true;
}

std::string format_summary(const CorpusSummary& s) {
  std::ostringstream out;
  out << "dataset " << to_string(s.kind) << "\n"
      << "frames_written " << s.frames_written << "\n"
      << "frames_skipped " << s.frames_skipped << "\n"
      << "subjects " << s.subjects << "\n"
      << "implausible_bones " << s.implausible << "\n";
  if (s.frames_written == 0) {
    out << "note corpus is empty\n";
  }
  for (const auto& reason : s.skip_reasons) {
    out << "skipped " << reason << "\n";
  }
  if (static_cast<std::size_t>(s.frames_skipped) > s.skip_reasons.size()) {
    out << "skipped ... " << (s.frames_skipped - static_cast<int>(s.skip_reasons.size())) << " more\n";
  }
  return out.str();
}

CorpusSummary build_corpus(
    const std::string& dataset_dir,
    DatasetKind kind,
    const std::string& out_path,
    const KinematicTree& tree,
    const DatasetOptions& options) {
  check_crop(options.crop);
  const CameraIntrinsics cam = options.intrinsics.value_or(default_intrinsics(kind));
  check_intrinsics(cam);
  const JointMap map =
      parse_joint_map(options.joint_map_text ? *options.joint_map_text : bundled_joint_map(kind), tree);
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map[i] >= raw_joint_count(kind)) {
      throw ValidationError(
          kModule, "joint map slot " + std::to_string(i) + " references raw joint " + std::to_string(map[i]) +
                       " but " + std::string(to_string(kind)) + " frames have " +
                       std::to_string(raw_joint_count(kind)));
    }
  }

  CorpusSummary summary;
  summary.kind = kind;
  std::set<std::string> subjects;
  CorpusWriter writer(out_path, options.crop, tree.joint_count());

  auto skip = [&](const std::string& reason) {
    ++summary.frames_skipped;
    if (summary.skip_reasons.size() < kMaxSkipReasons) {
      summary.skip_reasons.push_back(reason);
    }
  };
  auto emit = [&](RawFrame raw) {
    try {
      JointSet joints = remap_joints(raw.joints, map);
      const Eigen::Vector3d palm = joints.positions.col(0);
      SourceTag tag{
          std::string(to_string(kind)), fit_width(raw.subject, kTagSubjectWidth), fit_width(raw.frame, kTagFrameWidth)};
      Sample sample = crop_normalize(raw.depth, cam, palm, joints, options.crop, std::move(tag));
      writer.append(sample);
      ++summary.frames_written;
      subjects.insert(raw.subject);
      if (!bones_plausible(joints, tree)) {
        ++summary.implausible;
      }
    } catch (const ValidationError& e) {
      skip(raw.frame + ": " + e.what());
    }
  };

  switch (kind) {
    case DatasetKind::icvl:
      walk_label_file(dataset_dir, "labels.txt", kind, cam, emit, skip);
      break;
    case DatasetKind::nyu:
      walk_label_file(dataset_dir, "joints.txt", kind, cam, emit, skip);
      break;
    case DatasetKind::msra2015:
      walk_msra(dataset_dir, emit, skip);
      break;
  }
  writer.close();
  summary.subjects = static_cast<int>(subjects.size());
  return summary;
}

} // namespace handfk
