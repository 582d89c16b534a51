#pragma once

#include "handfk/preproc.hpp"
#include "handfk/skeleton.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace handfk {

// Expected directory layouts:
//
// icvl      labels.txt, one frame per line: "<png path> u0 v0 d0 ... u15 v15 d15"
//           (pixel coordinates, depth in mm). Depth PNGs are 16-bit gray in mm.
// nyu       joints.txt, one frame per line: "<png path> x0 y0 z0 ... x35 y35 z35"
//           in mm with y pointing up. Depth PNGs are 8-bit RGB with
//           depth_mm = (G << 8) | B.
// msra2015  P*/<gesture>/joint.txt: a frame count, then one line of 21 x 3
//           floats per frame (y up, z negative). Frame i is
//           P*/<gesture>/<i as %06d>_depth.bin: int32 width, height, left,
//           top, right, bottom, then float32 depth in mm for the bounding
//           box, row-major.
//
// Subject ids are the first component of the png path (icvl, nyu) or the P*
// directory name (msra2015). Missing label files mean an empty dataset.
enum class DatasetKind { icvl, nyu, msra2015 };

DatasetKind parse_dataset_kind(std::string_view text);
std::string_view to_string(DatasetKind kind);

CameraIntrinsics default_intrinsics(DatasetKind kind);
int raw_joint_count(DatasetKind kind);

/// Mapping table text shipped with the library.
std::string_view bundled_joint_map(DatasetKind kind);

/// True when every bone of `joints` is between lo and hi mm long.
bool bones_plausible(const JointSet& joints, const KinematicTree& tree, double lo_mm = 10.0, double hi_mm = 120.0);

struct DatasetOptions {
  CropSpec crop;
  std::optional<CameraIntrinsics> intrinsics;
  std::optional<std::string> joint_map_text;
};

struct CorpusSummary {
  DatasetKind kind = DatasetKind::icvl;
  int frames_written = 0;
  int frames_skipped = 0;
  int subjects = 0;
  // Written frames whose remapped bones fall outside the plausibility band.
  int implausible = 0;
  std::vector<std::string> skip_reasons;
};

std::string format_summary(const CorpusSummary& summary);

/// Streams every frame of a dataset directory through remap_joints and
/// crop_normalize into a corpus file. Unreadable frames are skipped and counted.
CorpusSummary build_corpus(
    const std::string& dataset_dir,
    DatasetKind kind,
    const std::string& out_path,
    const KinematicTree& tree,
    const DatasetOptions& options = {});

} // namespace handfk
