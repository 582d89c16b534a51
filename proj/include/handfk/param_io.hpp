#pragma once

#include "handfk/skeleton.hpp"
#include "handfk/solver.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace handfk {

// Plain-text parameter files. A file holds one or more blocks; each block is
// a header line followed by one value per line:
//
//   pose <count>
//   scales <global|five|multi> <count>
//   joints <frames> <joints per frame>      values ordered frame, joint, x/y/z
//
// Blank lines and lines starting with '#' are ignored. Values are written in
// shortest round-trip form.
struct ParamFile {
  std::optional<PoseVector> pose;
  std::optional<ScaleVector> scales;
  std::vector<JointSet> joints;
};

ParamFile parse_params(std::string_view text);
ParamFile read_params(const std::string& path);

std::string format_number(double value);
std::string format_pose(const PoseVector& pose);
std::string format_scales(const ScaleVector& scales);
std::string format_joints(std::span<const JointSet> frames);
std::string format_fit_report(const FitReport& report);

std::string read_text_file(const std::string& path, const char* module);
void write_text_file(const std::string& path, std::string_view text, const char* module);

} // namespace handfk
