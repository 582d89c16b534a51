#pragma once

#include "handfk/skeleton.hpp"

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace handfk {

struct MetricsReport {
  int frames = 0;
  double mean_joint_error_mm = 0.0;
  std::vector<double> per_joint_mean_mm;
  // (threshold_mm, fraction of frames whose largest joint error is <= threshold),
  // thresholds ascending.
  std::vector<std::pair<double, double>> threshold_curve;
};

MetricsReport evaluate(
    std::span<const JointSet> predictions,
    std::span<const JointSet> truths,
    std::span<const double> thresholds_mm);

/// Evenly spaced thresholds 0, step, ..., max_mm.
std::vector<double> threshold_range(double max_mm, double step_mm);

// Plot-data text, six decimals everywhere:
//
//   # mean_joint_error_mm <value>
//   # frames <n>
//
//   # per_joint
//   joint mean_error_mm
//   0 <value>
//   ...
//
//   # threshold_curve            (omitted when there are no thresholds)
//   threshold_mm fraction
//   <t> <f>
std::string format_curves(const MetricsReport& report);
void emit_curves(const MetricsReport& report, const std::string& out_path);
MetricsReport parse_curves(std::string_view text);

} // namespace handfk
