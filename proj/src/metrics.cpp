#include "handfk/metrics.hpp"

#include "handfk/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace handfk {

namespace {

constexpr const char* kModule = "evalkit";

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

} // namespace

MetricsReport evaluate(
    std::span<const JointSet> predictions,
    std::span<const JointSet> truths,
    std::span<const double> thresholds_mm) {
  if (predictions.size() != truths.size()) {
    throw ValidationError(
        kModule, "length mismatch: " + std::to_string(predictions.size()) + " predictions vs " +
                     std::to_string(truths.size()) + " truths");
  }
  if (predictions.empty()) {
    throw ValidationError(kModule, "no frames to evaluate");
  }
  const int joints = truths[0].size();
  for (std::size_t f = 0; f < truths.size(); ++f) {
    if (predictions[f].size() != joints || truths[f].size() != joints) {
      throw ValidationError(kModule, "frame " + std::to_string(f) + ": joint count differs from frame 0");
    }
  }
  std::vector<double> thresholds(thresholds_mm.begin(), thresholds_mm.end());
  for (double t : thresholds) {
    if (!std::isfinite(t) || t < 0.0) {
      throw ValidationError(kModule, "thresholds must be finite and non-negative");
    }
  }
  std::sort(thresholds.begin(), thresholds.end());

  MetricsReport r;
  r.frames = static_cast<int>(truths.size());
  r.per_joint_mean_mm.assign(joints, 0.0);
  std::vector<double> frame_max(truths.size(), 0.0);
  for (std::size_t f = 0; f < truths.size(); ++f) {
    for (int j = 0; j < joints; ++j) {
      const double dx = predictions[f].positions(0, j) - truths[f].positions(0, j);
      const double dy = predictions[f].positions(1, j) - truths[f].positions(1, j);
      const double dz = predictions[f].positions(2, j) - truths[f].positions(2, j);
      const double err = std::sqrt(dx * dx + dy * dy + dz * dz);
      if (!std::isfinite(err)) {
        throw ValidationError(kModule, "frame " + std::to_string(f) + " joint " + std::to_string(j) + ": non-finite error");
      }
      r.per_joint_mean_mm[j] += err;
      frame_max[f] = std::max(frame_max[f], err);
    }
  }
  double total = 0.0;
  for (auto& m : r.per_joint_mean_mm) {
    m /= static_cast<double>(r.frames);
    total += m;
  }
  r.mean_joint_error_mm = joints > 0 ? total / joints : 0.0;

  std::sort(frame_max.begin(), frame_max.end());
  for (double t : thresholds) {
    const auto within = std::upper_bound(frame_max.begin(), frame_max.end(), t) - frame_max.begin();
    r.threshold_curve.emplace_back(t, static_cast<double>(within) / static_cast<double>(r.frames));
  }
  return r;
}

std::vector<double> threshold_range(double max_mm, double step_mm) {
  if (!(step_mm > 0.0) || !(max_mm >= 0.0)) {
    throw ValidationError(kModule, "threshold range needs step > 0 and max >= 0");
  }
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor(max_mm / step_mm + 1e-9));
  for (long i = 0; i <= n; ++i) {
    out.push_back(static_cast<double>(i) * step_mm);
  }
  return out;
}

std::string format_curves(const MetricsReport& r) {
  std::ostringstream out;
  out << "# mean_joint_error_mm " << fixed6(r.mean_joint_error_mm) << "\n";
  out << "# frames " << r.frames << "\n\n";
  out << "# per_joint\njoint mean_error_mm\n";
  for (std::size_t j = 0; j < r.per_joint_mean_mm.size(); ++j) {
    out << j << " " << fixed6(r.per_joint_mean_mm[j]) << "\n";
  }
  if (!r.threshold_curve.empty()) {
    out << "\n# threshold_curve\nthreshold_mm fraction\n";
    for (const auto& [t, f] : r.threshold_curve) {
      out << fixed6(t) << " " << fixed6(f) << "\n";
    }
  }
  return out.str();
}

void emit_curves(const MetricsReport& report, const std::string& out_path) {
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw RuntimeFailure(kModule, "cannot open '" + out_path + "' for writing");
  }
  out << format_curves(report);
  if (!out) {
    throw RuntimeFailure(kModule, out_path + ": write failed");
  }
}

MetricsReport parse_curves(std::string_view text) {
  MetricsReport r;
  std::istringstream in{std::string(text)};
  std::string line;
  enum class Block { none, per_joint, curve } block = Block::none;
  bool header_pending = false;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw ParseError(kModule, "curves line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    std::istringstream fields(line);
    if (line[0] == '#') {
      std::string hash, key;
      fields >> hash >> key;
      if (key == "mean_joint_error_mm") {
        if (!(fields >> r.mean_joint_error_mm)) {
          fail("bad mean");
        }
      } else if (key == "frames") {
        if (!(fields >> r.frames)) {
          fail("bad frame count");
        }
      } else if (key == "per_joint") {
        block = Block::per_joint;
        header_pending = true;
      } else if (key == "threshold_curve") {
        block = Block::curve;
        header_pending = true;
      } else {
        fail("unknown block '" + key + "'");
      }
      continue;
    }
    if (header_pending) {
      header_pending = false;
      continue;
    }
    double a = 0.0, b = 0.0;
    if (!(fields >> a >> b)) {
      fail("expected two numbers");
    }
    if (block == Block::per_joint) {
      r.per_joint_mean_mm.push_back(b);
    } else if (block == Block::curve) {
      r.threshold_curve.emplace_back(a, b);
    } else {
      fail("data outside a block");
    }
  }
  return r;
}

} // namespace handfk
