#include "handfk/param_io.hpp"

#include "handfk/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace handfk {

namespace {

constexpr const char* kModule = "params";

class LineReader {
 public:
  explicit LineReader(std::string_view text) : in_(std::string(text)) {}

  // Next non-blank, non-comment line; false at end of input.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++lineno_;
      const auto start = line.find_first_not_of(" \t\r");
      if (start == std::string::npos || line[start] == '#') {
        continue;
      }
      line = line.substr(start);
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
        line.pop_back();
      }
      return true;
    }
    return false;
  }

  double value() {
    std::string line;
    if (!next(line)) {
      throw ParseError(kModule, "unexpected end of file after line " + std::to_string(lineno_));
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || ptr != line.data() + line.size()) {
      throw ParseError(kModule, "line " + std::to_string(lineno_) + ": expected one number, got '" + line + "'");
    }
    return v;
  }

  int lineno() const {
    return lineno_;
  }

 private:
  std::istringstream in_;
  int lineno_ = 0;
};

long long parse_count(std::istringstream& fields, const std::string& what, int lineno) {
  long long n = -1;
  if (!(fields >> n) || n < 0) {
    throw ParseError(kModule, "line " + std::to_string(lineno) + ": bad " + what);
  }
  return n;
}

} // namespace

ParamFile parse_params(std::string_view text) {
  ParamFile out;
  LineReader reader(text);
  std::string line;
  while (reader.next(line)) {
    std::istringstream fields(line);
    std::string kind;
    fields >> kind;
    const int at = reader.lineno();
    if (kind == "pose") {
      if (out.pose) {
        throw ParseError(kModule, "line " + std::to_string(at) + ": second pose block");
      }
      const auto n = parse_count(fields, "pose count", at);
      PoseVector p{Eigen::VectorXd(n)};
      for (long long i = 0; i < n; ++i) {
        p.theta[i] = reader.value();
      }
      out.pose = std::move(p);
    } else if (kind == "scales") {
      if (out.scales) {
        throw ParseError(kModule, "line " + std::to_string(at) + ": second scales block");
      }
      std::string mode;
      if (!(fields >> mode)) {
        throw ParseError(kModule, "line " + std::to_string(at) + ": scales header needs a mode");
      }
      ScaleVector s;
      try {
        s.mode = parse_scale_mode(mode);
      } catch (const Error&) {
        throw ParseError(kModule, "line " + std::to_string(at) + ": unknown scale mode '" + mode + "'");
      }
      const auto n = parse_count(fields, "scale count", at);
      s.values.resize(n);
      for (long long i = 0; i < n; ++i) {
        s.values[i] = reader.value();
      }
      out.scales = std::move(s);
    } else if (kind == "joints") {
      const auto frames = parse_count(fields, "frame count", at);
      const auto joints = parse_count(fields, "joint count", at);
      for (long long f = 0; f < frames; ++f) {
        JointSet js;
        js.positions.resize(3, joints);
        for (long long j = 0; j < joints; ++j) {
          for (int k = 0; k < 3; ++k) {
            js.positions(k, j) = reader.value();
          }
        }
        out.joints.push_back(std::move(js));
      }
    } else {
      throw ParseError(kModule, "line " + std::to_string(at) + ": unknown block '" + kind + "'");
    }
    std::string extra;
    if (fields >> extra) {
      throw ParseError(kModule, "line " + std::to_string(at) + ": trailing text in header");
    }
  }
  return out;
}

std::string read_text_file(const std::string& path, const char* module) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw RuntimeFailure(module, "cannot open '" + path + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text, const char* module) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw RuntimeFailure(module, "cannot open '" + path + "' for writing");
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) {
    throw RuntimeFailure(module, path + ": write failed");
  }
}

ParamFile read_params(const std::string& path) {
  try {
    return parse_params(read_text_file(path, kModule));
  } catch (const ParseError& e) {
    throw ParseError(kModule, path + ": " + std::string(e.what()).substr(std::string(kModule).size() + 2));
  }
}

std::string format_number(double value) {
  if (value == 0.0) {
    value = 0.0;  // print -0 as 0
  }
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string format_pose(const PoseVector& pose) {
  std::string out = "pose " + std::to_string(pose.theta.size()) + "\n";
  for (Eigen::Index i = 0; i < pose.theta.size(); ++i) {
    out += format_number(pose.theta[i]) + "\n";
  }
  return out;
}

std::string format_scales(const ScaleVector& scales) {
  std::string out =
      "scales " + std::string(to_string(scales.mode)) + " " + std::to_string(scales.values.size()) + "\n";
  for (Eigen::Index i = 0; i < scales.values.size(); ++i) {
    out += format_number(scales.values[i]) + "\n";
  }
  return out;
}

std::string format_joints(std::span<const JointSet> frames) {
  const int joints = frames.empty() ? 0 : frames.front().size();
  std::string out = "joints " + std::to_string(frames.size()) + " " + std::to_string(joints) + "\n";
  for (const auto& js : frames) {
    if (js.size() != joints) {
      throw ValidationError(kModule, "joint frames differ in joint count");
    }
    for (int j = 0; j < joints; ++j) {
      for (int k = 0; k < 3; ++k) {
        out += format_number(js.positions(k, j)) + "\n";
      }
    }
  }
  return out;
}

std::string format_fit_report(const FitReport& r) {
  std::ostringstream out;
  out << "# converged " << (r.converged ? 1 : 0) << "\n"
      << "# iterations " << r.iterations << "\n"
      << "# initial_cost " << format_number(r.initial_cost) << "\n"
      << "# final_cost " << format_number(r.final_cost) << "\n"
      << "# projected_gradient_norm " << format_number(r.projected_gradient_norm) << "\n";
  out << format_pose(r.theta_hat) << format_scales(r.s_hat);
  return out.str();
}

} // namespace handfk
