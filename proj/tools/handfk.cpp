// handfk: command-line front end for the hand kinematics library.
//
//   handfk [--tree PATH] [--seed N] [--mode global|five|multi] <command> [flags]
//
// Every command prints its resolved configuration as '#' lines on stdout
// before doing any work. Exit codes: 0 ok, 1 invalid input, 2 runtime failure.

#include "handfk/corpus.hpp"
#include "handfk/datasets.hpp"
#include "handfk/errors.hpp"
#include "handfk/fk.hpp"
#include "handfk/metrics.hpp"
#include "handfk/param_io.hpp"
#include "handfk/preproc.hpp"
#include "handfk/skeleton.hpp"
#include "handfk/solver.hpp"
#include "handfk/synth.hpp"
#include "handfk/toynet.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

using namespace handfk;

namespace {

constexpr const char* kModule = "cli";
constexpr const char* kTreeEnv = "HANDFK_TREE";

struct Globals {
  std::string tree_path;
  std::uint64_t seed = 0;
  std::string mode = "five";
  bool mode_given = false;
};

class ConfigPrinter {
 public:
  explicit ConfigPrinter(std::string command) : command_(std::move(command)) {}

  template <typename T>
  ConfigPrinter& add(const std::string& key, const T& value) {
    std::ostringstream v;
    v << value;
    items_.emplace_back(key, v.str());
    return *this;
  }
  ConfigPrinter& add(const std::string& key, double value) {
    items_.emplace_back(key, format_number(value));
    return *this;
  }
  ConfigPrinter& add(const std::string& key, bool value) {
    items_.emplace_back(key, value ? "true" : "false");
    return *this;
  }

  void print() const {
    std::cout << "# command " << command_ << "\n";
    for (const auto& [k, v] : items_) {
      std::cout << "# " << k << " " << v << "\n";
    }
    std::cout.flush();
  }

 private:
  std::string command_;
  std::vector<std::pair<std::string, std::string>> items_;
};

struct Context {
  KinematicTree tree;
  std::string tree_source;
  ScaleMode mode;
};

Context resolve(const Globals& g) {
  std::string path = g.tree_path;
  if (path.empty()) {
    if (const char* env = std::getenv(kTreeEnv); env != nullptr && *env != '\0') {
      path = env;
    }
  }
  const ScaleMode mode = parse_scale_mode(g.mode);
  if (path.empty()) {
    return {default_tree(), "bundled", mode};
  }
  return {load_tree_file(path), path, mode};
}

void base_config(ConfigPrinter& cfg, const Context& ctx, const Globals& g) {
  cfg.add("tree", ctx.tree_source).add("seed", g.seed).add("mode", to_string(ctx.mode));
}

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
  } else {
    write_text_file(path, text, kModule);
  }
}

FitAlgorithm parse_algorithm(const std::string& text) {
  if (text == "gauss-newton") {
    return FitAlgorithm::gauss_newton;
  }
  if (text == "descent") {
    return FitAlgorithm::descent;
  }
  throw ValidationError(kModule, "unknown algorithm '" + text + "' (gauss-newton, descent)");
}

std::vector<int> parse_hidden(const std::string& text) {
  std::vector<int> sizes;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v <= 0) {
        throw std::invalid_argument(item);
      }
      sizes.push_back(v);
    } catch (const std::logic_error&) {
      throw ValidationError(kModule, "--hidden: expected comma-separated positive widths, got '" + text + "'");
    }
  }
  return sizes;
}

// --- fk --------------------------------------------------------------------

struct FkArgs {
  std::string params;
  std::string out;
};

int run_fk(const Globals& g, const FkArgs& a) {
  const Context ctx = resolve(g);
  ConfigPrinter cfg("fk");
  base_config(cfg, ctx, g);
  cfg.add("params", a.params.empty() ? "(zero pose, unit scales)" : a.params)
      .add("out", a.out.empty() ? "stdout" : a.out);
  cfg.print();

  ParamFile params;
  if (!a.params.empty()) {
    params = read_params(a.params);
  }
  const PoseVector pose = params.pose.value_or(zero_pose(ctx.tree));
  const ScaleVector scales = params.scales.value_or(unit_scales(ctx.tree, ctx.mode));
  const JointSet joints = forward(pose, scales, ctx.tree).joints;
  write_or_print(a.out, format_joints(std::span<const JointSet>(&joints, 1)));
  return 0;
}

// --- gradcheck ---------------------------------------------------------------

struct GradcheckArgs {
  int n = 200;
  double tol = 1e-6;
  double abs_floor = 1e-9;
  double h_theta = 1e-3;
  double h_s = 1e-3;
  double margin = 0.8;
};

int run_gradcheck(const Globals& g, const GradcheckArgs& a) {
  const Context ctx = resolve(g);
  if (a.n <= 0) {
    throw ValidationError(kModule, "--n must be positive");
  }
  std::vector<ScaleMode> modes;
  if (g.mode_given) {
    modes.push_back(ctx.mode);
  } else {
    modes = {ScaleMode::global, ScaleMode::five, ScaleMode::multi};
  }
  ConfigPrinter cfg("gradcheck");
  cfg.add("tree", ctx.tree_source).add("seed", g.seed);
  std::string mode_list;
  for (auto m : modes) {
    mode_list += (mode_list.empty() ? "" : ",") + std::string(to_string(m));
  }
  cfg.add("modes", mode_list).add("n", a.n).add("tol", a.tol).add("abs_floor", a.abs_floor);
  cfg.add("h_theta", a.h_theta).add("h_s", a.h_s).add("margin", a.margin);
  cfg.print();

  bool ok = true;
  for (auto mode : modes) {
    std::mt19937_64 rng(g.seed);
    double worst_pose = 0.0;
    double worst_scale = 0.0;
    double worst_abs = 0.0;
    for (int i = 0; i < a.n; ++i) {
      const PoseVector pose = random_pose(ctx.tree, a.margin, rng);
      const ScaleVector s = random_scales(ctx.tree, mode, 0.8, 1.25, rng);
      const FkResult fk = forward(pose, s, ctx.tree);
      const FdJacobians fd = fd_jacobian(pose, s, ctx.tree, a.h_theta, a.h_s);
      const Eigen::MatrixXd jp = pose_jacobian(fk, ctx.tree);
      const Eigen::MatrixXd js = scale_jacobian(fk, ctx.tree);
      worst_pose = std::max(worst_pose, max_relative_error(jp, fd.pose, a.abs_floor));
      worst_scale = std::max(worst_scale, max_relative_error(js, fd.scale, a.abs_floor));
      worst_abs = std::max({worst_abs, (jp - fd.pose).cwiseAbs().maxCoeff(), (js - fd.scale).cwiseAbs().maxCoeff()});
    }
    const double worst = std::max(worst_pose, worst_scale);
    const bool pass = worst <= a.tol;
    ok = ok && pass;
    char line[160];
    std::snprintf(
        line, sizeof(line), "mode %s points %d pose_max_rel %.3e scale_max_rel %.3e max_abs %.3e %s\n",
        std::string(to_string(mode)).c_str(), a.n, worst_pose, worst_scale, worst_abs, pass ? "PASS" : "FAIL");
    std::cout << line;
  }
  if (!ok) {
    std::cerr << "gradcheck: maximum relative error exceeds " << format_number(a.tol) << "\n";
    return 2;
  }
  return 0;
}

// --- fit -------------------------------------------------------------------

struct FitArgs {
  std::string target;
  std::string out;
  std::string algorithm = "gauss-newton";
  int max_iters = 200;
  bool fixed_scales = false;
  bool shared_scales = false;
  std::string init;
};

int run_fit(const Globals& g, const FitArgs& a) {
  const Context ctx = resolve(g);
  FitConfig fc;
  fc.mode = ctx.mode;
  fc.algorithm = parse_algorithm(a.algorithm);
  fc.max_iters = a.max_iters;
  fc.fit_scales = !a.fixed_scales;
  ConfigPrinter cfg("fit");
  base_config(cfg, ctx, g);
  cfg.add("target", a.target).add("out", a.out.empty() ? "stdout" : a.out).add("algorithm", a.algorithm);
  cfg.add("max_iters", a.max_iters).add("fixed_scales", a.fixed_scales).add("shared_scales", a.shared_scales);
  cfg.add("init", a.init.empty() ? "default" : a.init);
  cfg.print();
  check_fit_config(fc);

  const ParamFile targets = read_params(a.target);
  if (targets.joints.empty()) {
    throw ValidationError(kModule, a.target + ": no joints block with at least one frame");
  }
  std::optional<FitInit> init;
  if (!a.init.empty()) {
    const ParamFile p = read_params(a.init);
    init = FitInit{p.pose.value_or(zero_pose(ctx.tree)), p.scales.value_or(unit_scales(ctx.tree, ctx.mode))};
  }

  std::ostringstream out;
  if (a.shared_scales) {
    const SetFitReport r = fit_scales_over_set(
        targets.joints, ctx.tree, fc, init ? std::optional<ScaleVector>(init->scales) : std::nullopt);
    out << "# shared_scales rounds " << r.rounds << " converged " << (r.converged ? 1 : 0) << " total_cost "
        << format_number(r.total_cost) << "\n";
    out << format_scales(r.scales);
    for (std::size_t f = 0; f < r.poses.size(); ++f) {
      out << "# frame " << f << " cost " << format_number(r.frame_costs[f]) << "\n" << format_pose(r.poses[f]);
    }
  } else {
    for (std::size_t f = 0; f < targets.joints.size(); ++f) {
      check_joints(ctx.tree, targets.joints[f]);
      const FitReport r = fit(targets.joints[f], ctx.tree, fc, init);
      out << "# frame " << f << "\n" << format_fit_report(r);
    }
  }
  write_or_print(a.out, out.str());
  return 0;
}

// --- calibrate ---------------------------------------------------------------

struct CalibrateArgs {
  std::string annotations;
  std::string out;
};

int run_calibrate(const Globals& g, const CalibrateArgs& a) {
  const Context ctx = resolve(g);
  ConfigPrinter cfg("calibrate");
  base_config(cfg, ctx, g);
  cfg.add("annotations", a.annotations).add("out", a.out.empty() ? "stdout" : a.out);
  cfg.print();
  const ParamFile ann = read_params(a.annotations);
  const KinematicTree calibrated = calibrate_rest_lengths(ctx.tree, ann.joints);
  write_or_print(a.out, calibrated.to_config_text());
  return 0;
}

// --- synth -------------------------------------------------------------------

struct SynthArgs {
  int n = 100;
  std::string out;
  std::string joints_out;
  std::string params_out;
  double noise = 0.0;
  double margin = 0.8;
  double scale_lo = 0.8;
  double scale_hi = 1.25;
  double cube = 400.0;
};

int run_synth(const Globals& g, const SynthArgs& a) {
  const Context ctx = resolve(g);
  SynthSpec spec;
  spec.n_samples = a.n;
  spec.seed = g.seed;
  spec.mode = ctx.mode;
  spec.margin = a.margin;
  spec.scale_lo = a.scale_lo;
  spec.scale_hi = a.scale_hi;
  spec.noise_sigma_mm = a.noise;
  CropSpec crop{a.cube, 1};
  ConfigPrinter cfg("synth");
  base_config(cfg, ctx, g);
  cfg.add("n", a.n).add("noise_mm", a.noise).add("margin", a.margin).add("scale_lo", a.scale_lo);
  cfg.add("scale_hi", a.scale_hi).add("cube_mm", a.cube).add("out", a.out.empty() ? "(none)" : a.out);
  cfg.add("joints_out", a.joints_out.empty() ? "(none)" : a.joints_out);
  cfg.add("params_out", a.params_out.empty() ? "(none)" : a.params_out);
  cfg.print();
  check_synth_spec(spec);
  check_crop(crop);

  const auto samples = generate(spec, ctx.tree);
  if (!a.out.empty()) {
    // Joint-space corpus: the depth payload is a single background pixel.
    CorpusWriter writer(a.out, crop, ctx.tree.joint_count());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      Sample s;
      s.size = 1;
      s.depth = {1.0f};
      s.palm_center_mm = samples[i].clean.positions.col(0);
      s.joints_norm = normalize_joints(samples[i].joints, s.palm_center_mm, crop);
      s.tag = {"synth", "seed" + std::to_string(g.seed), std::to_string(i)};
      writer.append(s);
    }
    writer.close();
  }
  if (!a.joints_out.empty()) {
    std::vector<JointSet> joints;
    for (const auto& s : samples) {
      joints.push_back(s.joints);
    }
    write_text_file(a.joints_out, format_joints(joints), kModule);
  }
  if (!a.params_out.empty()) {
    std::string text;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      text += "# sample " + std::to_string(i) + "\n" + format_pose(samples[i].pose) + format_scales(samples[i].scales);
    }
    write_text_file(a.params_out, text, kModule);
  }
  std::cout << "samples " << samples.size() << "\n";
  return 0;
}

// --- preprocess ----------------------------------------------------------------

struct PreprocessArgs {
  std::string dataset;
  std::string kind;
  std::string out;
  std::string joint_map;
  std::string summary;
  double cube = 300.0;
};

int run_preprocess(const Globals& g, const PreprocessArgs& a) {
  const Context ctx = resolve(g);
  const DatasetKind kind = parse_dataset_kind(a.kind);
  DatasetOptions opts;
  opts.crop.cube_side_mm = a.cube;
  if (!a.joint_map.empty()) {
    opts.joint_map_text = read_text_file(a.joint_map, kModule);
  }
  ConfigPrinter cfg("preprocess");
  base_config(cfg, ctx, g);
  cfg.add("dataset", a.dataset).add("kind", a.kind).add("out", a.out).add("cube_mm", a.cube);
  cfg.add("output_size", opts.crop.output_size);
  cfg.add("joint_map", a.joint_map.empty() ? "bundled" : a.joint_map);
  cfg.add("summary", a.summary.empty() ? "stdout" : a.summary);
  cfg.print();
  const CorpusSummary summary = build_corpus(a.dataset, kind, a.out, ctx.tree, opts);
  const std::string text = format_summary(summary);
  std::cout << text;
  if (!a.summary.empty()) {
    write_text_file(a.summary, text, kModule);
  }
  return 0;
}

// --- train-toy -------------------------------------------------------------------

struct TrainArgs {
  int n = 2000;
  int test_n = 200;
  double noise = 2.0;
  double margin = 0.5;
  std::string hidden = "64,64";
  TrainConfig train;
  std::string out;
  std::string loss_out;
};

int run_train_toy(const Globals& g, const TrainArgs& a) {
  const Context ctx = resolve(g);
  TrainConfig tc = a.train;
  tc.seed = g.seed;
  const std::vector<int> hidden = parse_hidden(a.hidden);
  ConfigPrinter cfg("train-toy");
  base_config(cfg, ctx, g);
  cfg.add("n", a.n).add("test_n", a.test_n).add("noise_mm", a.noise).add("margin", a.margin);
  cfg.add("hidden", a.hidden).add("lr", tc.lr).add("momentum", tc.momentum).add("epochs", tc.epochs);
  cfg.add("batch_size", tc.batch_size).add("norm_mm", tc.norm_mm);
  cfg.add("out", a.out.empty() ? "(none)" : a.out).add("loss_out", a.loss_out.empty() ? "(none)" : a.loss_out);
  cfg.print();
  check_train_config(tc);
  if (a.n <= 0 || a.test_n <= 0) {
    throw ValidationError(kModule, "--n and --test-n must be positive");
  }

  // Training and held-out sets come from disjoint seeds derived from --seed.
  SynthSpec spec;
  spec.mode = ctx.mode;
  spec.margin = a.margin;
  spec.noise_sigma_mm = a.noise;
  spec.n_samples = a.n;
  spec.seed = g.seed * 3 + 1;
  const auto train_set = make_toy_samples(generate(spec, ctx.tree), tc.norm_mm);
  spec.n_samples = a.test_n;
  spec.seed = g.seed * 3 + 2;
  const auto test_set = make_toy_samples(generate(spec, ctx.tree), tc.norm_mm);

  const ToyNet init(ctx.tree, ctx.mode, hidden, g.seed);
  const double before = mean_joint_error(init, test_set, ctx.tree);
  const TrainResult result = train(init, train_set, ctx.tree, tc);
  const double after = mean_joint_error(result.net, test_set, ctx.tree);

  if (!a.out.empty()) {
    save_checkpoint(result.net, a.out);
  }
  if (!a.loss_out.empty()) {
    write_text_file(a.loss_out, format_loss_history(result.loss_history), kModule);
  }
  char line[160];
  std::snprintf(line, sizeof(line), "heldout_mean_error_mm initial %.6f trained %.6f\n", before, after);
  std::cout << line;
  if (!result.loss_history.empty()) {
    std::snprintf(
        line, sizeof(line), "loss first_epoch %.9e last_epoch %.9e\n", result.loss_history.front(),
        result.loss_history.back());
    std::cout << line;
  }
  return 0;
}

// --- eval ----------------------------------------------------------------------

struct EvalArgs {
  std::string pred;
  std::string truth;
  std::string out;
  double max_threshold = 80.0;
  double step = 1.0;
};

int run_eval(const Globals& g, const EvalArgs& a) {
  const Context ctx = resolve(g);
  ConfigPrinter cfg("eval");
  base_config(cfg, ctx, g);
  cfg.add("pred", a.pred).add("truth", a.truth).add("out", a.out.empty() ? "stdout" : a.out);
  cfg.add("max_threshold_mm", a.max_threshold).add("step_mm", a.step);
  cfg.print();
  const ParamFile pred = read_params(a.pred);
  const ParamFile truth = read_params(a.truth);
  const auto thresholds = a.max_threshold > 0.0 ? threshold_range(a.max_threshold, a.step) : std::vector<double>{};
  const MetricsReport report = evaluate(pred.joints, truth.joints, thresholds);
  write_or_print(a.out, format_curves(report));
  char line[96];
  std::snprintf(line, sizeof(line), "mean_joint_error_mm %.6f\n", report.mean_joint_error_mm);
  std::cout << line;
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hand skeleton kinematics: forward pass, gradients, fitting and data tools"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--tree", g.tree_path, std::string("Tree config (JSON); default $") + kTreeEnv + " or bundled");
  app.add_option("--seed", g.seed, "Random seed");
  auto* mode_opt =
      app.add_option("--mode", g.mode, "Scale mode")->check(CLI::IsMember({"global", "five", "multi"}));

  FkArgs fk;
  auto* fk_cmd = app.add_subcommand("fk", "Joint positions for a pose/scale parameter file");
  fk_cmd->add_option("--params", fk.params, "Parameter file with pose and/or scales blocks");
  fk_cmd->add_option("--out", fk.out, "Joints output file (default stdout)");

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare analytic Jacobians with central differences");
  gc_cmd->add_option("--n", gc.n, "Random points per mode")->capture_default_str();
  gc_cmd->add_option("--tol", gc.tol, "Maximum allowed relative error")->capture_default_str();
  gc_cmd->add_option("--abs-floor", gc.abs_floor, "Absolute differences below this are ignored (mm)")
      ->capture_default_str();
  gc_cmd->add_option("--h-theta", gc.h_theta, "Pose step")->capture_default_str();
  gc_cmd->add_option("--h-s", gc.h_s, "Scale step")->capture_default_str();
  gc_cmd->add_option("--margin", gc.margin, "Pose sampling margin")->capture_default_str();

  FitArgs ft;
  auto* fit_cmd = app.add_subcommand("fit", "Fit pose and scales to target joint frames");
  fit_cmd->add_option("--target", ft.target, "Joints file")->required();
  fit_cmd->add_option("--out", ft.out, "Report file (default stdout)");
  fit_cmd->add_option("--algorithm", ft.algorithm, "gauss-newton or descent")->capture_default_str();
  fit_cmd->add_option("--max-iters", ft.max_iters, "Iteration cap")->capture_default_str();
  fit_cmd->add_flag("--fixed-scales", ft.fixed_scales, "Keep scales at their initial value");
  fit_cmd->add_flag("--shared-scales", ft.shared_scales, "One scale vector shared by all frames");
  fit_cmd->add_option("--init", ft.init, "Parameter file with the initial pose and/or scales");

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Set rest lengths to mean annotated bone lengths");
  cal_cmd->add_option("--annotations", cal.annotations, "Joints file")->required();
  cal_cmd->add_option("--out", cal.out, "Tree config output (default stdout)");

  SynthArgs sy;
  auto* synth_cmd = app.add_subcommand("synth", "Write synthetic joint-space samples");
  synth_cmd->add_option("--n", sy.n, "Sample count")->capture_default_str();
  synth_cmd->add_option("--out", sy.out, "Corpus file");
  synth_cmd->add_option("--joints-out", sy.joints_out, "Joints file with the (noisy) samples");
  synth_cmd->add_option("--params-out", sy.params_out, "Generating pose and scales per sample");
  synth_cmd->add_option("--noise", sy.noise, "Gaussian noise sigma (mm)")->capture_default_str();
  synth_cmd->add_option("--margin", sy.margin, "Pose sampling margin")->capture_default_str();
  synth_cmd->add_option("--scale-lo", sy.scale_lo, "Lower scale bound")->capture_default_str();
  synth_cmd->add_option("--scale-hi", sy.scale_hi, "Upper scale bound")->capture_default_str();
  synth_cmd->add_option("--cube", sy.cube, "Normalization cube side (mm)")->capture_default_str();

  PreprocessArgs pp;
  auto* pp_cmd = app.add_subcommand("preprocess", "Build a corpus from a dataset directory");
  pp_cmd->add_option("--dataset", pp.dataset, "Dataset directory")->required();
  pp_cmd->add_option("--kind", pp.kind, "icvl, nyu or msra2015")->required();
  pp_cmd->add_option("--out", pp.out, "Corpus file")->required();
  pp_cmd->add_option("--joint-map", pp.joint_map, "Joint mapping table (default bundled)");
  pp_cmd->add_option("--summary", pp.summary, "Also write the summary here");
  pp_cmd->add_option("--cube", pp.cube, "Crop cube side (mm)")->capture_default_str();

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train-toy", "Train the dense toy regressor through the FK layer");
  tr_cmd->add_option("--n", tr.n, "Training samples")->capture_default_str();
  tr_cmd->add_option("--test-n", tr.test_n, "Held-out samples")->capture_default_str();
  tr_cmd->add_option("--noise", tr.noise, "Feature noise sigma (mm)")->capture_default_str();
  tr_cmd->add_option("--margin", tr.margin, "Pose sampling margin")->capture_default_str();
  tr_cmd->add_option("--hidden", tr.hidden, "Hidden widths, comma separated")->capture_default_str();
  tr_cmd->add_option("--lr", tr.train.lr, "Learning rate")->capture_default_str();
  tr_cmd->add_option("--momentum", tr.train.momentum, "SGD momentum")->capture_default_str();
  tr_cmd->add_option("--epochs", tr.train.epochs, "Epochs")->capture_default_str();
  tr_cmd->add_option("--batch", tr.train.batch_size, "Batch size")->capture_default_str();
  tr_cmd->add_option("--out", tr.out, "Checkpoint file");
  tr_cmd->add_option("--loss-out", tr.loss_out, "Loss history table");

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Mean joint error and threshold curve");
  ev_cmd->add_option("--pred", ev.pred, "Predicted joints file")->required();
  ev_cmd->add_option("--truth", ev.truth, "Ground-truth joints file")->required();
  ev_cmd->add_option("--out", ev.out, "Plot-data file (default stdout)");
  ev_cmd->add_option("--max-threshold", ev.max_threshold, "Largest threshold (mm); 0 disables the curve")
      ->capture_default_str();
  ev_cmd->add_option("--step", ev.step, "Threshold step (mm)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  g.mode_given = mode_opt->count() > 0;

  try {
    if (fk_cmd->parsed()) {
      return run_fk(g, fk);
    }
    if (gc_cmd->parsed()) {
      return run_gradcheck(g, gc);
    }
    if (fit_cmd->parsed()) {
      return run_fit(g, ft);
    }
    if (cal_cmd->parsed()) {
      return run_calibrate(g, cal);
    }
    if (synth_cmd->parsed()) {
      return run_synth(g, sy);
    }
    if (pp_cmd->parsed()) {
      return run_preprocess(g, pp);
    }
    if (tr_cmd->parsed()) {
      return run_train_toy(g, tr);
    }
    if (ev_cmd->parsed()) {
      return run_eval(g, ev);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << kModule << ": " << e.what() << "\n";
    return 2;
  }
  return 0;
}
