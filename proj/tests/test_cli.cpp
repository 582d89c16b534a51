#include "cli_runner.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "support.hpp"

#include "handfk/corpus.hpp"
#include "handfk/metrics.hpp"
#include "handfk/param_io.hpp"
#include "handfk/toynet.hpp"

using namespace handfk;
using namespace testing;

namespace {

void write(const std::filesystem::path& path, const std::string& text) {
  write_text_file(path.string(), text, "test");
}

} // namespace

TEST_CASE("fk at the zero pose prints the rest pose") {
  const auto dir = scratch_dir("cli_fk");
  const auto& tree = default_tree();
  write(dir / "p.txt", format_pose(zero_pose(tree)) + format_scales(unit_scales(tree, ScaleMode::five)));
  const auto r = cli::run("fk --params p.txt", dir);
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("# command fk\n", 0) == 0);
  const auto parsed = parse_params(r.out);
  REQUIRE(parsed.joints.size() == 1);
  CHECK(parsed.joints[0].positions == rest_pose_joints(tree).positions);

  const auto none = cli::run("fk", dir);
  REQUIRE(none.code == 0);
  CHECK(parse_params(none.out).joints[0].positions == rest_pose_joints(tree).positions);
}

TEST_CASE("exit codes") {
  const auto dir = scratch_dir("cli_codes");
  CHECK(cli::run("fk --bogus", dir).code == 1);
  CHECK(cli::run("", dir).code == 1);
  CHECK(cli::run("frobnicate", dir).code == 1);
  CHECK(cli::run("--mode seven fk", dir).code == 1);

  auto pose = zero_pose(default_tree());
  pose.theta[8] = 3.0;
  write(dir / "bad.txt", format_pose(pose));
  const auto invalid = cli::run("fk --params bad.txt", dir);
  CHECK(invalid.code == 1);
  CHECK(invalid.err.find("skeleton") != std::string::npos);
  CHECK(invalid.err.find("pose[8]") != std::string::npos);

  write(dir / "garbled.txt", "pose 2\nx\n");
  const auto garbled = cli::run("fk --params garbled.txt", dir);
  CHECK(garbled.code == 1);
  CHECK(garbled.err.find("garbled.txt") != std::string::npos);

  const auto missing = cli::run("fit --target nowhere.txt", dir);
  CHECK(missing.code == 2);
  CHECK(missing.err.find("nowhere.txt") != std::string::npos);
  CHECK(cli::run("--tree nowhere.json fk", dir).code == 2);
}

TEST_CASE("resolved config comes first") {
  const auto dir = scratch_dir("cli_config");
  const auto r = cli::run("--seed 5 --mode multi gradcheck --n 3", dir);
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("# command gradcheck\n", 0) == 0);
  CHECK(r.out.find("# seed 5\n") != std::string::npos);
  CHECK(r.out.find("# modes multi\n") != std::string::npos);
}

TEST_CASE("gradcheck passes at the default tolerance") {
  const auto dir = scratch_dir("cli_gradcheck");
  const auto r = cli::run("--mode five gradcheck --n 200", dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("mode five points 200") != std::string::npos);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(r.out.find("mode global") == std::string::npos);
  const auto all = cli::run("gradcheck --n 5", dir);
  CHECK(all.code == 0);
  CHECK(all.out.find("mode global") != std::string::npos);
  CHECK(all.out.find("mode multi") != std::string::npos);
  // an impossible tolerance fails
  CHECK(cli::run("gradcheck --n 5 --tol 1e-30 --abs-floor 0", dir).code == 2);
}

TEST_CASE("synth then fit recovers the generating hands") {
  const auto dir = scratch_dir("cli_fit");
  REQUIRE(cli::run("--seed 3 synth --n 5 --joints-out t.txt --params-out g.txt", dir).code == 0);
  const auto r = cli::run("fit --target t.txt --out fit.txt", dir);
  REQUIRE(r.code == 0);
  const auto report = slurp(dir / "fit.txt");
  CHECK(report.find("# frame 4") != std::string::npos);
  const auto targets = read_params((dir / "t.txt").string()).joints;
  REQUIRE(targets.size() == 5);

  const auto shared = cli::run("fit --target t.txt --shared-scales", dir);
  CHECK(shared.code == 0);
  const auto fixed = cli::run("fit --target t.txt --fixed-scales --algorithm descent --max-iters 20", dir);
  CHECK(fixed.code == 0);
  CHECK(cli::run("fit --target t.txt --algorithm newton", dir).code == 1);
}

TEST_CASE("synth writes a readable corpus") {
  const auto dir = scratch_dir("cli_synth");
  REQUIRE(cli::run("--seed 7 synth --n 100 --out a.bin", dir).code == 0);
  REQUIRE(cli::run("--seed 7 synth --n 100 --out b.bin", dir).code == 0);
  CHECK(slurp(dir / "a.bin") == slurp(dir / "b.bin"));
  const auto c = read_corpus((dir / "a.bin").string());
  CHECK(c.samples.size() == 100);
  for (const auto& s : c.samples) {
    CHECK(sample_in_range(s));
  }
  REQUIRE(cli::run("--seed 8 synth --n 100 --out c.bin", dir).code == 0);
  CHECK(slurp(dir / "a.bin") != slurp(dir / "c.bin"));
}

TEST_CASE("calibrate writes a loadable tree") {
  const auto dir = scratch_dir("cli_calibrate");
  REQUIRE(cli::run("--seed 1 synth --n 20 --scale-lo 1.1 --scale-hi 1.1 --joints-out a.txt", dir).code == 0);
  REQUIRE(cli::run("calibrate --annotations a.txt --out tree.json", dir).code == 0);
  const auto tree = load_tree_file((dir / "tree.json").string());
  for (int b = 0; b < 15; ++b) {
    CHECK(rel_diff(tree.bones()[b].rest_length_mm, 1.1 * default_tree().bones()[b].rest_length_mm) < 1e-9);
  }
  // the new tree feeds back through --tree and HANDFK_TREE
  const auto via_flag = cli::run("--tree tree.json fk", dir);
  const auto via_env = cli::run("fk", dir, "HANDFK_TREE=tree.json");
  REQUIRE(via_flag.code == 0);
  REQUIRE(via_env.code == 0);
  CHECK(parse_params(via_flag.out).joints[0].positions == rest_pose_joints(tree).positions);
  CHECK(parse_params(via_env.out).joints[0].positions == rest_pose_joints(tree).positions);
}

TEST_CASE("preprocess builds a corpus from a dataset directory") {
  const auto dir = scratch_dir("cli_preprocess");
  fixtures::write_icvl(dir / "icvl", 4);
  const auto r = cli::run("preprocess --dataset icvl --kind icvl --out c.bin --summary s.txt", dir);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("frames_written 4") != std::string::npos);
  CHECK(slurp(dir / "s.txt").find("subjects 2") != std::string::npos);
  CHECK(read_corpus((dir / "c.bin").string()).samples.size() == 4);
  CHECK(cli::run("preprocess --dataset icvl --kind kinect --out c.bin", dir).code == 1);
  std::filesystem::create_directories(dir / "empty");
  const auto empty = cli::run("preprocess --dataset empty --kind nyu --out e.bin", dir);
  CHECK(empty.code == 0);
  CHECK(empty.out.find("note corpus is empty") != std::string::npos);
}

TEST_CASE("train-toy checkpoints and reports") {
  const auto dir = scratch_dir("cli_train");
  const auto r = cli::run("train-toy --n 50 --test-n 10 --epochs 3 --hidden 8 --out net.bin --loss-out loss.txt", dir);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("heldout_mean_error_mm initial") != std::string::npos);
  CHECK(load_checkpoint((dir / "net.bin").string()).layer_sizes() == std::vector<int>{48, 8, 26});
  CHECK(slurp(dir / "loss.txt").rfind("epoch loss\n", 0) == 0);
  CHECK(cli::run("train-toy --n 5 --epochs 1 --hidden 8 --lr -1", dir).code == 1);
}

TEST_CASE("eval on identical files is perfect") {
  const auto dir = scratch_dir("cli_eval");
  REQUIRE(cli::run("synth --n 10 --joints-out t.txt", dir).code == 0);
  const auto r = cli::run("eval --pred t.txt --truth t.txt --out curves.txt --max-threshold 4", dir);
  REQUIRE(r.code == 0);
  const auto curves = parse_curves(slurp(dir / "curves.txt"));
  CHECK(curves.frames == 10);
  CHECK(curves.mean_joint_error_mm == 0.0);
  CHECK(curves.threshold_curve.size() == 5);
  REQUIRE(cli::run("--seed 1 synth --n 3 --joints-out other.txt", dir).code == 0);
  CHECK(cli::run("eval --pred t.txt --truth other.txt", dir).code == 1);
}
