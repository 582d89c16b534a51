#include "doctest.h"
#include "fixtures.hpp"
#include "support.hpp"

#include "handfk/corpus.hpp"
#include "handfk/errors.hpp"

using namespace handfk;
using namespace testing;

namespace {

void check_round_trip(const Corpus& c, const std::vector<JointSet>& truth) {
  REQUIRE(c.samples.size() == truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& s = c.samples[i];
    CHECK(sample_in_range(s));
    const auto back = denormalize(s, c.crop);
    for (int j = 0; j < 16; ++j) {
      const double err = (back.positions.col(j) - truth[i].positions.col(j)).norm();
      CHECK(err <= 1e-4 * truth[i].positions.col(j).norm());
    }
  }
}

int hand_pixels(const Sample& s) {
  int n = 0;
  for (float d : s.depth) {
    n += d < 1.0f;
  }
  return n;
}

} // namespace

TEST_CASE("dataset kinds") {
  for (auto k : {DatasetKind::icvl, DatasetKind::nyu, DatasetKind::msra2015}) {
    CHECK(parse_dataset_kind(to_string(k)) == k);
    CHECK_NOTHROW(parse_joint_map(bundled_joint_map(k), default_tree()));
  }
  CHECK_THROWS_AS(parse_dataset_kind("bighand"), ValidationError);
  CHECK(raw_joint_count(DatasetKind::nyu) == 36);
}

TEST_CASE("empty directory gives an empty corpus") {
  const auto dir = scratch_dir("ds_empty");
  for (auto k : {DatasetKind::icvl, DatasetKind::nyu, DatasetKind::msra2015}) {
    const auto out = (dir / "out.bin").string();
    const auto summary = build_corpus(dir.string(), k, out, default_tree());
    CHECK(summary.frames_written == 0);
    CHECK(summary.frames_skipped == 0);
    CHECK(format_summary(summary).find("note corpus is empty") != std::string::npos);
    CHECK(read_corpus(out).samples.empty());
  }
}

TEST_CASE("NYU frames remap to plausible canonical hands") {
  const auto& tree = default_tree();
  const auto map = parse_joint_map(bundled_joint_map(DatasetKind::nyu), tree);
  for (const auto& hand : fixtures::camera_hands(20, 9, Eigen::Vector3d(0, 0, 600))) {
    const auto remapped = remap_joints(fixtures::nyu_raw(hand), map);
    CHECK(remapped.positions == hand.positions);
    CHECK(bones_plausible(remapped, tree));
  }
  JointSet squashed = fixtures::camera_hands(1, 9, Eigen::Vector3d(0, 0, 600))[0];
  squashed.positions.col(3) = squashed.positions.col(2);
  CHECK_FALSE(bones_plausible(squashed, tree));
}

TEST_CASE("ICVL fixture builds a valid corpus") {
  const auto dir = scratch_dir("ds_icvl");
  const auto truth = fixtures::write_icvl(dir / "data");
  const auto out = (dir / "icvl.bin").string();
  const auto summary = build_corpus((dir / "data").string(), DatasetKind::icvl, out, default_tree());
  CHECK(summary.frames_written == 10);
  CHECK(summary.frames_skipped == 0);
  CHECK(summary.subjects == 2);
  CHECK(summary.implausible == 0);
  const auto c = read_corpus(out);
  check_round_trip(c, truth);
  CHECK(c.samples[0].tag.dataset == "icvl");
  CHECK(c.samples[1].tag.subject == "subB");
  CHECK(c.samples[2].tag.frame == "subA/image_0002.png");
  for (const auto& s : c.samples) {
    CHECK(hand_pixels(s) > 200);
  }

  // rebuilding gives the same bytes
  build_corpus((dir / "data").string(), DatasetKind::icvl, (dir / "again.bin").string(), default_tree());
  CHECK(slurp(out) == slurp(dir / "again.bin"));
}

TEST_CASE("NYU fixture builds a valid corpus") {
  const auto dir = scratch_dir("ds_nyu");
  const auto truth = fixtures::write_nyu(dir);
  const auto out = (dir / "nyu.bin").string();
  const auto summary = build_corpus(dir.string(), DatasetKind::nyu, out, default_tree());
  CHECK(summary.frames_written == 6);
  CHECK(summary.subjects == 1);
  CHECK(summary.implausible == 0);
  const auto c = read_corpus(out);
  check_round_trip(c, truth);
  for (const auto& s : c.samples) {
    CHECK(hand_pixels(s) > 200);
  }
}

TEST_CASE("MSRA fixture builds a valid corpus") {
  const auto dir = scratch_dir("ds_msra");
  const auto truth = fixtures::write_msra(dir);
  const auto out = (dir / "msra.bin").string();
  const auto summary = build_corpus(dir.string(), DatasetKind::msra2015, out, default_tree());
  CHECK(summary.frames_written == 4);
  CHECK(summary.subjects == 1);
  const auto c = read_corpus(out);
  check_round_trip(c, truth);
  CHECK(c.samples[3].tag.subject == "P0");
  for (const auto& s : c.samples) {
    CHECK(hand_pixels(s) > 200);
  }
}

TEST_CASE("unreadable frames are skipped and counted") {
  const auto dir = scratch_dir("ds_skip");
  fixtures::write_icvl(dir, 4);
  std::filesystem::remove(dir / "subB" / "image_0001.png");
  {
    std::ofstream labels(dir / "labels.txt", std::ios::app);
    labels << "subA/short.png 1 2 3\n";
  }
  const auto summary = build_corpus(dir.string(), DatasetKind::icvl, (dir / "o.bin").string(), default_tree());
  CHECK(summary.frames_written == 3);
  CHECK(summary.frames_skipped == 2);
  CHECK(summary.skip_reasons.size() == 2);
  CHECK(format_summary(summary).find("frames_skipped 2") != std::string::npos);
}

TEST_CASE("custom joint maps are checked against the raw joint count") {
  const auto dir = scratch_dir("ds_map");
  std::string text;
  for (int j = 0; j < 16; ++j) {
    text += default_tree().joints()[j].name + " " + std::to_string(j == 4 ? 40 : j) + "\n";
  }
  DatasetOptions options;
  options.joint_map_text = text;
  CHECK_THROWS_AS(
      build_corpus(dir.string(), DatasetKind::nyu, (dir / "o.bin").string(), default_tree(), options), ValidationError);
}
