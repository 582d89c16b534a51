#include "doctest.h"
#include "support.hpp"

#include "handfk/errors.hpp"
#include "handfk/metrics.hpp"

#include <algorithm>

using namespace handfk;
using namespace testing;

namespace {

MetricsReport oracle(const std::vector<JointSet>& pred, const std::vector<JointSet>& truth, std::vector<double> t) {
  MetricsReport r;
  const int frames = static_cast<int>(pred.size());
  const int joints = pred[0].size();
  r.frames = frames;
  std::vector<double> frame_max(frames, 0.0);
  for (int j = 0; j < joints; ++j) {
    double sum = 0.0;
    for (int f = 0; f < frames; ++f) {
      const double dx = pred[f].positions(0, j) - truth[f].positions(0, j);
      const double dy = pred[f].positions(1, j) - truth[f].positions(1, j);
      const double dz = pred[f].positions(2, j) - truth[f].positions(2, j);
      const double e = std::sqrt(dx * dx + dy * dy + dz * dz);
      sum += e;
      frame_max[f] = std::max(frame_max[f], e);
    }
    r.per_joint_mean_mm.push_back(sum / frames);
  }
  double total = 0.0;
  for (double m : r.per_joint_mean_mm) {
    total += m;
  }
  r.mean_joint_error_mm = total / joints;
  std::sort(t.begin(), t.end());
  for (double th : t) {
    int n = 0;
    for (double m : frame_max) {
      n += m <= th;
    }
    r.threshold_curve.emplace_back(th, static_cast<double>(n) / frames);
  }
  return r;
}

std::vector<JointSet> jitter(const std::vector<JointSet>& base, std::mt19937_64& rng, double sd) {
  std::normal_distribution<double> n(0.0, sd);
  std::vector<JointSet> out = base;
  for (auto& js : out) {
    js.positions = js.positions.unaryExpr([&](double v) { return v + n(rng); });
  }
  return out;
}

} // namespace

TEST_CASE("perfect predictions") {
  std::mt19937_64 rng(1);
  std::vector<JointSet> truth{draw_joints(16, rng), draw_joints(16, rng)};
  const auto thresholds = threshold_range(20.0, 5.0);
  const auto r = evaluate(truth, truth, thresholds);
  CHECK(r.frames == 2);
  CHECK(r.mean_joint_error_mm == 0.0);
  for (const auto& [t, f] : r.threshold_curve) {
    CHECK(f == 1.0);
  }
  const auto text = format_curves(r);
  CHECK(text.find("0.000000 1.000000") != std::string::npos);
  CHECK(text.find("20.000000 1.000000") != std::string::npos);
}

TEST_CASE("one joint off by ten millimetres") {
  std::mt19937_64 rng(2);
  std::vector<JointSet> truth{draw_joints(16, rng)};
  auto pred = truth;
  pred[0].positions(1, 9) += 10.0;
  const std::vector<double> thresholds{15.0, 5.0};
  const auto r = evaluate(pred, truth, thresholds);
  CHECK(r.mean_joint_error_mm == doctest::Approx(10.0 / 16.0).epsilon(1e-14));
  REQUIRE(r.threshold_curve.size() == 2);
  CHECK(r.threshold_curve[0] == std::pair{5.0, 0.0});
  CHECK(r.threshold_curve[1] == std::pair{15.0, 1.0});
  CHECK(r.per_joint_mean_mm[9] == doctest::Approx(10.0).epsilon(1e-14));
}

TEST_CASE("matches the brute-force oracle exactly") {
  std::mt19937_64 rng(3);
  std::vector<JointSet> truth;
  for (int i = 0; i < 100; ++i) {
    truth.push_back(draw_joints(16, rng));
  }
  const auto pred = jitter(truth, rng, 8.0);
  const auto thresholds = threshold_range(80.0, 1.0);
  const auto got = evaluate(pred, truth, thresholds);
  const auto want = oracle(pred, truth, thresholds);
  CHECK(got.frames == want.frames);
  CHECK(got.mean_joint_error_mm == want.mean_joint_error_mm);
  CHECK(got.per_joint_mean_mm == want.per_joint_mean_mm);
  CHECK(got.threshold_curve == want.threshold_curve);
}

TEST_CASE("curves are monotone and bounded") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<JointSet> truth;
    const int frames = 1 + trial * 3;
    for (int i = 0; i < frames; ++i) {
      truth.push_back(draw_joints(16, rng));
    }
    const auto pred = jitter(truth, rng, 1.0 + trial);
    std::vector<double> thresholds;
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int i = 0; i < 30; ++i) {
      thresholds.push_back(u(rng));
    }
    const auto r = evaluate(pred, truth, thresholds);
    for (std::size_t i = 0; i < r.threshold_curve.size(); ++i) {
      CHECK(r.threshold_curve[i].second >= 0.0);
      CHECK(r.threshold_curve[i].second <= 1.0);
      if (i > 0) {
        CHECK(r.threshold_curve[i].first >= r.threshold_curve[i - 1].first);
        CHECK(r.threshold_curve[i].second >= r.threshold_curve[i - 1].second);
      }
    }
    double avg = 0.0;
    for (double m : r.per_joint_mean_mm) {
      avg += m;
    }
    CHECK(r.mean_joint_error_mm == doctest::Approx(avg / 16.0).epsilon(1e-14));
  }
}

TEST_CASE("frame order does not matter") {
  std::mt19937_64 rng(5);
  std::vector<JointSet> truth;
  for (int i = 0; i < 40; ++i) {
    truth.push_back(draw_joints(16, rng));
  }
  auto pred = jitter(truth, rng, 5.0);
  const auto thresholds = threshold_range(30.0, 2.0);
  const auto base = evaluate(pred, truth, thresholds);
  std::vector<int> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<JointSet> p2;
  std::vector<JointSet> t2;
  for (int i : perm) {
    p2.push_back(pred[i]);
    t2.push_back(truth[i]);
  }
  const auto shuffled = evaluate(p2, t2, thresholds);
  CHECK(shuffled.threshold_curve == base.threshold_curve);
  for (int j = 0; j < 16; ++j) {
    CHECK(rel_diff(shuffled.per_joint_mean_mm[j], base.per_joint_mean_mm[j]) < 1e-14);
  }
  CHECK(rel_diff(shuffled.mean_joint_error_mm, base.mean_joint_error_mm) < 1e-14);
}

TEST_CASE("invalid input") {
  std::mt19937_64 rng(6);
  std::vector<JointSet> one{draw_joints(16, rng)};
  std::vector<JointSet> two{draw_joints(16, rng), draw_joints(16, rng)};
  const std::vector<double> none;
  CHECK_THROWS_AS(evaluate(one, two, none), ValidationError);
  CHECK_THROWS_AS(evaluate(std::vector<JointSet>{}, std::vector<JointSet>{}, none), ValidationError);
  const std::vector<double> negative{-1.0};
  CHECK_THROWS_AS(evaluate(one, one, negative), ValidationError);
  CHECK_THROWS_AS(threshold_range(10.0, 0.0), ValidationError);
  CHECK(threshold_range(3.0, 1.0) == std::vector<double>{0.0, 1.0, 2.0, 3.0});
}

TEST_CASE("plot data round trips") {
  std::mt19937_64 rng(7);
  std::vector<JointSet> truth;
  for (int i = 0; i < 25; ++i) {
    truth.push_back(draw_joints(16, rng));
  }
  const auto pred = jitter(truth, rng, 6.0);
  const auto r = evaluate(pred, truth, threshold_range(40.0, 0.5));
  const auto dir = scratch_dir("metrics");
  emit_curves(r, (dir / "curves.txt").string());
  const auto text = slurp(dir / "curves.txt");
  CHECK(text == format_curves(r));
  const auto back = parse_curves(text);
  CHECK(back.frames == r.frames);
  CHECK(std::abs(back.mean_joint_error_mm - r.mean_joint_error_mm) <= 5e-7);
  REQUIRE(back.per_joint_mean_mm.size() == r.per_joint_mean_mm.size());
  for (std::size_t j = 0; j < r.per_joint_mean_mm.size(); ++j) {
    CHECK(std::abs(back.per_joint_mean_mm[j] - r.per_joint_mean_mm[j]) <= 5e-7);
  }
  REQUIRE(back.threshold_curve.size() == r.threshold_curve.size());
  for (std::size_t i = 0; i < r.threshold_curve.size(); ++i) {
    CHECK(std::abs(back.threshold_curve[i].first - r.threshold_curve[i].first) <= 5e-7);
    CHECK(std::abs(back.threshold_curve[i].second - r.threshold_curve[i].second) <= 5e-7);
  }
  CHECK(format_curves(back) == text);
  CHECK_THROWS_AS(emit_curves(r, (dir / "no" / "such" / "dir.txt").string()), RuntimeFailure);
}

TEST_CASE("no thresholds gives the per-joint block only") {
  std::mt19937_64 rng(8);
  std::vector<JointSet> truth{draw_joints(16, rng)};
  const auto r = evaluate(jitter(truth, rng, 2.0), truth, std::vector<double>{});
  const auto text = format_curves(r);
  CHECK(text.find("# per_joint\njoint mean_error_mm\n") != std::string::npos);
  CHECK(text.find("threshold") == std::string::npos);
  CHECK(parse_curves(text).threshold_curve.empty());
  CHECK_THROWS_AS(parse_curves("# bogus\n"), ParseError);
  CHECK_THROWS_AS(parse_curves("1 2\n"), ParseError);
}
