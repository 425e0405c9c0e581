// Exploratory sweep of the two grasp criteria: for a gripper belief and a
// family of object beliefs at increasing offsets, reports the squared L2
// distance next to the probability mass inside a gripper-sized box. Whether
// a single threshold G aligns the two criteria is an open conjecture; this
// tool only tabulates the data.

#include <cstdio>

#include "mopg/mopg.hpp"

namespace {

mopg::Mixture peaked_belief(double translation_offset, std::uint64_t seed) {
  mopg::Vector6d mean = mopg::Vector6d::Zero();
  mean(3) = translation_offset;
  mopg::Matrix6d cov = mopg::Matrix6d::Identity() * 1e-4;
  cov.diagonal().tail<3>().setConstant(4e-4);
  return mopg::Mixture::single(mopg::make_projected_gaussian(
      mopg::TangentSpace::canonical({1.0, 0.0, 0.0, 0.0}), mean, cov, 4000,
      seed));
}

}  // namespace

int main() {
  const std::uint64_t seed = 20110125;
  const auto gripper = peaked_belief(0.0, seed);

  mopg::Box6 gripper_box;
  gripper_box.lo.setConstant(-0.05);
  gripper_box.hi.setConstant(0.05);

  std::printf("%10s %14s %14s %14s\n", "offset", "l2_sq", "3*stderr",
              "box_mass");
  for (double offset = 0.0; offset <= 0.201; offset += 0.02) {
    const auto object = peaked_belief(offset, seed + 1);
    const auto dist = mopg::l2_distance_sq(gripper, object, 20000, seed + 2);
    const auto box = mopg::box_probability(object, gripper_box, 20000, seed + 3);
    std::printf("%10.3f %14.5g %14.5g %14.5g\n", offset, dist.value,
                3.0 * dist.std_error, box.value);
  }
  return 0;
}
