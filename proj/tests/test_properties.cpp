#include <doctest.h>

#include "acceptance_checks.hpp"

using namespace acceptance;

namespace {

constexpr std::size_t kSamples = 20000;
constexpr std::uint64_t kAltSeed = 0x0bad'cafe'1234'5678ULL;

void require_clean(const Sweep& s, std::size_t expected_samples) {
  INFO("worst = " << s.worst);
  CHECK(s.samples >= expected_samples);
  CHECK(s.violations == 0);
}

}  // namespace

TEST_CASE("Fenchel-Young equality at conjugate pairs") {
  require_clean(fenchel_young_equality(kSamples, kPropertySeed), kSamples);
  require_clean(fenchel_young_equality(kSamples, kAltSeed), kSamples);
}

TEST_CASE("Fenchel-Young inequality for arbitrary pairs") {
  require_clean(fenchel_young_inequality(kSamples, kPropertySeed), kSamples);
  require_clean(fenchel_young_inequality(kSamples, kAltSeed), kSamples);
}

TEST_CASE("logarithmic sandwich of C") { require_clean(cosh_sandwich(kSamples), kSamples); }

TEST_CASE("superlinear growth of C") {
  require_clean(superlinear_growth(kSamples, kPropertySeed), kSamples);
  require_clean(superlinear_growth(kSamples, kAltSeed), kSamples);
}

TEST_CASE("Young-type bound for the perspective") {
  require_clean(young_type_bound(kSamples, kPropertySeed), kSamples);
  require_clean(young_type_bound(kSamples, kAltSeed), kSamples);
}

TEST_CASE("lower bound with a power") {
  require_clean(lower_bound_with_power(kSamples, kPropertySeed), kSamples);
  require_clean(lower_bound_with_power(kSamples, kAltSeed), kSamples);
}

TEST_CASE("perspective is monotone in its first argument") {
  require_clean(perspective_monotonicity(kSamples, kPropertySeed), kSamples);
  require_clean(perspective_monotonicity(kSamples, kAltSeed), kSamples);
}

TEST_CASE("perspective is jointly convex") {
  require_clean(perspective_joint_convexity(kSamples, kPropertySeed), kSamples);
  require_clean(perspective_joint_convexity(kSamples, kAltSeed), kSamples);
}
