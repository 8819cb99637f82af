#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gradcheck_harness.hpp"

// Full-coverage finite-difference verification at the criterion step 1e-3
// (mixed tolerance, kink coordinates re-verified at 1e-5) plus a pure-relative
// sweep at 1e-5 that exercises the small-gradient coordinates tightly.

TEST_CASE("analytic gradients match finite differences at h=1e-3") {
    gradcheck::Harness harness(2024);
    for (int objective : {-1, 0, 1, 2}) {
        auto rep = harness.run(objective, 1e-3);
        INFO("objective ", objective, " worst=", rep.worst_rel, " kinks=", rep.kink_coords);
        CHECK(rep.passed());
        CHECK(rep.worst_rel <= 1e-4);
        CHECK(rep.checked > 1000);
    }
}

TEST_CASE("tight relative check at h=1e-5") {
    gradcheck::Harness harness(2024);
    for (int objective : {-1, 0, 1, 2}) {
        auto rep = harness.run(objective, 1e-5, 1e-4);
        INFO("objective ", objective, " worst=", rep.worst_rel);
        CHECK(rep.passed());
    }
}
