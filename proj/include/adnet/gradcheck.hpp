#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace adnet {

struct GradCheckReport {
    std::string op;
    double worst_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Central finite-difference audit of every backward path at binary64,
// including the reduced end-to-end model. `filter` keeps ops whose name
// contains it; `perturb_op` injects an error into that op's analytic
// gradient so the harness itself can be tested.
std::vector<GradCheckReport> run_gradient_checks(const std::string& filter = "",
                                                 std::uint64_t seed = 0,
                                                 int seeds_per_op = 20,
                                                 const std::string& perturb_op = "");

} // namespace adnet
