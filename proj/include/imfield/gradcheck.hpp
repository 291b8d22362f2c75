#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "imfield/fdcheck.hpp"

namespace imfield {

struct GradCheckCase {
    std::string name;
    bool expect_failure = false;  // harness sanity fixtures invert the criterion
    std::function<FdReport()> run;
};

// One case per differentiable op (20 seeds each), a second-order case in the
// gradient-penalty shape, the full voxel-encoder + decoder + weighted-loss
// composition, and a deliberately corrupted-gradient fixture that the
// harness must flag.
std::vector<GradCheckCase> gradcheck_cases();

struct GradcheckOutcome {
    bool pass = true;
    std::string worst_name;
    double worst_err = 0.0;
};

// Runs every case, one line per case to `out`; tolerance 1e-4.
GradcheckOutcome run_gradcheck(std::ostream& out);

}  // namespace imfield
