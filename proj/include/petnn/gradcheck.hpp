#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "petnn/cell.hpp"

namespace petnn {

struct GradCheckOptions {
    std::size_t seq_len = 6;
    double eps = 1e-5;        // central-difference step
    double tol = 1e-5;        // max allowed relative error
    double rel_floor = 1e-4;  // denominator floor so FD noise on ~zero grads cannot fail
    double switch_safety = 1e-3;  // required min |T_raw| so no perturbation flips m
    int max_tries = 100;
};

struct GradCheckReport {
    struct Entry {
        std::string block;
        double max_rel_err = 0.0;
    };
    std::vector<Entry> entries;  // parameter blocks, then x, T0, C0, S0
    double max_rel_err = 0.0;
    bool pass = false;
    int resamples = 0;
    double min_abs_t_raw = 0.0;
};

// Compares the analytic BPTT gradients of a random loss
//   L = sum_t a_t.T_t + b_t.C_t + c_t.S_t
// against central finite differences, for every parameter scalar, every
// input scalar and the initial state. Inputs are resampled until the switch
// pattern is safely away from the threshold; throws PreconditionError when
// max_tries draws all land too close.
GradCheckReport gradcheck_run(const CellConfig& cfg, std::uint64_t seed,
                              const GradCheckOptions& opts = {});

}  // namespace petnn
