#pragma once

#include <functional>

#include "toriqp/newton.hpp"

namespace toriqp {

struct ContinuationConfig {
    double eps_K = 1e-9;
    double eps_W = 1e-5;
    double eps_t = 1e-9;   // tail threshold driving grid doubling
    double r_t = 0.2;      // tail factor
    double r_f = 1.0 / 3.0; // lowpass filter factor, in [1/4, 1/2)
    int n_max = 6;         // Newton cap per predicted point
    int n_eps = 3;         // step halvings before grid inspection
    int n_des = 4;         // desired Newton count for step-size control
    int n_t = 2;           // grid-doubling rounds per stuck step
    int max_grid = 1024;
    double de0 = 1e-3;     // initial continuation step
    double target_eps = 0.0;
    StepOptions step;

    void validate() const;
};

struct Tangent {
    std::vector<TorusMap> dK;
    std::vector<TorusMap> dW;
    double dLambda = 0.0;
    // norm of (1, dK, dW, dLambda) used to normalize the continuation direction
    double direction_norm = 1.0;
};

// Derivative of (K, W, lambda) with respect to the external parameter at a
// converged solution, via the frame block solves with the parameter
// variational right-hand sides. The zero-average condition on eta^3 is a
// structural identity here and is enforced at tangent_cancel_tol * scale.
Tangent tangent_eps(const TorusSolution& sol, const HamiltonianModel& model,
                    const StepOptions& opts = {}, double cancel_tol_rel = 1e-8);

// Same with respect to the flying time T, for autonomous solutions only
// (fixed omega family unfolding).
Tangent tangent_T(const TorusSolution& sol, const HamiltonianModel& model,
                  const StepOptions& opts = {}, double cancel_tol_rel = 1e-8);

struct StepLog {
    int step = 0;
    double eps = 0.0;
    double d_eps = 0.0; // suggested step at the time of the attempt
    int n_it = 0;
    double err_K = 0.0;
    double err_W = 0.0;
    int n1 = 0, n2 = 0;
    double lambda = 0.0;
};

struct ContinuationResult {
    TorusSolution sol;
    bool reached = false;
    std::string failure_reason; // set when !reached
    std::vector<StepLog> log;
};

// Adaptive predictor-corrector continuation in the external parameter:
// normalized tangent prediction, Newton correction capped at n_max, step
// halving up to n_eps, tail-driven grid doubling up to n_t, lowpass filter
// after every accepted step, step growth by n_des/n_it.
ContinuationResult continue_to(
    TorusSolution sol, const HamiltonianModel& model, const ContinuationConfig& cfg,
    const std::function<void(const StepLog&, const TorusSolution&)>& on_step = {});

} // namespace toriqp
