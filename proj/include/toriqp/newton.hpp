#pragma once

#include "toriqp/frame.hpp"

namespace toriqp {

// Invariance residuals: per segment
//   E^K_i = phi_{T/m}(K_i(.), .) - K_{i+1}(. + omega/m, . + alpha/m)
//   E^W_i = D_z phi_{T/m}(K_i) W_i - lambda^{1/m} W_{i+1}(. + omega/m, . + alpha/m)
// with cyclic indices; err norms are the max over grid nodes of the inf-norm.
struct ErrorReport {
    std::vector<TorusMap> E_K;
    std::vector<TorusMap> E_W;
    double err_K = 0.0;
    double err_W = 0.0;
};

ErrorReport assemble_errors(const TorusSolution& sol, const std::vector<FlowGrid>& flows);
ErrorReport invariance_errors(const TorusSolution& sol, const HamiltonianModel& model,
                              const IntegratorOptions& integ = {});

struct StepOptions {
    IntegratorOptions integ;
    FrameOptions frame;
    CohomologyOptions coho;
    double eps_K = 1e-9;        // scales the eta^3 cancellation threshold
    double cond_limit = 1e12;   // <S1> linear system
    double lambda_unit_gap = 1e-6;
};

// Right-hand sides eta_i = Omega0 (P_{i+1} o R_m)^T Omega(K_{i+1} o R_m) E_i.
std::vector<TorusMap> assemble_eta(const TorusSolution& sol, const HamiltonianModel& model,
                                   const std::vector<FrameData>& frames,
                                   const std::vector<TorusMap>& E);

// Cyclic elimination to a single-shooting system plus the four block solves.
// Torus form:  Lambda_hat_tot xi_0 - xi_0 o R = eta_tot, then back-substitute.
// Bundle form: Lambda_hat_tot xi_0 - lambda xi_0 o R - dlambda e_n = eta_tot.
struct BlockSolution {
    std::vector<TorusMap> xi; // per segment, 2n components
    double delta_lambda = 0.0;
    double eta3_avg = 0.0;    // |<eta^3>|_inf of the reduced system (torus form)
};

BlockSolution solve_cyclic_torus(const TorusSolution& sol, const std::vector<FrameData>& frames,
                                 const std::vector<TorusMap>& eta, const StepOptions& opts,
                                 double cancel_tol);
BlockSolution solve_cyclic_bundle(const TorusSolution& sol, const std::vector<FrameData>& frames,
                                  const std::vector<TorusMap>& eta, const StepOptions& opts);

// One Newton step on the torus: K_i += P_i xi_i.
void newton_torus_step(TorusSolution& sol, const HamiltonianModel& model,
                       const std::vector<FrameData>& frames, const ErrorReport& errors,
                       const StepOptions& opts, double err_K_current);

// One Newton step on the bundle: W_i += P_i xi_i, lambda updated through
// lambda^{1/m} + delta(lambda^{1/m}).
void newton_bundle_step(TorusSolution& sol, const HamiltonianModel& model,
                        const std::vector<FrameData>& frames, const ErrorReport& errors,
                        const StepOptions& opts);

struct RefineOptions {
    double eps_K = 1e-9;
    double eps_W = 1e-5;
    int n_max = 6;
    StepOptions step;
};

struct RefineReport {
    bool converged = false;
    int n_it = 0;
    std::vector<double> err_K_history;
    std::vector<double> err_W_history;
    std::string failure;
};

// Alternates torus and bundle steps (frames rebuilt after the torus update)
// until both errors pass or n_max is exhausted.
RefineReport refine(TorusSolution& sol, const HamiltonianModel& model,
                    const RefineOptions& opts);

// Re-splits a solution into m_new shooting segments by flowing segment 0 by
// multiples of T/m_new, transporting W with the lambda^{i/m} normalization.
TorusSolution resegment(const TorusSolution& sol, int m_new, const HamiltonianModel& model,
                        const IntegratorOptions& integ = {});

} // namespace toriqp
