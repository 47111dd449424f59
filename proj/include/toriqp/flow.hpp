#pragma once

#include "toriqp/model.hpp"

namespace toriqp {

struct IntegratorOptions {
    double abs_tol = 1e-13;
    double rel_tol = 1e-13;
    long max_steps = 2000000;
    double max_time = 1e6;
    double initial_step = 0.0; // 0 = automatic
};

// One trajectory with requested variationals, integrated as a single
// augmented state under common step-size control.
struct FlowRequest {
    Vec z0;
    double phi0 = 0.0;
    double t = 0.0;
    double eps = 0.0;
    bool want_dz = false;    // M = D_z phi_t
    bool want_dphi = false;  // P_phi = D_phi phi_t
    bool want_deps = false;  // P_eps = d/deps phi_t
    // Directional second variation: V(t) = d/deps (D_z phi_t(K_eps)) u0 with
    // base-point motion w_eps; requires want_dz, and want_deps unless
    // second_uses_deps is off (then w(s) = M(s) w_eps only, no explicit
    // eps-derivative of the field: the time-tangent case).
    bool want_second = false;
    Vec u0;
    Vec w_eps;
    bool second_uses_deps = true;
    bool want_quadratures = false; // primitive p_t and moment integrals
};

struct FlowResult {
    Vec z;
    Mat M;
    Vec P_phi;
    Vec P_eps;
    Vec V;
    double p_t = 0.0;   // primitive function value
    double M_eps = 0.0; // integral of deps_h along the trajectory
    double M_phi = 0.0; // integral of dphi_h
    long n_steps = 0;
    long n_rejected = 0;
    double abs_tol = 0.0, rel_tol = 0.0;
};

FlowResult flow(const FlowRequest& req, const HamiltonianModel& model,
                const IntegratorOptions& opts = {});

struct QuadratureResult {
    double p_t = 0.0;
    double M_eps = 0.0;
    double M_phi = 0.0;
};

QuadratureResult primitive_and_moments(const Vec& z0, double phi0, double t, double eps,
                                       const HamiltonianModel& model,
                                       const IntegratorOptions& opts = {});

} // namespace toriqp
