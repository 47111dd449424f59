#pragma once

#include "toriqp/grid.hpp"

namespace toriqp {

// Rotation content of one torus solution: per-map rotations (omega, alpha),
// the flying time T, and optional Diophantine constants used by diagnostics.
// Frequencies: omega_hat = (omega, 1)/T, alpha_hat = alpha/T.
struct RotationData {
    double omega = 0.0; // internal rotation, dimensionless angle
    double alpha = 0.0; // external rotation
    double T = 1.0;     // flying time, model time units
    bool theta_active = true;
    bool phi_active = false;
    double gamma = 0.0; // diagnostic lower bound once measured
    double tau = 1.0;   // exponent; default set by active angle count

    static RotationData make(double omega, double alpha, double T, bool theta_active,
                             bool phi_active);
    double alpha_hat() const { return phi_active ? alpha / T : 0.0; }
    void validate() const;
};

struct CohomologyOptions {
    double zero_average_tol = 1e-9; // max |<eta>| accepted by solve_small
    double divisor_min = 1e-12;     // active-mode divisor floor
    // Modes with |coeff| below active_rel * (1 + sup|eta|) are treated as
    // inactive: they get a zero solution instead of tripping the divisor guard.
    double active_rel = 1e-13;
};

// Solves lambda xi - mu xi(. + omega, . + alpha) = eta coefficientwise,
// requiring |lambda| != |mu|. Works componentwise on multi-component eta.
TorusMap solve_nonsmall(const TorusMap& eta, double lambda, double mu,
                        const RotationData& rot, const CohomologyOptions& opts = {});

// Solves xi - xi(. + omega, . + alpha) = eta - <eta> with <xi> = free_average,
// requiring |<eta>| below tolerance per component.
TorusMap solve_small(const TorusMap& eta, const RotationData& rot, double free_average,
                     const CohomologyOptions& opts = {});
TorusMap solve_small(const TorusMap& eta, const RotationData& rot,
                     const std::vector<double>& free_average,
                     const CohomologyOptions& opts = {});

// min over 0 < |k|+|j| <= K_max of |k omega + j alpha - n| (|k|+|j|)^tau with n
// the nearest integer: a brute-force lower estimate of the Diophantine gamma.
double diophantine_margin(const RotationData& rot, int K_max);

} // namespace toriqp
