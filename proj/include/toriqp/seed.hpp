#pragma once

#include "toriqp/flow.hpp"
#include "toriqp/solution.hpp"

namespace toriqp {

// Periodic orbit of the autonomous (eps = 0) problem with its Floquet data.
struct PeriodicOrbit {
    Vec z0;
    double T_po = 0.0;
    Mat monodromy;
    double lambda_u = 0.0;     // real unstable multiplier, > 1
    Vec unstable_dir;          // unit eigenvector of lambda_u
    double rho = 0.0;          // unit-circle pair angle / 2 pi, in (0, 1/2)
    Vec center_re, center_im;  // eigenvector of e^{+i 2 pi rho}
    double energy = 0.0;       // Hamiltonian value at z0 (eps = 0)
    double residual = 0.0;     // |phi_T(z0) - z0|_inf after correction
};

struct PoOptions {
    IntegratorOptions integ;
    double tol = 1e-12;   // Newton residual target
    int max_iters = 25;
    int lagrange_index = 1; // 1..3; which collinear point the family surrounds
};

// Differential correction of a vertical Lyapunov orbit seeded from the linear
// vertical mode at the chosen collinear point. The amplitude parameter is the
// initial out-of-plane momentum p3 at the x3 = 0 crossing; it is held fixed
// while (x1, x2, p1, p2, T) are corrected by least-squares Newton shooting.
PeriodicOrbit vertical_lyapunov(const HamiltonianModel& model, double vz_amplitude,
                                const PoOptions& opts = {});

// Same correction from an explicit (z0, T) guess; x3 and p3 of the guess are
// held fixed.
PeriodicOrbit vertical_lyapunov_from_guess(const HamiltonianModel& model, Vec z0, double T,
                                           const PoOptions& opts = {});

// Walks the family in amplitude (secant iteration) until the Floquet angle of
// the unit-circle pair matches rho_target to rho_tol.
PeriodicOrbit vertical_lyapunov_by_rho(const HamiltonianModel& model, double rho_target,
                                       double rho_tol, const PoOptions& opts = {},
                                       double vz_first = 1e-3);

// Nearest noble number within tol of rho: continued fraction truncated at some
// depth with an all-ones tail appended. side > 0 restricts to nobles above
// rho, side < 0 to nobles below, side == 0 takes the nearest.
double nobilize(double rho, double tol, int side = 0, int max_depth = 40);

// Continued-fraction expansion of x in (0,1), for tests and diagnostics.
std::vector<long> continued_fraction(double x, int max_terms);

struct SeedOptions {
    double s = 1e-3;          // transverse amplitude of the linear torus
    double noble_tol = 1.6e-4;
    int noble_side = 0;
    int n1 = 32;
    IntegratorOptions integ;
};

// Linear invariant-torus seed around the orbit: an autonomous solution with
// one segment on an N1 x 1 grid,
//   K(theta) = z0 + s (cos(2 pi theta) Re v - sin(2 pi theta) Im v),
//   W = unstable eigenvector, lambda = lambda_u, T = T_po, omega nobilized.
TorusSolution linear_torus_seed(const PeriodicOrbit& po, const HamiltonianModel& model,
                                const SeedOptions& opts = {});

// Lifts an autonomous solution (no external angle) to the quasi-periodic
// setting: phi-constant values on an N1 x n2 grid with alpha = T/(2 pi).
// Exact at eps = 0 for the bundled model family.
TorusSolution lift_external(const TorusSolution& sol, int n2);

} // namespace toriqp
