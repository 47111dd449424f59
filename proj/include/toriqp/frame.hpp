#pragma once

#include "toriqp/flow.hpp"
#include "toriqp/map_ops.hpp"
#include "toriqp/solution.hpp"

namespace toriqp {

// Nodewise results of one flow pass over a segment grid: the time-T/m image
// and the variationals requested alongside it.
struct FlowGrid {
    TorusMap Phi;   // phi_{T/m}(K(node))
    TorusMap M;     // D_z phi_{T/m}, 2n x 2n row-major
    TorusMap P_eps; // optional
    TorusMap V;     // optional directional second variation
};

struct FlowNeeds {
    bool deps = false;
    bool second = false;
    const std::vector<TorusMap>* u0 = nullptr; // per segment, e.g. W_i
    const std::vector<TorusMap>* w = nullptr;  // base-point motion per segment
    bool second_uses_deps = true;
};

std::vector<FlowGrid> segment_flows(const TorusSolution& sol, const HamiltonianModel& model,
                                    const IntegratorOptions& integ, const FlowNeeds& needs = {});

// X_H(K(.), .) - D_phi K . alpha_hat: the vector field seen on the torus,
// invariant under D_z phi_T.
TorusMap zgeo_field(const TorusMap& K, const HamiltonianModel& model, const RotationData& rot,
                    double eps);

// Adapted symplectic frame of one segment.
struct FrameData {
    TorusMap L;     // 2n x n: (D_theta K | X_geo | W)
    TorusMap N_hat; // 2n x n
    TorusMap P;     // 2n x 2n
    TorusMap S_hat; // n x n
    TorusMap S1;    // (n-1) x (n-1) torsion
    TorusMap B2;    // (n-1) x 1
    TorusMap B4;    // 1 x 1
    Mat S1_avg;
    double gk_cond = 0.0; // worst G_K condition over nodes
};

struct FrameOptions {
    double validity_threshold = 1e-3; // refuse frames on inputs worse than this
    double cond_limit = 1e12;
    CohomologyOptions coho;
};

// Algorithm steps: L from the invariant columns, N_hat = J L G_K^{-1},
// S_hat from one flow pass, B blocks from the two non-small cohomological
// equations (cyclically eliminated for m > 1), P = (L | L B + N_hat).
// err_K/err_W gate the build; err_W is compared at the lambda^{1/m} scale.
std::vector<FrameData> build_frames(const TorusSolution& sol, const HamiltonianModel& model,
                                    const std::vector<FlowGrid>& flows, double err_K,
                                    double err_W, const FrameOptions& opts = {});

// -Omega0 P^T Omega(K) per node: inverse of P up to O(err).
TorusMap approx_inverse(const TorusMap& P, const TorusMap& K, const HamiltonianModel& model);

} // namespace toriqp
