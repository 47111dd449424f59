#include "toriqp/frame.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "toriqp/cohomology.hpp"
#include "toriqp/parallel.hpp"

namespace toriqp {

std::vector<FlowGrid> segment_flows(const TorusSolution& sol, const HamiltonianModel& model,
                                    const IntegratorOptions& integ, const FlowNeeds& needs) {
    sol.validate();
    const GridSpec& gs = sol.grid();
    const int nz = sol.phase_dim();
    const int m = sol.m();
    const double dt = sol.segment_time();
    if (needs.second && (!needs.u0 || !needs.w))
        fail(ErrorCode::invalid_argument, "segment_flows: second variation needs u0 and w maps");

    std::vector<FlowGrid> out(m);
    for (int s = 0; s < m; ++s) {
        out[s].Phi = TorusMap(gs, nz);
        out[s].M = TorusMap(gs, nz * nz);
        if (needs.deps || (needs.second && needs.second_uses_deps))
            out[s].P_eps = TorusMap(gs, nz);
        if (needs.second) out[s].V = TorusMap(gs, nz);
        // Materialize grids before the parallel section; workers only touch
        // raw node slots.
        out[s].Phi.mutable_grid_data();
        out[s].M.mutable_grid_data();
        if (out[s].P_eps.components() > 0) out[s].P_eps.mutable_grid_data();
        if (out[s].V.components() > 0) out[s].V.mutable_grid_data();
    }

    const int nodes = gs.nodes();
    for (int s = 0; s < m; ++s) {
        const Segment& seg = sol.segments[s];
        seg.K.ensure_grid();
        if (needs.second) {
            (*needs.u0)[s].ensure_grid();
            (*needs.w)[s].ensure_grid();
        }
        parallel_for(nodes, [&](int q) {
            const int i = q / gs.n2, j = q % gs.n2;
            FlowRequest req;
            req.z0 = node_vector(seg.K, i, j);
            req.phi0 = gs.phi(j);
            req.t = dt;
            req.eps = sol.epsilon;
            req.want_dz = true;
            req.want_deps = needs.deps;
            if (needs.second) {
                req.want_second = true;
                req.second_uses_deps = needs.second_uses_deps;
                req.u0 = node_vector((*needs.u0)[s], i, j);
                req.w_eps = node_vector((*needs.w)[s], i, j);
            }
            FlowResult fr;
            try {
                fr = flow(req, model, integ);
            } catch (const Error& e) {
                std::ostringstream msg;
                msg << e.what() << " [segment " << s << ", node (" << i << "," << j << ")]";
                throw Error(e.code(), msg.str());
            }
            set_node_vector(out[s].Phi, i, j, fr.z);
            set_node_matrix(out[s].M, i, j, fr.M);
            if (out[s].P_eps.components() > 0) set_node_vector(out[s].P_eps, i, j, fr.P_eps);
            if (out[s].V.components() > 0) set_node_vector(out[s].V, i, j, fr.V);
        });
    }
    return out;
}

TorusMap zgeo_field(const TorusMap& K, const HamiltonianModel& model, const RotationData& rot,
                    double eps) {
    K.ensure_spectral();
    const GridSpec& gs = K.spec();
    const int nz = model.phase_dim();
    TorusMap X(gs, nz);
    TorusMap DphiK = gs.has(Axis::phi) ? derivative(K, Axis::phi) : TorusMap(gs, nz);
    const double ah = rot.alpha_hat();
    K.ensure_grid();
    DphiK.ensure_grid();
    X.mutable_grid_data();
    parallel_for(gs.nodes(), [&](int q) {
        const int i = q / gs.n2, j = q % gs.n2;
        Vec v = model.field(node_vector(K, i, j), gs.phi(j), eps);
        if (ah != 0.0) v -= ah * node_vector(DphiK, i, j);
        set_node_vector(X, i, j, v);
    });
    return X;
}

TorusMap approx_inverse(const TorusMap& P, const TorusMap& K, const HamiltonianModel& model) {
    const GridSpec& gs = P.spec();
    const int nz = K.components();
    TorusMap out(gs, nz * nz);
    const Mat omega0 = standard_omega(nz / 2);
    for (int i = 0; i < gs.n1; ++i) {
        for (int j = 0; j < gs.n2; ++j) {
            Mat p = node_matrix(P, i, j, nz, nz);
            Mat om = model.Omega(node_vector(K, i, j));
            set_node_matrix(out, i, j, -omega0 * p.transpose() * om);
        }
    }
    return out;
}

namespace {

// Cyclic non-small solve for the B blocks: the per-segment relations
//   x_{i+1} o R_m = a x_i + b_i  (indices mod m)
// compose into a^m x_0 - x_0 o R = -sum_i a^{m-1-i} b_i o R_m^i.
TorusMap cyclic_nonsmall(const std::vector<TorusMap>& b, double a, const RotationData& rot,
                         int m, const CohomologyOptions& coho) {
    const double w_m = rot.omega / m, a_m = rot.alpha / m;
    TorusMap rhs(b[0].spec(), b[0].components());
    double coef = 1.0;
    for (int i = m - 1; i >= 0; --i) {
        add_scaled_inplace(rhs, shift_rotation(b[i], w_m, a_m, i), coef);
        coef *= a;
    }
    scale_inplace(rhs, -1.0);
    double am = std::pow(a, m);
    return solve_nonsmall(rhs, am, 1.0, rot, coho);
}

std::vector<TorusMap> back_substitute(const TorusMap& x0, const std::vector<TorusMap>& b, double a,
                                      const RotationData& rot, int m) {
    const double w_m = rot.omega / m, a_m = rot.alpha / m;
    std::vector<TorusMap> x(m);
    x[0] = x0;
    for (int i = 0; i + 1 < m; ++i)
        x[i + 1] = shift_rotation(add_scaled(b[i], x[i], a), w_m, a_m, -1);
    return x;
}

} // namespace

std::vector<FrameData> build_frames(const TorusSolution& sol, const HamiltonianModel& model,
                                    const std::vector<FlowGrid>& flows, double err_K,
                                    double err_W, const FrameOptions& opts) {
    sol.validate();
    const int m = sol.m();
    const int nz = sol.phase_dim();
    const int n = nz / 2;
    const GridSpec& gs = sol.grid();
    const double lam_m = sol.lambda_root();

    double w_scale = 0.0;
    for (const auto& seg : sol.segments) w_scale = std::max(w_scale, seg.W.sup_norm());
    if (err_K > opts.validity_threshold ||
        err_W > opts.validity_threshold * std::max(1.0, std::abs(lam_m)) * std::max(1.0, w_scale)) {
        std::ostringstream msg;
        msg << "build_frames: input not near-invariant (err_K=" << err_K << ", err_W=" << err_W
            << ", threshold=" << opts.validity_threshold << ")";
        fail(ErrorCode::frame_degenerate, msg.str());
    }

    if (gs.d_theta != n - 2) {
        std::ostringstream msg;
        msg << "build_frames: expected " << n - 2 << " internal angle(s) for n = " << n
            << " (partially hyperbolic structure)";
        fail(ErrorCode::frame_degenerate, msg.str());
    }

    std::vector<FrameData> fr(m);
    // Subframes L and N_hat per segment.
    for (int s = 0; s < m; ++s) {
        const Segment& seg = sol.segments[s];
        TorusMap DthetaK = derivative(seg.K, Axis::theta);
        TorusMap X = zgeo_field(seg.K, model, sol.rot, sol.epsilon);
        fr[s].L = TorusMap(gs, nz * n);
        fr[s].N_hat = TorusMap(gs, nz * n);
        DthetaK.ensure_grid();
        X.ensure_grid();
        seg.K.ensure_grid();
        seg.W.ensure_grid();
        fr[s].L.mutable_grid_data();
        fr[s].N_hat.mutable_grid_data();
        std::vector<double> conds(gs.nodes(), 0.0);
        parallel_for(gs.nodes(), [&](int q) {
            const int i = q / gs.n2, j = q % gs.n2;
            Mat L(nz, n);
            L.col(0) = node_vector(DthetaK, i, j);
            L.col(n - 2) = node_vector(X, i, j);
            L.col(n - 1) = node_vector(seg.W, i, j);
            Vec z = node_vector(seg.K, i, j);
            Mat G = model.metric(z);
            Mat GK = L.transpose() * G * L;
            Eigen::JacobiSVD<Mat> svd(GK, Eigen::ComputeThinU | Eigen::ComputeThinV);
            double smin = svd.singularValues().minCoeff();
            double smax = svd.singularValues().maxCoeff();
            conds[q] = smin > 0 ? smax / smin : std::numeric_limits<double>::infinity();
            Mat N = model.complex_structure(z) * L * GK.inverse();
            set_node_matrix(fr[s].L, i, j, L);
            set_node_matrix(fr[s].N_hat, i, j, N);
        });
        fr[s].gk_cond = *std::max_element(conds.begin(), conds.end());
        if (!(fr[s].gk_cond < opts.cond_limit)) {
            std::ostringstream msg;
            msg << "build_frames: G_K condition " << fr[s].gk_cond
                << " exceeds limit (torus too distorted or near-degenerate)";
            fail(ErrorCode::frame_degenerate, msg.str());
        }
    }

    const double w_m = sol.rot.omega / m, a_m = sol.rot.alpha / m;
    // S_hat per segment couples neighbouring frames through the rotation
    // fraction; one pass of the precomputed M grids suffices.
    std::vector<TorusMap> S2(m), S4(m);
    for (int s = 0; s < m; ++s) {
        const int nx = (s + 1) % m;
        TorusMap N_next = shift_rotation(fr[nx].N_hat, w_m, a_m, 1);
        TorusMap K_next = shift_rotation(sol.segments[nx].K, w_m, a_m, 1);
        fr[s].S_hat = TorusMap(gs, n * n);
        N_next.ensure_grid();
        K_next.ensure_grid();
        fr[s].S_hat.mutable_grid_data();
        parallel_for(gs.nodes(), [&](int q) {
            const int i = q / gs.n2, j = q % gs.n2;
            Mat Nn = node_matrix(N_next, i, j, nz, n);
            Mat Om = model.Omega(node_vector(K_next, i, j));
            Mat M = node_matrix(flows[s].M, i, j, nz, nz);
            Mat Ni = node_matrix(fr[s].N_hat, i, j, nz, n);
            set_node_matrix(fr[s].S_hat, i, j, Mat(Nn.transpose() * Om * M * Ni));
        });
        // Block splitting (n-1, 1) x (n-1, 1).
        fr[s].S1 = TorusMap(gs, (n - 1) * (n - 1));
        S2[s] = TorusMap(gs, n - 1);
        S4[s] = TorusMap(gs, 1);
        for (int i = 0; i < gs.n1; ++i) {
            for (int j = 0; j < gs.n2; ++j) {
                Mat Sh = node_matrix(fr[s].S_hat, i, j, n, n);
                set_node_matrix(fr[s].S1, i, j, Mat(Sh.topLeftCorner(n - 1, n - 1)));
                set_node_vector(S2[s], i, j, Vec(Sh.topRightCorner(n - 1, 1)));
                S4[s].set_value(0, i, j, Sh(n - 1, n - 1));
            }
        }
        auto s1avg = average(fr[s].S1);
        fr[s].S1_avg = Mat(n - 1, n - 1);
        for (int r = 0; r < n - 1; ++r)
            for (int c = 0; c < n - 1; ++c) fr[s].S1_avg(r, c) = s1avg[r * (n - 1) + c];
    }

    // B2: B2_i - lam_m^{-1} B2_{i+1} o R_m = -S2_i, recursion factor lam_m.
    {
        std::vector<TorusMap> b(m);
        for (int s = 0; s < m; ++s) {
            b[s] = S2[s];
            scale_inplace(b[s], lam_m);
        }
        TorusMap B2_0 = cyclic_nonsmall(b, lam_m, sol.rot, m, opts.coho);
        auto all = back_substitute(B2_0, b, lam_m, sol.rot, m);
        for (int s = 0; s < m; ++s) fr[s].B2 = std::move(all[s]);
    }
    // B4: lam_m B4_i - lam_m^{-1} B4_{i+1} o R_m = -S4_i, recursion factor lam_m^2.
    {
        std::vector<TorusMap> b(m);
        for (int s = 0; s < m; ++s) {
            b[s] = S4[s];
            scale_inplace(b[s], lam_m);
        }
        TorusMap B4_0 = cyclic_nonsmall(b, lam_m * lam_m, sol.rot, m, opts.coho);
        auto all = back_substitute(B4_0, b, lam_m * lam_m, sol.rot, m);
        for (int s = 0; s < m; ++s) fr[s].B4 = std::move(all[s]);
    }

    // P = (L | L B + N_hat) with B = [[I, B2], [B2^T, B4]].
    for (int s = 0; s < m; ++s) {
        fr[s].P = TorusMap(gs, nz * nz);
        fr[s].B2.ensure_grid();
        fr[s].B4.ensure_grid();
        fr[s].P.mutable_grid_data();
        parallel_for(gs.nodes(), [&](int q) {
            const int i = q / gs.n2, j = q % gs.n2;
            Mat L = node_matrix(fr[s].L, i, j, nz, n);
            Mat N = node_matrix(fr[s].N_hat, i, j, nz, n);
            Mat B = Mat::Identity(n, n);
            Vec b2 = node_vector(fr[s].B2, i, j);
            B.topRightCorner(n - 1, 1) = b2;
            B.bottomLeftCorner(1, n - 1) = b2.transpose();
            B(n - 1, n - 1) = fr[s].B4.value(0, i, j);
            Mat P(nz, nz);
            P.leftCols(n) = L;
            P.rightCols(n) = L * B + N;
            set_node_matrix(fr[s].P, i, j, P);
        });
    }
    return fr;
}

} // namespace toriqp
