#include "toriqp/newton.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "toriqp/parallel.hpp"

namespace toriqp {

namespace {

struct Blocks {
    // Component offsets of the (n-1, 1, n-1, 1) splitting of a 2n vector map.
    int n;
    int b1() const { return 0; }
    int b2() const { return n - 1; }
    int b3() const { return n; }
    int b4() const { return 2 * n - 1; }
};

// In-place application of Lambda_hat = [[Lambda, S],[0, Lambda^{-T}]] with
// Lambda = diag(I_{n-1}, lam) and S = [[S1, 0],[0, 0]] to a 2n-component map:
// d1 += S1 d3, d2 *= lam, d4 /= lam.
void apply_lambda_hat(TorusMap& d, const TorusMap& S1, double lam, const Blocks& bl) {
    TorusMap d3 = extract_components(d, bl.b3(), bl.n - 1);
    TorusMap s1d3 = matmap_apply(S1, bl.n - 1, bl.n - 1, d3);
    auto& g = d.mutable_grid_data();
    const auto& gs1 = s1d3.grid_data();
    const int nn = d.spec().nodes();
    for (int c = 0; c < bl.n - 1; ++c)
        for (int q = 0; q < nn; ++q)
            g[static_cast<size_t>(c) * nn + q] += gs1[static_cast<size_t>(c) * nn + q];
    for (int q = 0; q < nn; ++q) g[static_cast<size_t>(bl.b2()) * nn + q] *= lam;
    for (int q = 0; q < nn; ++q) g[static_cast<size_t>(bl.b4()) * nn + q] /= lam;
}

struct Reduced {
    TorusMap eta_tot; // single-shooting right-hand side
    TorusMap S1_tot;  // accumulated torsion sum_i S1_i o R_m^i
    Mat S1_avg;
};

// Forward elimination around the shooting cycle. bundle_mode adds the
// 1/lambda^{1/m} factor of the bundle recursion and rescales by lambda at the
// end so the reduced system is written with the full multiplier.
Reduced reduce_cycle(const TorusSolution& sol, const std::vector<FrameData>& frames,
                     const std::vector<TorusMap>& eta, bool bundle_mode) {
    const int m = sol.m();
    const int nz = sol.phase_dim();
    const int n = nz / 2;
    const Blocks bl{n};
    const double lam_m = sol.lambda_root();
    const double w_m = sol.rot.omega / m, a_m = sol.rot.alpha / m;

    Reduced red;
    red.eta_tot = TorusMap(sol.grid(), nz);
    red.S1_tot = TorusMap(sol.grid(), (n - 1) * (n - 1));
    for (int i = 0; i < m; ++i) {
        TorusMap S1s = shift_rotation(frames[i].S1, w_m, a_m, i);
        if (i > 0) apply_lambda_hat(red.eta_tot, S1s, lam_m, bl);
        add_scaled_inplace(red.eta_tot, shift_rotation(eta[i], w_m, a_m, i), 1.0);
        if (bundle_mode) scale_inplace(red.eta_tot, 1.0 / lam_m);
        add_scaled_inplace(red.S1_tot, S1s, 1.0);
    }
    if (bundle_mode) scale_inplace(red.eta_tot, sol.lambda);

    auto avg = average(red.S1_tot);
    red.S1_avg = Mat(n - 1, n - 1);
    for (int r = 0; r < n - 1; ++r)
        for (int c = 0; c < n - 1; ++c) red.S1_avg(r, c) = avg[r * (n - 1) + c];
    return red;
}

std::vector<TorusMap> back_substitute_torus(const TorusSolution& sol,
                                            const std::vector<FrameData>& frames,
                                            const std::vector<TorusMap>& eta,
                                            const TorusMap& xi0) {
    const int m = sol.m();
    const Blocks bl{sol.phase_dim() / 2};
    const double lam_m = sol.lambda_root();
    const double w_m = sol.rot.omega / m, a_m = sol.rot.alpha / m;
    std::vector<TorusMap> xi(m);
    xi[0] = xi0;
    for (int i = 0; i + 1 < m; ++i) {
        TorusMap t = xi[i];
        apply_lambda_hat(t, frames[i].S1, lam_m, bl);
        add_scaled_inplace(t, eta[i], -1.0);
        xi[i + 1] = shift_rotation(t, w_m, a_m, -1);
    }
    return xi;
}

std::vector<TorusMap> back_substitute_bundle(const TorusSolution& sol,
                                             const std::vector<FrameData>& frames,
                                             const std::vector<TorusMap>& eta,
                                             const TorusMap& xi0, double dlam_m) {
    const int m = sol.m();
    const Blocks bl{sol.phase_dim() / 2};
    const double lam_m = sol.lambda_root();
    const double w_m = sol.rot.omega / m, a_m = sol.rot.alpha / m;
    std::vector<TorusMap> xi(m);
    xi[0] = xi0;
    for (int i = 0; i + 1 < m; ++i) {
        TorusMap t = xi[i];
        apply_lambda_hat(t, frames[i].S1, lam_m, bl);
        add_scaled_inplace(t, eta[i], -1.0);
        // subtract dlam_m e_n
        auto& g = t.mutable_grid_data();
        const int nn = t.spec().nodes();
        for (int q = 0; q < nn; ++q) g[static_cast<size_t>(bl.b2()) * nn + q] -= dlam_m;
        scale_inplace(t, 1.0 / lam_m);
        xi[i + 1] = shift_rotation(t, w_m, a_m, -1);
    }
    return xi;
}

Vec map_average_vec(const TorusMap& f) {
    auto a = average(f);
    Vec v(a.size());
    for (size_t i = 0; i < a.size(); ++i) v(static_cast<int>(i)) = a[i];
    return v;
}

void subtract_average(TorusMap& f) {
    auto a = average(f);
    f.ensure_spectral();
    for (int c = 0; c < f.components(); ++c)
        f.set_coeff(c, 0, 0, f.coeff(c, 0, 0) - TorusMap::cplx(a[c], 0.0));
}

} // namespace

ErrorReport assemble_errors(const TorusSolution& sol, const std::vector<FlowGrid>& flows) {
    const int m = sol.m();
    const int nz = sol.phase_dim();
    const double lam_m = sol.lambda_root();
    const double w_m = sol.rot.omega / m, a_m = sol.rot.alpha / m;
    ErrorReport rep;
    rep.E_K.resize(m);
    rep.E_W.resize(m);
    for (int i = 0; i < m; ++i) {
        const int nx = (i + 1) % m;
        rep.E_K[i] = add_scaled(flows[i].Phi,
                                shift_rotation(sol.segments[nx].K, w_m, a_m, 1), -1.0);
        TorusMap MW = matmap_apply(flows[i].M, nz, nz, sol.segments[i].W);
        rep.E_W[i] =
            add_scaled(MW, shift_rotation(sol.segments[nx].W, w_m, a_m, 1), -lam_m);
        rep.err_K = std::max(rep.err_K, rep.E_K[i].sup_norm());
        rep.err_W = std::max(rep.err_W, rep.E_W[i].sup_norm());
    }
    return rep;
}

ErrorReport invariance_errors(const TorusSolution& sol, const HamiltonianModel& model,
                              const IntegratorOptions& integ) {
    auto flows = segment_flows(sol, model, integ);
    return assemble_errors(sol, flows);
}

std::vector<TorusMap> assemble_eta(const TorusSolution& sol, const HamiltonianModel& model,
                                   const std::vector<FrameData>& frames,
                                   const std::vector<TorusMap>& E) {
    const int m = sol.m();
    const int nz = sol.phase_dim();
    const GridSpec& gs = sol.grid();
    const double w_m = sol.rot.omega / m, a_m = sol.rot.alpha / m;
    const Mat omega0 = standard_omega(nz / 2);
    std::vector<TorusMap> eta(m);
    for (int i = 0; i < m; ++i) {
        const int nx = (i + 1) % m;
        TorusMap PS = shift_rotation(frames[nx].P, w_m, a_m, 1);
        TorusMap KS = shift_rotation(sol.segments[nx].K, w_m, a_m, 1);
        eta[i] = TorusMap(gs, nz);
        PS.ensure_grid();
        KS.ensure_grid();
        E[i].ensure_grid();
        eta[i].mutable_grid_data();
        parallel_for(gs.nodes(), [&](int q) {
            const int ii = q / gs.n2, jj = q % gs.n2;
            Mat P = node_matrix(PS, ii, jj, nz, nz);
            Mat Om = model.Omega(node_vector(KS, ii, jj));
            Vec e = node_vector(E[i], ii, jj);
            set_node_vector(eta[i], ii, jj, omega0 * P.transpose() * Om * e);
        });
    }
    return eta;
}

BlockSolution solve_cyclic_torus(const TorusSolution& sol, const std::vector<FrameData>& frames,
                                 const std::vector<TorusMap>& eta, const StepOptions& opts,
                                 double cancel_tol) {
    const int nz = sol.phase_dim();
    const int n = nz / 2;
    const Blocks bl{n};
    Reduced red = reduce_cycle(sol, frames, eta, false);

    TorusMap eta1 = extract_components(red.eta_tot, bl.b1(), n - 1);
    TorusMap eta2 = extract_components(red.eta_tot, bl.b2(), 1);
    TorusMap eta3 = extract_components(red.eta_tot, bl.b3(), n - 1);
    TorusMap eta4 = extract_components(red.eta_tot, bl.b4(), 1);

    // Quadratic-smallness guard on <eta^3> before treating it as removable.
    Vec avg3 = map_average_vec(eta3);
    double avg3_norm = avg3.lpNorm<Eigen::Infinity>();
    if (avg3_norm > cancel_tol) {
        std::ostringstream msg;
        msg << "torus step: |<eta^3>| = " << avg3_norm << " exceeds cancellation tolerance "
            << cancel_tol << " (broken isotropy/exactness cancellation upstream)";
        fail(ErrorCode::cancellation, msg.str());
    }

    TorusMap xi2 = solve_nonsmall(eta2, sol.lambda, 1.0, sol.rot, opts.coho);
    TorusMap xi4 = solve_nonsmall(eta4, 1.0 / sol.lambda, 1.0, sol.rot, opts.coho);

    TorusMap eta3c = eta3;
    subtract_average(eta3c);
    TorusMap xi3_tilde = solve_small(eta3c, sol.rot, 0.0, opts.coho);

    // <S1> xi3_0 = <eta^1 - S1 xi3_tilde>
    TorusMap s1xi = matmap_apply(red.S1_tot, n - 1, n - 1, xi3_tilde);
    Vec rhs = map_average_vec(add_scaled(eta1, s1xi, -1.0));
    Eigen::JacobiSVD<Mat> svd(red.S1_avg, Eigen::ComputeThinU | Eigen::ComputeThinV);
    double smin = svd.singularValues().minCoeff();
    double smax = svd.singularValues().maxCoeff();
    if (!(smin > 0.0) || smax / smin > opts.cond_limit)
        fail(ErrorCode::frame_degenerate,
             "torus step: <S1> numerically singular (twist loss)");
    Vec xi3_0 = svd.solve(rhs);

    TorusMap xi3 = xi3_tilde;
    {
        auto& g = xi3.mutable_grid_data();
        const int nn = xi3.spec().nodes();
        for (int c = 0; c < n - 1; ++c)
            for (int q = 0; q < nn; ++q) g[static_cast<size_t>(c) * nn + q] += xi3_0(c);
    }

    TorusMap rhs1 = add_scaled(eta1, matmap_apply(red.S1_tot, n - 1, n - 1, xi3), -1.0);
    subtract_average(rhs1); // zero up to the linear-system residual
    TorusMap xi1 = solve_small(rhs1, sol.rot, 0.0, opts.coho);

    TorusMap xi0(sol.grid(), nz);
    insert_components(xi0, bl.b1(), xi1);
    insert_components(xi0, bl.b2(), xi2);
    insert_components(xi0, bl.b3(), xi3);
    insert_components(xi0, bl.b4(), xi4);

    BlockSolution out;
    out.eta3_avg = avg3_norm;
    out.xi = back_substitute_torus(sol, frames, eta, xi0);
    return out;
}

BlockSolution solve_cyclic_bundle(const TorusSolution& sol, const std::vector<FrameData>& frames,
                                  const std::vector<TorusMap>& eta, const StepOptions& opts) {
    const int nz = sol.phase_dim();
    const int n = nz / 2;
    const Blocks bl{n};
    const double lam = sol.lambda;
    if (std::abs(std::abs(lam) - 1.0) < opts.lambda_unit_gap)
        fail(ErrorCode::invalid_argument,
             "bundle step: |lambda| within unit gap, torus not partially hyperbolic");
    Reduced red = reduce_cycle(sol, frames, eta, true);

    TorusMap eta1 = extract_components(red.eta_tot, bl.b1(), n - 1);
    TorusMap eta2 = extract_components(red.eta_tot, bl.b2(), 1);
    TorusMap eta3 = extract_components(red.eta_tot, bl.b3(), n - 1);
    TorusMap eta4 = extract_components(red.eta_tot, bl.b4(), 1);

    TorusMap xi3 = solve_nonsmall(eta3, 1.0, lam, sol.rot, opts.coho);
    TorusMap xi4 = solve_nonsmall(eta4, 1.0 / lam, lam, sol.rot, opts.coho);
    TorusMap rhs1 = add_scaled(eta1, matmap_apply(red.S1_tot, n - 1, n - 1, xi3), -1.0);
    TorusMap xi1 = solve_nonsmall(rhs1, 1.0, lam, sol.rot, opts.coho);

    double dlam = -average(eta2)[0];
    TorusMap rhs2 = eta2;
    {
        auto& g = rhs2.mutable_grid_data();
        for (double& v : g) v = (v + dlam) / lam;
    }
    subtract_average(rhs2);
    TorusMap xi2 = solve_small(rhs2, sol.rot, 0.0, opts.coho);

    TorusMap xi0(sol.grid(), nz);
    insert_components(xi0, bl.b1(), xi1);
    insert_components(xi0, bl.b2(), xi2);
    insert_components(xi0, bl.b3(), xi3);
    insert_components(xi0, bl.b4(), xi4);

    BlockSolution out;
    out.delta_lambda = dlam;
    const int m = sol.m();
    const double lam_m = sol.lambda_root();
    const double dlam_m = dlam / (m * std::pow(lam_m, m - 1));
    out.xi = back_substitute_bundle(sol, frames, eta, xi0, dlam_m);
    return out;
}

void newton_torus_step(TorusSolution& sol, const HamiltonianModel& model,
                       const std::vector<FrameData>& frames, const ErrorReport& errors,
                       const StepOptions& opts, double err_K_current) {
    const int nz = sol.phase_dim();
    auto eta = assemble_eta(sol, model, frames, errors.E_K);
    // Tolerance documents both regimes: the lemma only makes <eta^3>
    // quadratically small in the current error.
    double cancel_tol = 100.0 * opts.eps_K + 1e3 * err_K_current * err_K_current;
    BlockSolution bs = solve_cyclic_torus(sol, frames, eta, opts, cancel_tol);
    for (int i = 0; i < sol.m(); ++i) {
        TorusMap dK = matmap_apply(frames[i].P, nz, nz, bs.xi[i]);
        add_scaled_inplace(sol.segments[i].K, dK, 1.0);
    }
}

void newton_bundle_step(TorusSolution& sol, const HamiltonianModel& model,
                        const std::vector<FrameData>& frames, const ErrorReport& errors,
                        const StepOptions& opts) {
    const int nz = sol.phase_dim();
    auto eta = assemble_eta(sol, model, frames, errors.E_W);
    BlockSolution bs = solve_cyclic_bundle(sol, frames, eta, opts);
    for (int i = 0; i < sol.m(); ++i) {
        TorusMap dW = matmap_apply(frames[i].P, nz, nz, bs.xi[i]);
        add_scaled_inplace(sol.segments[i].W, dW, 1.0);
    }
    const int m = sol.m();
    const double lam_m = sol.lambda_root();
    const double dlam_m = bs.delta_lambda / (m * std::pow(lam_m, m - 1));
    sol.lambda = std::pow(lam_m + dlam_m, m);
}

RefineReport refine(TorusSolution& sol, const HamiltonianModel& model,
                    const RefineOptions& opts) {
    RefineReport rep;
    for (int it = 0; it <= opts.n_max; ++it) {
        auto flows = segment_flows(sol, model, opts.step.integ);
        ErrorReport errs = assemble_errors(sol, flows);
        rep.err_K_history.push_back(errs.err_K);
        rep.err_W_history.push_back(errs.err_W);
        if (errs.err_K < opts.eps_K && errs.err_W < opts.eps_W) {
            rep.converged = true;
            rep.n_it = it;
            return rep;
        }
        if (it == opts.n_max) break;
        try {
            auto frames = build_frames(sol, model, flows, errs.err_K, errs.err_W, opts.step.frame);
            newton_torus_step(sol, model, frames, errs, opts.step, errs.err_K);
            // K changed: rebuild flows and frames before touching the bundle.
            auto flows2 = segment_flows(sol, model, opts.step.integ);
            ErrorReport errs2 = assemble_errors(sol, flows2);
            auto frames2 =
                build_frames(sol, model, flows2, errs2.err_K, errs2.err_W, opts.step.frame);
            newton_bundle_step(sol, model, frames2, errs2, opts.step);
        } catch (const Error& e) {
            rep.failure = e.what();
            rep.n_it = it + 1;
            return rep;
        }
        rep.n_it = it + 1;
    }
    std::ostringstream msg;
    msg << "no convergence after " << opts.n_max << " iterations; err_K history:";
    for (double e : rep.err_K_history) msg << " " << e;
    rep.failure = msg.str();
    return rep;
}

TorusSolution resegment(const TorusSolution& sol, int m_new, const HamiltonianModel& model,
                        const IntegratorOptions& integ) {
    sol.validate();
    if (m_new < 1) fail(ErrorCode::invalid_argument, "resegment: m must be >= 1");
    TorusSolution out = sol;
    out.segments.clear();
    out.segments.push_back(sol.segments[0]);
    if (m_new == 1) {
        out.validate();
        return out;
    }
    const GridSpec& gs = sol.grid();
    const int nz = sol.phase_dim();
    const double w_m = sol.rot.omega / m_new, a_m = sol.rot.alpha / m_new;
    const double lam_root = std::pow(sol.lambda, 1.0 / m_new);
    if (!(sol.lambda > 0.0))
        fail(ErrorCode::invalid_argument, "resegment: multiple shooting needs lambda > 0");
    for (int i = 1; i < m_new; ++i) {
        TorusMap Kb = shift_rotation(sol.segments[0].K, w_m, a_m, -i);
        TorusMap Wb = shift_rotation(sol.segments[0].W, w_m, a_m, -i);
        Segment seg{TorusMap(gs, nz), TorusMap(gs, nz)};
        Kb.ensure_grid();
        Wb.ensure_grid();
        seg.K.mutable_grid_data();
        seg.W.mutable_grid_data();
        const double t_i = i * sol.T / m_new;
        const double norm = std::pow(lam_root, -i);
        parallel_for(gs.nodes(), [&](int q) {
            const int ii = q / gs.n2, jj = q % gs.n2;
            FlowRequest req;
            req.z0 = node_vector(Kb, ii, jj);
            req.phi0 = gs.phi(jj) - i * a_m;
            req.t = t_i;
            req.eps = sol.epsilon;
            req.want_dz = true;
            FlowResult fres = flow(req, model, integ);
            set_node_vector(seg.K, ii, jj, fres.z);
            set_node_vector(seg.W, ii, jj, norm * (fres.M * node_vector(Wb, ii, jj)));
        });
        out.segments.push_back(std::move(seg));
    }
    out.validate();
    return out;
}

} // namespace toriqp
