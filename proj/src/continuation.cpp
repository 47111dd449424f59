#include "toriqp/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "toriqp/parallel.hpp"

namespace toriqp {

void ContinuationConfig::validate() const {
    if (!(eps_K > 0 && eps_W > 0 && eps_t > 0 && de0 > 0))
        fail(ErrorCode::invalid_argument, "continuation: tolerances must be positive");
    if (!(r_t > 0 && r_t < 0.5))
        fail(ErrorCode::invalid_argument, "continuation: r_t must lie in (0, 1/2)");
    if (!(r_f >= 0.25 && r_f < 0.5))
        fail(ErrorCode::invalid_argument, "continuation: r_f must lie in [1/4, 1/2)");
    if (n_max < 1 || n_eps < 0 || n_des < 1 || n_t < 0 || max_grid < 4)
        fail(ErrorCode::invalid_argument, "continuation: bad integer parameter");
}

namespace {

double tangent_norm(const Tangent& t) {
    double acc = 1.0 + t.dLambda * t.dLambda;
    for (const auto* set : {&t.dK, &t.dW}) {
        for (const auto& f : *set) {
            const auto& g = f.grid_data();
            double s = 0.0;
            for (double v : g) s += v * v;
            acc += s / f.spec().nodes();
        }
    }
    return std::sqrt(acc);
}

Tangent tangent_common(const TorusSolution& sol, const HamiltonianModel& model,
                       const StepOptions& opts, double cancel_tol_rel, bool wrt_time) {
    sol.validate();
    const int nz = sol.phase_dim();
    const int m = sol.m();
    if (wrt_time && sol.grid().d_phi != 0)
        fail(ErrorCode::invalid_argument,
             "tangent_T: only autonomous solutions (alpha = T/2pi coupling out of scope)");

    auto flows = segment_flows(sol, model, opts.integ, FlowNeeds{.deps = !wrt_time});
    ErrorReport errs = assemble_errors(sol, flows);
    auto frames = build_frames(sol, model, flows, errs.err_K, errs.err_W, opts.frame);

    // Right-hand sides: the parameter variation of the segment map.
    std::vector<TorusMap> rhs(m);
    if (wrt_time) {
        // d/dT phi_{T/m}(K_i) = (1/m) X_H(phi_{T/m}(K_i)).
        const GridSpec& gs = sol.grid();
        for (int i = 0; i < m; ++i) {
            rhs[i] = TorusMap(gs, nz);
            flows[i].Phi.ensure_grid();
            rhs[i].mutable_grid_data();
            parallel_for(gs.nodes(), [&](int q) {
                const int ii = q / gs.n2, jj = q % gs.n2;
                double phi_end = gs.phi(jj) + sol.rot.alpha_hat() * sol.segment_time();
                Vec v = model.field(node_vector(flows[i].Phi, ii, jj), phi_end, sol.epsilon);
                set_node_vector(rhs[i], ii, jj, v / m);
            });
        }
    } else {
        for (int i = 0; i < m; ++i) rhs[i] = flows[i].P_eps;
    }

    auto etaK = assemble_eta(sol, model, frames, rhs);
    double scale = 0.0;
    for (const auto& e : etaK) scale = std::max(scale, e.sup_norm());
    BlockSolution bsK =
        solve_cyclic_torus(sol, frames, etaK, opts, cancel_tol_rel * (1.0 + scale));

    Tangent tan;
    tan.dK.resize(m);
    tan.dW.resize(m);
    for (int i = 0; i < m; ++i) tan.dK[i] = matmap_apply(frames[i].P, nz, nz, bsK.xi[i]);

    // Bundle right-hand side E^{dW} = d(D_z phi) W: second variations along
    // the base-point motion dK, plus the explicit parameter term.
    std::vector<TorusMap> u0(m), wmv(m);
    for (int i = 0; i < m; ++i) {
        u0[i] = sol.segments[i].W;
        wmv[i] = tan.dK[i];
    }
    FlowNeeds needs2;
    needs2.second = true;
    needs2.u0 = &u0;
    needs2.w = &wmv;
    needs2.second_uses_deps = !wrt_time;
    auto flows2 = segment_flows(sol, model, opts.integ, needs2);

    std::vector<TorusMap> Ew(m);
    const GridSpec& gs = sol.grid();
    for (int i = 0; i < m; ++i) {
        Ew[i] = flows2[i].V;
        if (wrt_time) {
            // add (1/m) D_z X_H(phi) M W: the T-derivative of the transition.
            Ew[i].ensure_grid();
            flows2[i].Phi.ensure_grid();
            flows2[i].M.ensure_grid();
            parallel_for(gs.nodes(), [&](int q) {
                const int ii = q / gs.n2, jj = q % gs.n2;
                double phi_end = gs.phi(jj) + sol.rot.alpha_hat() * sol.segment_time();
                Mat A = model.field_jacobian(node_vector(flows2[i].Phi, ii, jj), phi_end,
                                             sol.epsilon);
                Mat M = node_matrix(flows2[i].M, ii, jj, nz, nz);
                Vec w = node_vector(sol.segments[i].W, ii, jj);
                Vec v = node_vector(Ew[i], ii, jj) + (A * M * w) / m;
                set_node_vector(Ew[i], ii, jj, v);
            });
        }
    }
    auto etaW = assemble_eta(sol, model, frames, Ew);
    BlockSolution bsW = solve_cyclic_bundle(sol, frames, etaW, opts);
    for (int i = 0; i < m; ++i) tan.dW[i] = matmap_apply(frames[i].P, nz, nz, bsW.xi[i]);
    tan.dLambda = bsW.delta_lambda;
    tan.direction_norm = tangent_norm(tan);
    return tan;
}

void apply_prediction(TorusSolution& sol, const Tangent& tan, double d_eps_eff) {
    for (int i = 0; i < sol.m(); ++i) {
        add_scaled_inplace(sol.segments[i].K, tan.dK[i], d_eps_eff);
        add_scaled_inplace(sol.segments[i].W, tan.dW[i], d_eps_eff);
    }
    sol.lambda += d_eps_eff * tan.dLambda;
    sol.epsilon += d_eps_eff;
}

void filter_solution(TorusSolution& sol, double r_f) {
    for (auto& seg : sol.segments) {
        seg.K = lowpass(seg.K, r_f);
        seg.W = lowpass(seg.W, r_f);
    }
}

TailNorms torus_tails(const TorusSolution& sol, double r_t) {
    TailNorms acc;
    acc.theta.assign(1, 0.0);
    acc.phi.assign(1, 0.0);
    for (const auto& seg : sol.segments) {
        TailNorms t = tail_norms(seg.K, r_t);
        acc.theta[0] = std::max(acc.theta[0], t.max_theta());
        acc.phi[0] = std::max(acc.phi[0], t.max_phi());
    }
    return acc;
}

void double_grids(TorusSolution& sol, bool axis_theta, bool axis_phi, int max_grid) {
    for (auto& seg : sol.segments) {
        if (axis_theta) {
            seg.K = refine_grid(seg.K, Axis::theta, max_grid);
            seg.W = refine_grid(seg.W, Axis::theta, max_grid);
        }
        if (axis_phi) {
            seg.K = refine_grid(seg.K, Axis::phi, max_grid);
            seg.W = refine_grid(seg.W, Axis::phi, max_grid);
        }
    }
}

} // namespace

Tangent tangent_eps(const TorusSolution& sol, const HamiltonianModel& model,
                    const StepOptions& opts, double cancel_tol_rel) {
    return tangent_common(sol, model, opts, cancel_tol_rel, false);
}

Tangent tangent_T(const TorusSolution& sol, const HamiltonianModel& model,
                  const StepOptions& opts, double cancel_tol_rel) {
    return tangent_common(sol, model, opts, cancel_tol_rel, true);
}

ContinuationResult continue_to(
    TorusSolution sol, const HamiltonianModel& model, const ContinuationConfig& cfg,
    const std::function<void(const StepLog&, const TorusSolution&)>& on_step) {
    cfg.validate();
    sol.validate();
    ContinuationResult out;
    double de = cfg.de0;
    int step_id = 0;

    RefineOptions rf;
    rf.eps_K = cfg.eps_K;
    rf.eps_W = cfg.eps_W;
    rf.n_max = cfg.n_max;
    rf.step = cfg.step;
    rf.step.eps_K = cfg.eps_K;

    const double target = cfg.target_eps;
    while (true) {
        if (sol.epsilon >= target - 1e-15 * std::max(1.0, std::abs(target))) {
            // Recheck the final iterate after its filter pass; one extra
            // correction round absorbs any filtered-out mass.
            ErrorReport errs = invariance_errors(sol, model, cfg.step.integ);
            if (!(errs.err_K < cfg.eps_K && errs.err_W < cfg.eps_W)) {
                RefineReport rep = refine(sol, model, rf);
                if (!rep.converged) {
                    out.sol = sol;
                    out.failure_reason = "final re-polish failed: " + rep.failure;
                    return out;
                }
            }
            out.sol = sol;
            out.reached = true;
            return out;
        }

        Tangent tan;
        try {
            tan = tangent_eps(sol, model, cfg.step);
        } catch (const Error& e) {
            out.sol = sol;
            out.failure_reason = std::string("tangent computation failed: ") + e.what();
            return out;
        }

        bool accepted = false;
        int doubling_rounds = 0;
        while (!accepted) {
            int halvings = 0;
            for (;; ++halvings) {
                double de_try = std::min(de, (target - sol.epsilon) * tan.direction_norm);
                TorusSolution trial = sol;
                apply_prediction(trial, tan, de_try / tan.direction_norm);
                RefineReport rep;
                bool step_error = false;
                std::string step_error_what;
                try {
                    rep = refine(trial, model, rf);
                } catch (const Error& e) {
                    step_error = true;
                    step_error_what = e.what();
                }
                if (!step_error && rep.converged) {
                    int n_it = std::max(1, rep.n_it);
                    sol = std::move(trial);
                    filter_solution(sol, cfg.r_f);
                    de = (static_cast<double>(cfg.n_des) / n_it) * de;
                    StepLog lg;
                    lg.step = ++step_id;
                    lg.eps = sol.epsilon;
                    lg.d_eps = de_try;
                    lg.n_it = n_it;
                    lg.err_K = rep.err_K_history.back();
                    lg.err_W = rep.err_W_history.back();
                    lg.n1 = sol.grid().n1;
                    lg.n2 = sol.grid().n2;
                    lg.lambda = sol.lambda;
                    out.log.push_back(lg);
                    if (on_step) on_step(lg, sol);
                    accepted = true;
                    break;
                }
                if (halvings >= cfg.n_eps) break;
                de *= 0.5;
            }
            if (accepted) break;

            // Step halving exhausted: inspect coefficient tails and double
            // the grid along the saturated phase(s).
            if (doubling_rounds >= cfg.n_t) {
                out.sol = sol;
                out.failure_reason = "exhausted: step halving floor and grid-doubling budget";
                return out;
            }
            TailNorms tails = torus_tails(sol, cfg.r_t);
            double tt = tails.max_theta(), tp = tails.max_phi();
            bool dub_theta = false, dub_phi = false;
            if (tt > cfg.eps_t && tp > cfg.eps_t) {
                dub_theta = dub_phi = true;
            } else if (tt > cfg.eps_t && tt >= tp) {
                dub_theta = true;
            } else if (tp > cfg.eps_t) {
                dub_phi = true;
            }
            if (!dub_theta && !dub_phi) {
                out.sol = sol;
                out.failure_reason = "exhausted: corrector diverged with resolved tails";
                return out;
            }
            try {
                double_grids(sol, dub_theta, dub_phi, cfg.max_grid);
            } catch (const Error& e) {
                out.sol = sol;
                out.failure_reason = std::string("grid ceiling: ") + e.what();
                return out;
            }
            ++doubling_rounds;
            // Fresh tangent on the refined grid; the halved step is kept.
            try {
                tan = tangent_eps(sol, model, cfg.step);
            } catch (const Error& e) {
                out.sol = sol;
                out.failure_reason = std::string("tangent after doubling failed: ") + e.what();
                return out;
            }
        }
    }
}

} // namespace toriqp
