#include "toriqp/flow.hpp"

#include <boost/numeric/odeint.hpp>

#include <cmath>
#include <sstream>

namespace toriqp {

namespace {

namespace ode = boost::numeric::odeint;
using state_t = std::vector<double>;

struct Layout {
    int nz = 0; // 2n
    bool dz = false, dphi = false, deps = false, second = false, quad = false;
    bool second_uses_deps = true;
    int oM = -1, oPphi = -1, oPeps = -1, oV = -1, oQ = -1;
    int dim = 0;
};

Layout make_layout(const FlowRequest& req, int nz) {
    Layout ly;
    ly.nz = nz;
    ly.dz = req.want_dz;
    ly.dphi = req.want_dphi;
    ly.deps = req.want_deps;
    ly.second = req.want_second;
    ly.second_uses_deps = req.second_uses_deps;
    ly.quad = req.want_quadratures;
    if (ly.second) {
        ly.dz = true;
        if (ly.second_uses_deps) ly.deps = true;
    }
    int off = nz;
    if (ly.dz) { ly.oM = off; off += nz * nz; }
    if (ly.dphi) { ly.oPphi = off; off += nz; }
    if (ly.deps) { ly.oPeps = off; off += nz; }
    if (ly.second) { ly.oV = off; off += nz; }
    if (ly.quad) { ly.oQ = off; off += 3; }
    ly.dim = off;
    return ly;
}

class AugmentedSystem {
  public:
    AugmentedSystem(const HamiltonianModel& model, const FlowRequest& req, const Layout& ly)
        : model_(model), req_(req), ly_(ly), alpha_hat_(model.external_frequency()) {}

    void operator()(const state_t& x, state_t& dxdt, double s) const {
        const int nz = ly_.nz;
        const double phi = req_.phi0 + alpha_hat_ * s;
        Vec z = Eigen::Map<const Vec>(x.data(), nz);
        dxdt.assign(ly_.dim, 0.0);

        Vec f = model_.field(z, phi, req_.eps);
        Eigen::Map<Vec>(dxdt.data(), nz) = f;

        if (ly_.dz || ly_.dphi || ly_.deps || ly_.second) {
            Mat A = model_.field_jacobian(z, phi, req_.eps);
            if (ly_.dz) {
                Eigen::Map<const Mat> M(x.data() + ly_.oM, nz, nz);
                Eigen::Map<Mat>(dxdt.data() + ly_.oM, nz, nz) = A * M;
            }
            if (ly_.dphi) {
                Eigen::Map<const Vec> P(x.data() + ly_.oPphi, nz);
                Eigen::Map<Vec>(dxdt.data() + ly_.oPphi, nz) =
                    A * P + model_.field_dphi(z, phi, req_.eps);
            }
            if (ly_.deps) {
                Eigen::Map<const Vec> P(x.data() + ly_.oPeps, nz);
                Eigen::Map<Vec>(dxdt.data() + ly_.oPeps, nz) =
                    A * P + model_.field_deps(z, phi, req_.eps);
            }
            if (ly_.second) {
                Eigen::Map<const Mat> M(x.data() + ly_.oM, nz, nz);
                Eigen::Map<const Vec> V(x.data() + ly_.oV, nz);
                Vec u = M * req_.u0;
                Vec w = M * req_.w_eps;
                if (ly_.second_uses_deps) w += Eigen::Map<const Vec>(x.data() + ly_.oPeps, nz);
                Vec rhs = A * V + model_.field_hessian_apply(z, phi, req_.eps, u, w);
                if (ly_.second_uses_deps) rhs += model_.field_deps_jacobian(z, phi, req_.eps) * u;
                Eigen::Map<Vec>(dxdt.data() + ly_.oV, nz) = rhs;
            }
        }
        if (ly_.quad) {
            dxdt[ly_.oQ + 0] = model_.action_form(z).dot(f) - model_.hamiltonian(z, phi, req_.eps);
            dxdt[ly_.oQ + 1] = model_.deps_h(z, phi, req_.eps);
            dxdt[ly_.oQ + 2] = model_.ell() > 0 ? model_.dphi_h(z, phi, req_.eps) : 0.0;
        }
    }

  private:
    const HamiltonianModel& model_;
    const FlowRequest& req_;
    const Layout& ly_;
    double alpha_hat_;
};

} // namespace

FlowResult flow(const FlowRequest& req, const HamiltonianModel& model,
                const IntegratorOptions& opts) {
    const int nz = model.phase_dim();
    if (req.z0.size() != nz) fail(ErrorCode::invalid_argument, "flow: state dimension mismatch");
    if (!req.z0.allFinite() || !std::isfinite(req.t))
        fail(ErrorCode::non_finite, "flow: non-finite initial data");
    if (std::abs(req.t) > opts.max_time)
        fail(ErrorCode::invalid_argument, "flow: |t| exceeds configured maximum");
    if (req.want_second && (req.u0.size() != nz || req.w_eps.size() != nz))
        fail(ErrorCode::invalid_argument, "flow: second variation needs u0 and w_eps");

    Layout ly = make_layout(req, nz);
    state_t x(ly.dim, 0.0);
    Eigen::Map<Vec>(x.data(), nz) = req.z0;
    if (ly.dz)
        Eigen::Map<Mat>(x.data() + ly.oM, nz, nz) = Mat::Identity(nz, nz);

    FlowResult res;
    res.abs_tol = opts.abs_tol;
    res.rel_tol = opts.rel_tol;

    if (req.t != 0.0) {
        AugmentedSystem sys(model, req, ly);
        auto stepper =
            ode::make_controlled<ode::runge_kutta_fehlberg78<state_t>>(opts.abs_tol, opts.rel_tol);
        const double dir = req.t > 0 ? 1.0 : -1.0;
        double t = 0.0;
        double dt = opts.initial_step > 0 ? dir * opts.initial_step : req.t / 64.0;
        const double t_tiny = 1e-15 * (std::abs(req.t) + 1.0);
        while ((req.t - t) * dir > t_tiny) {
            if ((t + dt - req.t) * dir > 0.0) dt = req.t - t;
            auto outcome = stepper.try_step(sys, x, t, dt);
            if (outcome == ode::controlled_step_result::fail) {
                ++res.n_rejected;
                if (std::abs(dt) < 1e-14 * (std::abs(t) + 1.0)) {
                    std::ostringstream msg;
                    msg << "flow: step size underflow at t=" << t;
                    fail(ErrorCode::integration_failure, msg.str());
                }
            } else {
                ++res.n_steps;
                for (int i = 0; i < nz; ++i)
                    if (!std::isfinite(x[i])) {
                        std::ostringstream msg;
                        msg << "flow: non-finite state at t=" << t;
                        fail(ErrorCode::integration_failure, msg.str());
                    }
            }
            if (res.n_steps + res.n_rejected > opts.max_steps) {
                std::ostringstream msg;
                msg << "flow: step budget exhausted at t=" << t << " of " << req.t;
                fail(ErrorCode::integration_failure, msg.str());
            }
        }
    }

    res.z = Eigen::Map<const Vec>(x.data(), nz);
    if (ly.dz) res.M = Eigen::Map<const Mat>(x.data() + ly.oM, nz, nz);
    if (ly.dphi) res.P_phi = Eigen::Map<const Vec>(x.data() + ly.oPphi, nz);
    if (ly.deps) res.P_eps = Eigen::Map<const Vec>(x.data() + ly.oPeps, nz);
    if (ly.second) res.V = Eigen::Map<const Vec>(x.data() + ly.oV, nz);
    if (ly.quad) {
        res.p_t = x[ly.oQ + 0];
        res.M_eps = x[ly.oQ + 1];
        res.M_phi = x[ly.oQ + 2];
    }
    return res;
}

QuadratureResult primitive_and_moments(const Vec& z0, double phi0, double t, double eps,
                                       const HamiltonianModel& model,
                                       const IntegratorOptions& opts) {
    FlowRequest req;
    req.z0 = z0;
    req.phi0 = phi0;
    req.t = t;
    req.eps = eps;
    req.want_quadratures = true;
    FlowResult r = flow(req, model, opts);
    return {r.p_t, r.M_eps, r.M_phi};
}

} // namespace toriqp
