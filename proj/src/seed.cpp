#include "toriqp/seed.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "toriqp/ertbp.hpp"

namespace toriqp {

namespace {

constexpr double twopi = 2.0 * std::numbers::pi;

Vec collinear_point(const HamiltonianModel& model, int lagrange_index) {
    const auto* ertbp = dynamic_cast<const ErtbpModel*>(&model);
    if (!ertbp)
        fail(ErrorCode::invalid_argument, "vertical_lyapunov: model has no equilibrium table");
    if (lagrange_index < 1 || lagrange_index > 3)
        fail(ErrorCode::invalid_argument, "vertical_lyapunov: collinear index must be 1..3");
    return lagrange_points(ertbp->mu())[lagrange_index - 1];
}

struct FloquetData {
    double lambda_u;
    Vec unstable_dir;
    double rho;
    Vec center_re, center_im;
};

FloquetData classify_monodromy(const Mat& M) {
    Eigen::EigenSolver<Mat> es(M);
    if (es.info() != Eigen::Success)
        fail(ErrorCode::not_converged, "monodromy eigensolve failed");
    const auto& vals = es.eigenvalues();
    const auto& vecs = es.eigenvectors();

    int iu = -1;
    double best = 1.0;
    int ic = -1;
    double best_unit = 1e30;
    for (int i = 0; i < vals.size(); ++i) {
        std::complex<double> v = vals(i);
        if (std::abs(v.imag()) < 1e-8 * std::max(1.0, std::abs(v.real()))) {
            if (v.real() > best) { best = v.real(); iu = i; }
        } else if (v.imag() > 0.0) {
            double off = std::abs(std::abs(v) - 1.0);
            if (off < best_unit) { best_unit = off; ic = i; }
        }
    }
    if (iu < 0)
        fail(ErrorCode::not_converged, "monodromy has no real unstable eigenvalue > 1");
    if (ic < 0 || best_unit > 1e-4)
        fail(ErrorCode::not_converged,
             "monodromy has no unit-circle pair (orbit past bifurcation?)");

    FloquetData fd;
    fd.lambda_u = vals(iu).real();
    Eigen::VectorXcd uu = vecs.col(iu);
    // Real eigenvector up to phase; rotate the largest component onto the real
    // axis before taking real parts.
    int imax = 0;
    uu.cwiseAbs().maxCoeff(&imax);
    uu *= std::conj(uu(imax)) / std::abs(uu(imax));
    fd.unstable_dir = uu.real();
    fd.unstable_dir.normalize();

    std::complex<double> lc = vals(ic);
    fd.rho = std::atan2(lc.imag(), lc.real()) / twopi;
    if (fd.rho < 0) fd.rho += 1.0;
    Eigen::VectorXcd v = vecs.col(ic);
    v /= v.norm();
    for (int j = 0; j < v.size(); ++j) {
        if (std::abs(v(j)) > 1e-9) {
            v *= std::conj(v(j)) / std::abs(v(j));
            break;
        }
    }
    fd.center_re = v.real();
    fd.center_im = v.imag();
    return fd;
}

} // namespace

PeriodicOrbit vertical_lyapunov(const HamiltonianModel& model, double vz_amplitude,
                                const PoOptions& opts) {
    Vec zL = collinear_point(model, opts.lagrange_index);
    Mat A = model.field_jacobian(zL, 0.0, 0.0);
    const int nz = model.phase_dim();
    // Vertical block decouples at the collinear points: x3' = p3, p3' = A(5,2) x3.
    double wv2 = -A(nz - 1, nz / 2 - 1);
    if (!(wv2 > 0.0))
        fail(ErrorCode::invalid_argument, "vertical_lyapunov: no vertical center at this point");
    Vec z0 = zL;
    z0(nz - 1) = vz_amplitude;
    double T = twopi / std::sqrt(wv2);
    return vertical_lyapunov_from_guess(model, z0, T, opts);
}

PeriodicOrbit vertical_lyapunov_from_guess(const HamiltonianModel& model, Vec z0, double T,
                                           const PoOptions& opts) {
    const int nz = model.phase_dim();
    // Unknowns (x1, x2, p1, p2, T); x3 = 0 pins the phase and p3 the amplitude.
    const std::vector<int> cols = {0, 1, 3, 4};
    std::vector<double> history;
    FlowRequest req;
    req.eps = 0.0;
    req.want_dz = true;
    Vec F(nz);
    for (int it = 0; it <= opts.max_iters; ++it) {
        req.z0 = z0;
        req.t = T;
        FlowResult fr = flow(req, model, opts.integ);
        F = fr.z - z0;
        double res = F.lpNorm<Eigen::Infinity>();
        history.push_back(res);
        if (res < opts.tol) {
            PeriodicOrbit po;
            po.z0 = z0;
            po.T_po = T;
            po.monodromy = fr.M;
            po.residual = res;
            FloquetData fd = classify_monodromy(fr.M);
            po.lambda_u = fd.lambda_u;
            po.unstable_dir = fd.unstable_dir;
            po.rho = fd.rho;
            po.center_re = fd.center_re;
            po.center_im = fd.center_im;
            po.energy = model.hamiltonian(z0, 0.0, 0.0);
            return po;
        }
        if (it == opts.max_iters) break;
        Mat Jk(nz, 5);
        for (int c = 0; c < 4; ++c) Jk.col(c) = (fr.M - Mat::Identity(nz, nz)).col(cols[c]);
        Jk.col(4) = model.field(fr.z, 0.0, 0.0);
        Vec du = Jk.colPivHouseholderQr().solve(-F);
        for (int c = 0; c < 4; ++c) z0(cols[c]) += du(c);
        T += du(4);
        if (!(T > 0.0)) fail(ErrorCode::not_converged, "vertical_lyapunov: period became negative");
    }
    std::ostringstream msg;
    msg << "vertical_lyapunov: no convergence after " << opts.max_iters << " iterations;residuals";
    for (double r : history) msg << " " << r;
    fail(ErrorCode::not_converged, msg.str());
}

PeriodicOrbit vertical_lyapunov_by_rho(const HamiltonianModel& model, double rho_target,
                                       double rho_tol, const PoOptions& opts, double vz_first) {
    const int last = model.phase_dim() - 1;
    auto at_amplitude = [&](const PeriodicOrbit& near, double vz) {
        Vec guess = near.z0;
        guess(last) = vz;
        return vertical_lyapunov_from_guess(model, guess, near.T_po, opts);
    };
    PeriodicOrbit a = vertical_lyapunov(model, vz_first, opts);
    if (std::abs(a.rho - rho_target) <= rho_tol) return a;
    // Walk the family until the target angle is bracketed, seeding each
    // correction from the previous orbit.
    PeriodicOrbit b = a;
    const bool walk_up = rho_target > a.rho;
    bool bracketed = false;
    double vz = vz_first;
    for (int k = 0; k < 80 && !bracketed; ++k) {
        vz *= walk_up ? 1.35 : 0.72;
        PeriodicOrbit nxt = at_amplitude(b, vz);
        if ((nxt.rho - rho_target) * (b.rho - rho_target) <= 0.0) {
            a = b;
            b = nxt;
            bracketed = true;
        } else {
            b = nxt;
        }
    }
    if (!bracketed)
        fail(ErrorCode::not_converged, "vertical_lyapunov_by_rho: target angle not bracketed");
    // Secant with bisection fallback inside the bracket [a, b].
    for (int it = 0; it < 80; ++it) {
        if (std::abs(a.rho - rho_target) <= rho_tol) return a;
        if (std::abs(b.rho - rho_target) <= rho_tol) return b;
        double va = a.z0(last), vb = b.z0(last);
        double denom = b.rho - a.rho;
        double vn = std::abs(denom) > 1e-15 ? vb - (b.rho - rho_target) * (vb - va) / denom
                                            : 0.5 * (va + vb);
        double lo = std::min(va, vb), hi = std::max(va, vb);
        if (!(vn > lo && vn < hi)) vn = 0.5 * (va + vb);
        PeriodicOrbit nxt = at_amplitude(b, vn);
        if ((nxt.rho - rho_target) * (a.rho - rho_target) <= 0.0)
            b = nxt;
        else
            a = nxt;
    }
    fail(ErrorCode::not_converged, "vertical_lyapunov_by_rho: secant did not reach tolerance");
}

std::vector<long> continued_fraction(double x, int max_terms) {
    std::vector<long> a;
    double frac = x - std::floor(x);
    for (int i = 0; i < max_terms && frac > 1e-13; ++i) {
        double inv = 1.0 / frac;
        long ai = static_cast<long>(std::floor(inv));
        if (ai < 1) break;
        a.push_back(ai);
        frac = inv - static_cast<double>(ai);
    }
    return a;
}

double nobilize(double rho, double tol, int side, int max_depth) {
    if (!(rho > 0.0 && rho < 1.0) || !(tol > 0.0))
        fail(ErrorCode::invalid_argument, "nobilize: need rho in (0,1) and tol > 0");
    const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
    auto evaluate = [&](const std::vector<long>& a) {
        double t = golden; // all-ones tail
        for (int i = static_cast<int>(a.size()) - 1; i >= 0; --i)
            t = static_cast<double>(a[i]) + 1.0 / t;
        return 1.0 / t;
    };
    std::vector<long> cf = continued_fraction(rho, max_depth);
    std::vector<double> candidates;
    candidates.push_back(evaluate({})); // 1/golden
    for (size_t k = 1; k <= cf.size(); ++k) {
        std::vector<long> head(cf.begin(), cf.begin() + k);
        candidates.push_back(evaluate(head));
        for (long delta : {-1L, +1L}) {
            std::vector<long> mod = head;
            mod.back() += delta;
            if (mod.back() >= 1) candidates.push_back(evaluate(mod));
        }
    }
    double best = 0.0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (double c : candidates) {
        if (side > 0 && c < rho) continue;
        if (side < 0 && c > rho) continue;
        double d = std::abs(c - rho);
        if (d <= tol && d < best_dist) {
            best = c;
            best_dist = d;
        }
    }
    if (!std::isfinite(best_dist)) {
        std::ostringstream msg;
        msg << "nobilize: no noble number within " << tol << " of " << rho
            << " at expansion depth " << max_depth;
        fail(ErrorCode::not_converged, msg.str());
    }
    return best;
}

TorusSolution linear_torus_seed(const PeriodicOrbit& po, const HamiltonianModel& model,
                                const SeedOptions& opts) {
    if (po.center_re.size() == 0)
        fail(ErrorCode::invalid_argument, "linear_torus_seed: orbit carries no unit-circle pair");
    const int nz = model.phase_dim();
    double omega = nobilize(po.rho, opts.noble_tol, opts.noble_side);

    GridSpec gs{1, 0, opts.n1, 1};
    TorusSolution sol;
    sol.epsilon = 0.0;
    sol.lambda = po.lambda_u;
    sol.T = po.T_po;
    sol.rot = RotationData::make(omega, 0.0, po.T_po, true, false);
    sol.model_id = model.id();
    sol.h_label = po.energy;

    Segment seg{TorusMap(gs, nz), TorusMap(gs, nz)};
    for (int c = 0; c < nz; ++c) {
        for (int i = 0; i < gs.n1; ++i) {
            double th = twopi * gs.theta(i);
            seg.K.set_value(c, i, 0,
                            po.z0(c) + opts.s * (std::cos(th) * po.center_re(c) -
                                                 std::sin(th) * po.center_im(c)));
            seg.W.set_value(c, i, 0, po.unstable_dir(c));
        }
    }
    sol.segments.push_back(std::move(seg));
    sol.validate();
    return sol;
}

TorusSolution lift_external(const TorusSolution& sol, int n2) {
    if (sol.grid().d_phi != 0)
        fail(ErrorCode::invalid_argument, "lift_external: solution already has an external angle");
    GridSpec gs{sol.grid().d_theta, 1, sol.grid().n1, n2};
    gs.validate();
    TorusSolution out = sol;
    out.rot = RotationData::make(sol.rot.omega, sol.T / twopi, sol.T, sol.rot.theta_active, true);
    for (auto& seg : out.segments) {
        for (TorusMap* f : {&seg.K, &seg.W}) {
            TorusMap lifted(gs, f->components());
            for (int c = 0; c < f->components(); ++c)
                for (int i = 0; i < gs.n1; ++i)
                    for (int j = 0; j < gs.n2; ++j)
                        lifted.set_value(c, i, j, f->value(c, i, 0));
            *f = std::move(lifted);
        }
    }
    return out;
}

} // namespace toriqp
