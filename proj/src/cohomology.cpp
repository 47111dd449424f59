#include "toriqp/cohomology.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace toriqp {

RotationData RotationData::make(double omega, double alpha, double T, bool theta_active,
                                bool phi_active) {
    RotationData r;
    r.omega = theta_active ? omega : 0.0;
    r.alpha = phi_active ? alpha : 0.0;
    r.T = T;
    r.theta_active = theta_active;
    r.phi_active = phi_active;
    r.tau = std::max(1, (theta_active ? 1 : 0) + (phi_active ? 1 : 0));
    r.validate();
    return r;
}

void RotationData::validate() const {
    if (!(T > 0.0)) fail(ErrorCode::invalid_argument, "RotationData: T must be positive");
    if (!std::isfinite(omega) || !std::isfinite(alpha))
        fail(ErrorCode::non_finite, "RotationData: non-finite rotation");
}

namespace {

using cplx = std::complex<double>;

// Shared coefficientwise division. divisor(k, l) supplies the mode divisor;
// zero_mode handles (0,0) separately when free_avg is set.
template <typename DivisorFn>
TorusMap divide_modes(const TorusMap& eta, const RotationData& rot, DivisorFn divisor,
                      const std::vector<double>* free_avg, const CohomologyOptions& opts) {
    eta.ensure_spectral();
    TorusMap xi(eta.spec(), eta.components());
    auto& out = xi.mutable_spectral_data();
    const auto& in = eta.spectral_data();
    const int n1 = eta.spec().n1, n2 = eta.spec().n2;
    const double active_floor = opts.active_rel * (1.0 + eta.sup_norm());
    for (int c = 0; c < eta.components(); ++c) {
        for (int i = 0; i < n1; ++i) {
            int k = i <= n1 / 2 ? i : i - n1;
            for (int j = 0; j < n2; ++j) {
                int l = j <= n2 / 2 ? j : j - n2;
                const int idx = eta.index(c, i, j);
                if (free_avg && k == 0 && l == 0) {
                    out[idx] = cplx((*free_avg)[c], 0.0);
                    continue;
                }
                cplx d = divisor(k, l);
                if (std::abs(d) < opts.divisor_min) {
                    if (std::abs(in[idx]) <= active_floor) {
                        out[idx] = 0.0;
                        continue;
                    }
                    std::ostringstream msg;
                    msg << "cohomological divisor " << std::abs(d) << " below floor at mode (k="
                        << k << ", j=" << l << "), omega=" << rot.omega << ", alpha=" << rot.alpha;
                    fail(ErrorCode::resonance, msg.str());
                }
                out[idx] = in[idx] / d;
            }
        }
    }
    return xi;
}

} // namespace

TorusMap solve_nonsmall(const TorusMap& eta, double lambda, double mu,
                        const RotationData& rot, const CohomologyOptions& opts) {
    rot.validate();
    if (std::abs(std::abs(lambda) - std::abs(mu)) <= 1e-15 * (std::abs(lambda) + std::abs(mu)))
        fail(ErrorCode::invalid_argument, "solve_nonsmall: |lambda| == |mu|");
    const double twopi = 2.0 * std::numbers::pi;
    auto divisor = [&](int k, int l) {
        return lambda - mu * std::polar(1.0, twopi * (k * rot.omega + l * rot.alpha));
    };
    return divide_modes(eta, rot, divisor, nullptr, opts);
}

TorusMap solve_small(const TorusMap& eta, const RotationData& rot,
                     const std::vector<double>& free_average, const CohomologyOptions& opts) {
    rot.validate();
    if (static_cast<int>(free_average.size()) != eta.components())
        fail(ErrorCode::invalid_argument, "solve_small: free average size mismatch");
    auto avg = average(eta);
    for (int c = 0; c < eta.components(); ++c) {
        if (std::abs(avg[c]) > opts.zero_average_tol) {
            std::ostringstream msg;
            msg << "solve_small: |<eta>| = " << std::abs(avg[c]) << " in component " << c
                << " exceeds tolerance " << opts.zero_average_tol;
            fail(ErrorCode::cancellation, msg.str());
        }
    }
    // Work on eta - <eta> so the zero mode is exactly the free average.
    TorusMap centered = eta;
    centered.ensure_spectral();
    for (int c = 0; c < eta.components(); ++c)
        centered.set_coeff(c, 0, 0, 0.0);
    const double twopi = 2.0 * std::numbers::pi;
    auto divisor = [&](int k, int l) {
        return 1.0 - std::polar(1.0, twopi * (k * rot.omega + l * rot.alpha));
    };
    return divide_modes(centered, rot, divisor, &free_average, opts);
}

TorusMap solve_small(const TorusMap& eta, const RotationData& rot, double free_average,
                     const CohomologyOptions& opts) {
    return solve_small(eta, rot, std::vector<double>(eta.components(), free_average), opts);
}

double diophantine_margin(const RotationData& rot, int K_max) {
    if (K_max < 1) fail(ErrorCode::invalid_argument, "diophantine_margin: K_max must be >= 1");
    const int kr = rot.theta_active ? K_max : 0;
    const int jr = rot.phi_active ? K_max : 0;
    double margin = std::numeric_limits<double>::infinity();
    for (int k = -kr; k <= kr; ++k) {
        for (int j = -jr; j <= jr; ++j) {
            int order = std::abs(k) + std::abs(j);
            if (order == 0 || order > K_max) continue;
            double x = k * rot.omega + j * rot.alpha;
            double dist = std::abs(x - std::round(x));
            margin = std::min(margin, dist * std::pow(order, rot.tau));
        }
    }
    return std::isfinite(margin) ? margin : 0.0;
}

} // namespace toriqp
