#pragma once

#include <array>

#include "toriqp/model.hpp"

namespace toriqp {

// Elliptic Restricted Three Body Problem in the rotating-pulsating frame,
// nondimensional units: primaries of mass 1-mu and mu at (mu,0,0) and
// (mu-1,0,0), revolution period 2 pi, true anomaly f = 2 pi phi, external
// frequency alpha_hat = 1/(2 pi). The eccentricity e is the model parameter
// eps; at e = 0 the field is phi-independent (CRTBP).
//
// H = (1/2)[(p1+x2)^2 + (p2-x1)^2 + p3^2 + x3^2]
//     - [ (1/2)|x|^2 + (1-mu)/r1 + mu/r2 ] / (1 + e cos f)
class ErtbpModel final : public HamiltonianModel {
  public:
    explicit ErtbpModel(double mu, double collision_radius = 1e-8);

    int dof() const override { return 3; }
    int ell() const override { return 1; }
    double external_frequency() const override;
    std::string id() const override { return "ertbp"; }
    double mu() const { return mu_; }

    double hamiltonian(const Vec& z, double phi, double eps) const override;
    Vec grad_z(const Vec& z, double phi, double eps) const override;
    double dphi_h(const Vec& z, double phi, double eps) const override;
    double deps_h(const Vec& z, double phi, double eps) const override;
    Vec field(const Vec& z, double phi, double eps) const override;
    Mat field_jacobian(const Vec& z, double phi, double eps) const override;
    Vec field_dphi(const Vec& z, double phi, double eps) const override;
    Vec field_deps(const Vec& z, double phi, double eps) const override;
    Vec field_hessian_apply(const Vec& z, double phi, double eps, const Vec& u,
                            const Vec& v) const override;
    Mat field_deps_jacobian(const Vec& z, double phi, double eps) const override;

  private:
    struct Terms; // potential gradient/Hessian at one point
    Terms potential(const Vec& z) const;
    double pulsation(double phi, double eps) const;      // 1/(1 + e cos f)
    double pulsation_dphi(double phi, double eps) const;
    double pulsation_deps(double phi, double eps) const;

    double mu_;
    double collision_radius_;
};

// Equilibrium states, ordered L1..L5: L1 between the primaries, L2 beyond the
// smaller, L3 beyond the larger, L4/L5 triangular (x2 > 0 / x2 < 0).
// Collinear abscissas from the on-axis balance (the Euler quintic) by
// safeguarded Newton to 1e-14; triangular points analytic.
std::array<Vec, 5> lagrange_points(double mu);

} // namespace toriqp
