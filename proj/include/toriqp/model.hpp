#pragma once

#include <Eigen/Dense>

#include <memory>
#include <string>

#include "toriqp/errors.hpp"

namespace toriqp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Quasi-periodic Hamiltonian family H(z, phi; eps) with phase dim 2n and at
// most one external angle. Evaluators must be reentrant with no hidden
// mutable state; the flow layer maps them over grid nodes in parallel.
//
// The symplectic structure data default to the standard constant forms
// Omega0, a0, J0, G0; models with z-dependent structure override them.
class HamiltonianModel {
  public:
    virtual ~HamiltonianModel() = default;

    virtual int dof() const = 0;   // n
    virtual int ell() const = 0;   // external angle count (0 or 1)
    virtual double external_frequency() const = 0; // alpha_hat
    virtual std::string id() const = 0;

    virtual double hamiltonian(const Vec& z, double phi, double eps) const = 0;
    virtual Vec grad_z(const Vec& z, double phi, double eps) const = 0; // (D_z H)^T
    virtual double dphi_h(const Vec& z, double phi, double eps) const = 0;
    virtual double deps_h(const Vec& z, double phi, double eps) const = 0;

    virtual Vec field(const Vec& z, double phi, double eps) const = 0; // X_H
    virtual Mat field_jacobian(const Vec& z, double phi, double eps) const = 0; // D_z X_H
    virtual Vec field_dphi(const Vec& z, double phi, double eps) const = 0;
    virtual Vec field_deps(const Vec& z, double phi, double eps) const = 0;
    // Bilinear D^2_z X_H [u, v].
    virtual Vec field_hessian_apply(const Vec& z, double phi, double eps, const Vec& u,
                                    const Vec& v) const = 0;
    virtual Mat field_deps_jacobian(const Vec& z, double phi, double eps) const = 0;
    virtual bool has_second_derivatives() const { return true; }

    virtual Mat Omega(const Vec& z) const;       // symplectic form matrix
    virtual Mat Omega_inv(const Vec& z) const;
    virtual Vec action_form(const Vec& z) const; // a(z)
    virtual Mat complex_structure(const Vec& z) const; // J(z)
    virtual Mat metric(const Vec& z) const;      // G(z) = -Omega J

    int phase_dim() const { return 2 * dof(); }
};

Mat standard_omega(int n);
Mat standard_j(int n);

// Model factory used by the persistence layer and the C API. Only "ertbp" is
// registered.
std::unique_ptr<HamiltonianModel> make_model(const std::string& name, double mu);

} // namespace toriqp
