#include "toriqp/model.hpp"

#include "toriqp/ertbp.hpp"

namespace toriqp {

Mat standard_omega(int n) {
    Mat o = Mat::Zero(2 * n, 2 * n);
    o.block(0, n, n, n) = -Mat::Identity(n, n);
    o.block(n, 0, n, n) = Mat::Identity(n, n);
    return o;
}

Mat standard_j(int n) { return standard_omega(n); }

Mat HamiltonianModel::Omega(const Vec&) const { return standard_omega(dof()); }

Mat HamiltonianModel::Omega_inv(const Vec&) const {
    return standard_omega(dof()).transpose();
}

Vec HamiltonianModel::action_form(const Vec& z) const {
    // a0(z) = (1/2) [[0, I], [-I, 0]] z
    const int n = dof();
    Vec a(2 * n);
    a.head(n) = 0.5 * z.tail(n);
    a.tail(n) = -0.5 * z.head(n);
    return a;
}

Mat HamiltonianModel::complex_structure(const Vec&) const { return standard_j(dof()); }

Mat HamiltonianModel::metric(const Vec& z) const {
    return -Omega(z) * complex_structure(z);
}

std::unique_ptr<HamiltonianModel> make_model(const std::string& name, double mu) {
    if (name == "ertbp") return std::make_unique<ErtbpModel>(mu);
    fail(ErrorCode::invalid_argument, "make_model: unknown model '" + name + "'");
}

} // namespace toriqp
