#include "toriqp/ertbp.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace toriqp {

namespace {
constexpr double twopi = 2.0 * std::numbers::pi;
}

ErtbpModel::ErtbpModel(double mu, double collision_radius)
    : mu_(mu), collision_radius_(collision_radius) {
    if (!(mu > 0.0 && mu <= 0.5))
        fail(ErrorCode::invalid_argument, "ErtbpModel: mu must lie in (0, 1/2]");
}

double ErtbpModel::external_frequency() const { return 1.0 / twopi; }

struct ErtbpModel::Terms {
    double U;          // potential (1/2)|x|^2 + (1-mu)/r1 + mu/r2
    Eigen::Vector3d g; // gradient
    Eigen::Matrix3d H; // Hessian
    Eigen::Vector3d d1, d2;
    double r1, r2;
};

ErtbpModel::Terms ErtbpModel::potential(const Vec& z) const {
    Terms t;
    Eigen::Vector3d x = z.head<3>();
    t.d1 = x - Eigen::Vector3d(mu_, 0, 0);
    t.d2 = x - Eigen::Vector3d(mu_ - 1.0, 0, 0);
    t.r1 = t.d1.norm();
    t.r2 = t.d2.norm();
    if (t.r1 < collision_radius_ || t.r2 < collision_radius_) {
        std::ostringstream msg;
        msg << "ertbp: state within collision radius, r1=" << t.r1 << " r2=" << t.r2 << " at x=("
            << x(0) << ", " << x(1) << ", " << x(2) << ")";
        fail(ErrorCode::collision, msg.str());
    }
    const double m1 = 1.0 - mu_, m2 = mu_;
    const double r13 = t.r1 * t.r1 * t.r1, r23 = t.r2 * t.r2 * t.r2;
    const double r15 = r13 * t.r1 * t.r1, r25 = r23 * t.r2 * t.r2;
    t.U = 0.5 * x.squaredNorm() + m1 / t.r1 + m2 / t.r2;
    t.g = x - m1 * t.d1 / r13 - m2 * t.d2 / r23;
    t.H = Eigen::Matrix3d::Identity() +
          m1 * (3.0 * t.d1 * t.d1.transpose() / r15 - Eigen::Matrix3d::Identity() / r13) +
          m2 * (3.0 * t.d2 * t.d2.transpose() / r25 - Eigen::Matrix3d::Identity() / r23);
    return t;
}

double ErtbpModel::pulsation(double phi, double eps) const {
    return 1.0 / (1.0 + eps * std::cos(twopi * phi));
}

double ErtbpModel::pulsation_dphi(double phi, double eps) const {
    double g = pulsation(phi, eps);
    return twopi * eps * std::sin(twopi * phi) * g * g;
}

double ErtbpModel::pulsation_deps(double phi, double eps) const {
    double g = pulsation(phi, eps);
    return -std::cos(twopi * phi) * g * g;
}

double ErtbpModel::hamiltonian(const Vec& z, double phi, double eps) const {
    Terms t = potential(z);
    const double k1 = z(3) + z(1), k2 = z(4) - z(0);
    return 0.5 * (k1 * k1 + k2 * k2 + z(5) * z(5) + z(2) * z(2)) - pulsation(phi, eps) * t.U;
}

Vec ErtbpModel::grad_z(const Vec& z, double phi, double eps) const {
    Terms t = potential(z);
    const double g = pulsation(phi, eps);
    const double k1 = z(3) + z(1), k2 = z(4) - z(0);
    Vec out(6);
    out(0) = -k2 - g * t.g(0);
    out(1) = k1 - g * t.g(1);
    out(2) = z(2) - g * t.g(2);
    out(3) = k1;
    out(4) = k2;
    out(5) = z(5);
    return out;
}

double ErtbpModel::dphi_h(const Vec& z, double phi, double eps) const {
    return -pulsation_dphi(phi, eps) * potential(z).U;
}

double ErtbpModel::deps_h(const Vec& z, double phi, double eps) const {
    return -pulsation_deps(phi, eps) * potential(z).U;
}

Vec ErtbpModel::field(const Vec& z, double phi, double eps) const {
    Terms t = potential(z);
    const double g = pulsation(phi, eps);
    const double k1 = z(3) + z(1), k2 = z(4) - z(0);
    Vec out(6);
    out(0) = k1;
    out(1) = k2;
    out(2) = z(5);
    out(3) = k2 + g * t.g(0);
    out(4) = -k1 + g * t.g(1);
    out(5) = -z(2) + g * t.g(2);
    return out;
}

Mat ErtbpModel::field_jacobian(const Vec& z, double phi, double eps) const {
    Terms t = potential(z);
    const double g = pulsation(phi, eps);
    Mat A = Mat::Zero(6, 6);
    A(0, 1) = 1.0;
    A(0, 3) = 1.0;
    A(1, 0) = -1.0;
    A(1, 4) = 1.0;
    A(2, 5) = 1.0;
    A.block<3, 3>(3, 0) = g * t.H - Eigen::Matrix3d::Identity();
    A(3, 4) = 1.0;
    A(4, 3) = -1.0;
    return A;
}

Vec ErtbpModel::field_dphi(const Vec& z, double phi, double eps) const {
    Terms t = potential(z);
    Vec out = Vec::Zero(6);
    out.tail<3>() = pulsation_dphi(phi, eps) * t.g;
    return out;
}

Vec ErtbpModel::field_deps(const Vec& z, double phi, double eps) const {
    Terms t = potential(z);
    Vec out = Vec::Zero(6);
    out.tail<3>() = pulsation_deps(phi, eps) * t.g;
    return out;
}

Vec ErtbpModel::field_hessian_apply(const Vec& z, double phi, double eps, const Vec& u,
                                    const Vec& v) const {
    Terms t = potential(z);
    const double g = pulsation(phi, eps);
    Eigen::Vector3d ux = u.head<3>(), vx = v.head<3>();
    auto third = [](const Eigen::Vector3d& d, double r, const Eigen::Vector3d& a,
                    const Eigen::Vector3d& b) -> Eigen::Vector3d {
        const double r5 = std::pow(r, 5), r7 = r5 * r * r;
        return -3.0 * (a * d.dot(b) + b * d.dot(a) + d * a.dot(b)) / r5 +
               15.0 * d * (d.dot(a) * d.dot(b)) / r7;
    };
    Eigen::Vector3d w = (1.0 - mu_) * third(t.d1, t.r1, ux, vx) + mu_ * third(t.d2, t.r2, ux, vx);
    Vec out = Vec::Zero(6);
    out.tail<3>() = g * w;
    return out;
}

Mat ErtbpModel::field_deps_jacobian(const Vec& z, double phi, double eps) const {
    Terms t = potential(z);
    Mat A = Mat::Zero(6, 6);
    A.block<3, 3>(3, 0) = pulsation_deps(phi, eps) * t.H;
    return A;
}

namespace {

// On-axis force balance whose roots are the collinear points.
double axis_balance(double x, double mu) {
    double d1 = x - mu, d2 = x - mu + 1.0;
    return x - (1.0 - mu) * d1 / std::pow(std::abs(d1), 3) - mu * d2 / std::pow(std::abs(d2), 3);
}

double axis_balance_deriv(double x, double mu) {
    double d1 = x - mu, d2 = x - mu + 1.0;
    return 1.0 + 2.0 * (1.0 - mu) / std::pow(std::abs(d1), 3) + 2.0 * mu / std::pow(std::abs(d2), 3);
}

double solve_collinear(double lo, double hi, double mu) {
    double flo = axis_balance(lo, mu);
    double fhi = axis_balance(hi, mu);
    if (flo * fhi > 0.0)
        fail(ErrorCode::invalid_argument, "lagrange_points: collinear root not bracketed");
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        double f = axis_balance(x, mu);
        if (f == 0.0) return x;
        if ((f > 0) == (flo > 0)) lo = x; else hi = x;
        double step = f / axis_balance_deriv(x, mu);
        double xn = x - step;
        if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi); // bisection safeguard
        if (std::abs(xn - x) < 1e-16 * std::max(1.0, std::abs(x)) && std::abs(f) < 1e-14)
            return xn;
        x = xn;
    }
    return x;
}

Vec equilibrium_state(double x1, double x2) {
    Vec z(6);
    z << x1, x2, 0.0, -x2, x1, 0.0;
    return z;
}

} // namespace

std::array<Vec, 5> lagrange_points(double mu) {
    if (!(mu > 0.0 && mu <= 0.5))
        fail(ErrorCode::invalid_argument, "lagrange_points: mu must lie in (0, 1/2]");
    const double gap = 1e-9;
    double x_l1 = solve_collinear(mu - 1.0 + gap, mu - gap, mu);
    double x_l2 = solve_collinear(mu - 3.0, mu - 1.0 - gap, mu);
    double x_l3 = solve_collinear(mu + gap, mu + 3.0, mu);
    const double s3 = std::sqrt(3.0) / 2.0;
    std::array<Vec, 5> pts;
    pts[0] = equilibrium_state(x_l1, 0.0);
    pts[1] = equilibrium_state(x_l2, 0.0);
    pts[2] = equilibrium_state(x_l3, 0.0);
    pts[3] = equilibrium_state(mu - 0.5, s3);
    pts[4] = equilibrium_state(mu - 0.5, -s3);
    return pts;
}

} // namespace toriqp
