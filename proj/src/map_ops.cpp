#include "toriqp/map_ops.hpp"

#include <algorithm>
#include <cmath>

namespace toriqp {

Vec node_vector(const TorusMap& f, int i, int j) {
    const auto& g = f.grid_data();
    const int nn = f.spec().nodes();
    Vec v(f.components());
    for (int c = 0; c < f.components(); ++c)
        v(c) = g[static_cast<size_t>(c) * nn + static_cast<size_t>(i) * f.spec().n2 + j];
    return v;
}

void set_node_vector(TorusMap& f, int i, int j, const Vec& v) {
    auto& g = f.mutable_grid_data();
    const int nn = f.spec().nodes();
    for (int c = 0; c < f.components(); ++c)
        g[static_cast<size_t>(c) * nn + static_cast<size_t>(i) * f.spec().n2 + j] = v(c);
}

Mat node_matrix(const TorusMap& f, int i, int j, int rows, int cols) {
    Vec v = node_vector(f, i, j);
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = v(r * cols + c);
    return m;
}

void set_node_matrix(TorusMap& f, int i, int j, const Mat& m) {
    Vec v(m.rows() * m.cols());
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) v(r * m.cols() + c) = m(r, c);
    set_node_vector(f, i, j, v);
}

TorusMap matmap_apply(const TorusMap& A, int rows, int cols, const TorusMap& x) {
    if (A.components() != rows * cols || x.components() != cols || A.spec() != x.spec())
        fail(ErrorCode::invalid_argument, "matmap_apply: layout mismatch");
    TorusMap y(A.spec(), rows);
    const auto& ga = A.grid_data();
    const auto& gx = x.grid_data();
    auto& gy = y.mutable_grid_data();
    const int nn = A.spec().nodes();
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const double* pa = ga.data() + static_cast<size_t>(r * cols + c) * nn;
            const double* px = gx.data() + static_cast<size_t>(c) * nn;
            double* py = gy.data() + static_cast<size_t>(r) * nn;
            for (int q = 0; q < nn; ++q) py[q] += pa[q] * px[q];
        }
    }
    return y;
}

TorusMap extract_components(const TorusMap& f, int c0, int count) {
    if (c0 < 0 || c0 + count > f.components())
        fail(ErrorCode::invalid_argument, "extract_components: range out of bounds");
    TorusMap out(f.spec(), count);
    const auto& g = f.grid_data();
    auto& og = out.mutable_grid_data();
    const int nn = f.spec().nodes();
    std::copy(g.begin() + static_cast<size_t>(c0) * nn,
              g.begin() + static_cast<size_t>(c0 + count) * nn, og.begin());
    return out;
}

void insert_components(TorusMap& f, int c0, const TorusMap& part) {
    if (f.spec() != part.spec() || c0 + part.components() > f.components())
        fail(ErrorCode::invalid_argument, "insert_components: layout mismatch");
    const auto& g = part.grid_data();
    auto& og = f.mutable_grid_data();
    const int nn = f.spec().nodes();
    std::copy(g.begin(), g.end(), og.begin() + static_cast<size_t>(c0) * nn);
}

TorusMap add_scaled(const TorusMap& f, const TorusMap& g, double a) {
    TorusMap out = f;
    add_scaled_inplace(out, g, a);
    return out;
}

void add_scaled_inplace(TorusMap& f, const TorusMap& g, double a) {
    if (f.spec() != g.spec() || f.components() != g.components())
        fail(ErrorCode::invalid_argument, "add_scaled: layout mismatch");
    auto& gf = f.mutable_grid_data();
    const auto& gg = g.grid_data();
    for (size_t i = 0; i < gf.size(); ++i) gf[i] += a * gg[i];
}

void scale_inplace(TorusMap& f, double a) {
    auto& g = f.mutable_grid_data();
    for (double& v : g) v *= a;
}

TorusMap shift_rotation(const TorusMap& f, double omega_m, double alpha_m, int k) {
    if (k == 0) return f;
    return shift(f, k * omega_m, k * alpha_m);
}

double max_node_inf_norm(const TorusMap& f) {
    return f.sup_norm();
}

} // namespace toriqp
