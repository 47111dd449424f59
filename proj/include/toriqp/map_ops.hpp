#pragma once

#include "toriqp/grid.hpp"
#include "toriqp/model.hpp"

namespace toriqp {

// Helpers treating a TorusMap as a field of vectors or row-major matrices
// (component index = r * cols + c).

Vec node_vector(const TorusMap& f, int i, int j);
void set_node_vector(TorusMap& f, int i, int j, const Vec& v);
Mat node_matrix(const TorusMap& f, int i, int j, int rows, int cols);
void set_node_matrix(TorusMap& f, int i, int j, const Mat& m);

// Nodewise y = A x for a matrix map A (rows x cols) and vector map x (cols).
TorusMap matmap_apply(const TorusMap& A, int rows, int cols, const TorusMap& x);

// Component range [c0, c0+count) as its own map.
TorusMap extract_components(const TorusMap& f, int c0, int count);
void insert_components(TorusMap& f, int c0, const TorusMap& part);

TorusMap add_scaled(const TorusMap& f, const TorusMap& g, double a); // f + a g
void add_scaled_inplace(TorusMap& f, const TorusMap& g, double a);
void scale_inplace(TorusMap& f, double a);

// Grid shift by whole segments: f(. + k omega_m, . + k alpha_m).
TorusMap shift_rotation(const TorusMap& f, double omega_m, double alpha_m, int k = 1);

double max_node_inf_norm(const TorusMap& f); // max over nodes of |.|_inf over components

} // namespace toriqp
