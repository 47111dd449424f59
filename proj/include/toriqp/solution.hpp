#pragma once

#include <string>
#include <vector>

#include "toriqp/cohomology.hpp"
#include "toriqp/grid.hpp"

namespace toriqp {

// One multiple-shooting segment: torus and rank-1 bundle parameterizations,
// each with 2n components on a shared grid.
struct Segment {
    TorusMap K;
    TorusMap W;
};

// Full state of one computed object. For m segments the invariance couples
// segment i to segment i+1 (cyclic) under the time-T/m map and the rotation
// fraction (omega/m, alpha/m); the Floquet multiplier stored is the full
// lambda, with lambda^{1/m} acting per segment.
struct TorusSolution {
    double epsilon = 0.0;
    std::vector<Segment> segments;
    double lambda = 1.0;
    double T = 1.0;
    RotationData rot;
    std::string model_id;
    double h_label = 0.0; // energy of the originating autonomous seed; label only

    int m() const { return static_cast<int>(segments.size()); }
    const GridSpec& grid() const { return segments.at(0).K.spec(); }
    int phase_dim() const { return segments.at(0).K.components(); }
    double chi() const { return std::log(std::abs(lambda)) / T; }
    double lambda_root() const; // lambda^(1/m), requires lambda > 0 for m > 1
    double segment_time() const { return T / m(); }

    // Structural invariants: shared grid spec, lambda != 0, m >= 1, bounded
    // |lambda|^(1/m).
    void validate(double max_root = 50.0) const;
};

// (eps, lambda, K, W) norm used by the continuation step-size control,
// segment contributions summed.
double solution_norm(const TorusSolution& sol);

} // namespace toriqp
