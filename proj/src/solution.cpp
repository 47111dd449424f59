#include "toriqp/solution.hpp"

#include <cmath>
#include <sstream>

namespace toriqp {

double TorusSolution::lambda_root() const {
    if (m() == 1) return lambda;
    if (!(lambda > 0.0))
        fail(ErrorCode::invalid_argument, "lambda_root: multiple shooting needs lambda > 0");
    return std::pow(lambda, 1.0 / m());
}

void TorusSolution::validate(double max_root) const {
    if (segments.empty()) fail(ErrorCode::invalid_argument, "TorusSolution: no segments");
    if (lambda == 0.0) fail(ErrorCode::invalid_argument, "TorusSolution: lambda must be nonzero");
    if (!(T > 0.0)) fail(ErrorCode::invalid_argument, "TorusSolution: T must be positive");
    const GridSpec& g = segments[0].K.spec();
    const int c = segments[0].K.components();
    for (const auto& seg : segments) {
        if (seg.K.spec() != g || seg.W.spec() != g)
            fail(ErrorCode::invalid_argument, "TorusSolution: segments must share one grid");
        if (seg.K.components() != c || seg.W.components() != c)
            fail(ErrorCode::invalid_argument, "TorusSolution: component count mismatch");
    }
    double root = std::pow(std::abs(lambda), 1.0 / m());
    if (root > max_root) {
        std::ostringstream msg;
        msg << "TorusSolution: |lambda|^(1/m) = " << root << " exceeds bound " << max_root
            << "; increase the shooting count";
        fail(ErrorCode::invalid_argument, msg.str());
    }
}

double solution_norm(const TorusSolution& sol) {
    double acc = sol.epsilon * sol.epsilon + sol.lambda * sol.lambda;
    for (const auto& seg : sol.segments) {
        for (const TorusMap* f : {&seg.K, &seg.W}) {
            const auto& g = f->grid_data();
            const int nn = f->spec().nodes();
            double s = 0.0;
            for (double v : g) s += v * v;
            acc += s / nn; // <|f|_2^2> summed over components
        }
    }
    return std::sqrt(acc);
}

} // namespace toriqp
