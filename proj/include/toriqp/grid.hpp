#pragma once

#include <atomic>
#include <complex>
#include <mutex>
#include <vector>

#include "toriqp/errors.hpp"

namespace toriqp {

enum class Axis { theta, phi };

// Sampling of the angle domain T^{d_theta} x T^{d_phi}. Degenerate axes are
// carried as size-1 dimensions so autonomous and quasi-periodic problems run
// through the same code paths.
struct GridSpec {
    int d_theta = 1;
    int d_phi = 0;
    int n1 = 1; // grid size in theta; power of two >= 4, or 1 when d_theta == 0
    int n2 = 1; // grid size in phi

    void validate() const;
    int nodes() const { return n1 * n2; }
    double theta(int i) const { return static_cast<double>(i) / n1; }
    double phi(int j) const { return static_cast<double>(j) / n2; }
    bool has(Axis axis) const { return axis == Axis::theta ? d_theta > 0 : d_phi > 0; }
    bool operator==(const GridSpec& o) const {
        return d_theta == o.d_theta && d_phi == o.d_phi && n1 == o.n1 && n2 == o.n2;
    }
    bool operator!=(const GridSpec& o) const { return !(*this == o); }
};

// Real multi-component periodic map on the torus, held in dual grid/spectral
// form. The two representations are synchronized lazily; synchronization of a
// shared map is serialized internally so const access is safe from parallel
// workers. All operations below are pure and return new maps.
//
// Spectral storage uses the full complex DFT array with Fourier index
// k in [-n1/2, n1/2) stored at bin (k + n1) mod n1 (same for j). Coefficients
// of a real map satisfy conj symmetry; Nyquist rows are zeroed after every
// forward transform so shifts by arbitrary angles keep the map real.
class TorusMap {
  public:
    using cplx = std::complex<double>;

    TorusMap(); // empty 1x1, 0 components
    TorusMap(const GridSpec& spec, int components); // zero map

    TorusMap(const TorusMap& o);
    TorusMap& operator=(const TorusMap& o);
    TorusMap(TorusMap&& o) noexcept;
    TorusMap& operator=(TorusMap&& o) noexcept;

    const GridSpec& spec() const { return spec_; }
    int components() const { return comps_; }

    // Grid access. Writing invalidates the spectral side.
    double value(int c, int i, int j) const;
    void set_value(int c, int i, int j, double v);
    const std::vector<double>& grid_data() const; // [c][i][j] row-major
    std::vector<double>& mutable_grid_data();

    // Spectral access by Fourier index. Writing invalidates the grid side.
    cplx coeff(int c, int k, int l) const;
    void set_coeff(int c, int k, int l, cplx v);
    const std::vector<cplx>& spectral_data() const;
    std::vector<cplx>& mutable_spectral_data();

    void ensure_grid() const;
    void ensure_spectral() const;
    bool grid_valid() const { return grid_valid_; }
    bool spectral_valid() const { return spectral_valid_; }

    int index(int c, int i, int j) const { return (c * spec_.n1 + i) * spec_.n2 + j; }
    int bin1(int k) const { return ((k % spec_.n1) + spec_.n1) % spec_.n1; }
    int bin2(int l) const { return ((l % spec_.n2) + spec_.n2) % spec_.n2; }

    double sup_norm() const; // max over components and nodes of |value|

  private:
    void check_node(int c, int i, int j) const;

    GridSpec spec_;
    int comps_ = 0;
    mutable std::vector<double> grid_;
    mutable std::vector<cplx> spectral_;
    mutable std::atomic<bool> grid_valid_{false};
    mutable std::atomic<bool> spectral_valid_{false};
    mutable std::mutex sync_;
};

// Returns a copy with the spectral side synchronized (DFT of the grid values,
// Nyquist rows zeroed, conjugate symmetry enforced). Rejects non-finite input.
TorusMap to_spectral(const TorusMap& f);

// Returns a copy with the grid side synchronized.
TorusMap to_grid(const TorusMap& f);

// f(theta + a, phi + b): coefficient (k,l) multiplied by e^{i 2 pi (k a + l b)}.
TorusMap shift(const TorusMap& f, double a, double b);

// Coefficient (k,l) multiplied by i 2 pi k (theta) or i 2 pi l (phi).
TorusMap derivative(const TorusMap& f, Axis axis);

// Mean value per component (the (0,0) coefficient).
std::vector<double> average(const TorusMap& f);

struct TailNorms {
    std::vector<double> theta; // per component
    std::vector<double> phi;
    double max_theta() const;
    double max_phi() const;
};

// Absolute-sum tails outside the window k_t = floor(r_t n1), j_t = floor(r_t n2).
TailNorms tail_norms(const TorusMap& f, double r_t);

// Zeroes coefficients with |k| > r_f n1 or |l| > r_f n2; r_f in [1/4, 1/2).
TorusMap lowpass(const TorusMap& f, double r_f);

// Zero-pads the spectrum into a grid doubled along one axis.
TorusMap refine_grid(const TorusMap& f, Axis axis, int max_size = 1024);

// Convenience: sup norm of f - g (grids must match).
double sup_distance(const TorusMap& f, const TorusMap& g);

} // namespace toriqp
