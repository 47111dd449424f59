#include "toriqp/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numbers>

namespace toriqp {

namespace {

bool power_of_two(int n) { return n >= 1 && (n & (n - 1)) == 0; }

// FFTW planning is not thread safe, and plans are bound to buffers. Each
// (n1, n2, direction) gets a cached plan with its own scratch arrays; one
// mutex serializes copy-in/execute/copy-out per entry.
struct PlanEntry {
    fftw_plan plan = nullptr;
    fftw_complex* in = nullptr;
    fftw_complex* out = nullptr;
    std::mutex mtx;
};

PlanEntry& plan_for(int n1, int n2, int sign) {
    static std::mutex table_mtx;
    static std::map<std::tuple<int, int, int>, PlanEntry*> table;
    std::lock_guard<std::mutex> lk(table_mtx);
    auto key = std::make_tuple(n1, n2, sign);
    auto it = table.find(key);
    if (it != table.end()) return *it->second;
    auto* e = new PlanEntry;
    e->in = fftw_alloc_complex(static_cast<size_t>(n1) * n2);
    e->out = fftw_alloc_complex(static_cast<size_t>(n1) * n2);
    e->plan = fftw_plan_dft_2d(n1, n2, e->in, e->out, sign, FFTW_ESTIMATE);
    table[key] = e;
    return *e;
}

void run_fft(int n1, int n2, int sign, const std::complex<double>* in,
             std::complex<double>* out) {
    PlanEntry& e = plan_for(n1, n2, sign);
    std::lock_guard<std::mutex> lk(e.mtx);
    std::memcpy(e.in, in, sizeof(fftw_complex) * static_cast<size_t>(n1) * n2);
    fftw_execute(e.plan);
    std::memcpy(out, e.out, sizeof(fftw_complex) * static_cast<size_t>(n1) * n2);
}

} // namespace

void GridSpec::validate() const {
    if (d_theta < 0 || d_theta > 1 || d_phi < 0 || d_phi > 1)
        fail(ErrorCode::invalid_argument, "GridSpec: angle counts must be 0 or 1");
    if (d_theta + d_phi > 2)
        fail(ErrorCode::invalid_argument, "GridSpec: at most two angles supported");
    auto check_axis = [](int d, int n, const char* name) {
        if (d == 0) {
            if (n != 1) fail(ErrorCode::invalid_argument, std::string("GridSpec: ") + name + " must be 1 on a degenerate axis");
        } else {
            if (n < 4 || !power_of_two(n))
                fail(ErrorCode::invalid_argument, std::string("GridSpec: ") + name + " must be a power of two >= 4");
        }
    };
    check_axis(d_theta, n1, "N1");
    check_axis(d_phi, n2, "N2");
}

TorusMap::TorusMap() : spec_{0, 0, 1, 1}, comps_(0) {}

TorusMap::TorusMap(const GridSpec& spec, int components)
    : spec_(spec), comps_(components) {
    spec_.validate();
    if (components < 0) fail(ErrorCode::invalid_argument, "TorusMap: negative component count");
    grid_.assign(static_cast<size_t>(comps_) * spec_.nodes(), 0.0);
    spectral_.assign(static_cast<size_t>(comps_) * spec_.nodes(), cplx(0.0, 0.0));
    grid_valid_ = true;
    spectral_valid_ = true;
}

TorusMap::TorusMap(const TorusMap& o) {
    std::lock_guard<std::mutex> lk(o.sync_);
    spec_ = o.spec_;
    comps_ = o.comps_;
    grid_ = o.grid_;
    spectral_ = o.spectral_;
    grid_valid_ = o.grid_valid_.load();
    spectral_valid_ = o.spectral_valid_.load();
}

TorusMap& TorusMap::operator=(const TorusMap& o) {
    if (this == &o) return *this;
    std::scoped_lock lk(sync_, o.sync_);
    spec_ = o.spec_;
    comps_ = o.comps_;
    grid_ = o.grid_;
    spectral_ = o.spectral_;
    grid_valid_ = o.grid_valid_.load();
    spectral_valid_ = o.spectral_valid_.load();
    return *this;
}

TorusMap::TorusMap(TorusMap&& o) noexcept {
    std::lock_guard<std::mutex> lk(o.sync_);
    spec_ = o.spec_;
    comps_ = o.comps_;
    grid_ = std::move(o.grid_);
    spectral_ = std::move(o.spectral_);
    grid_valid_ = o.grid_valid_.load();
    spectral_valid_ = o.spectral_valid_.load();
}

TorusMap& TorusMap::operator=(TorusMap&& o) noexcept {
    if (this == &o) return *this;
    std::scoped_lock lk(sync_, o.sync_);
    spec_ = o.spec_;
    comps_ = o.comps_;
    grid_ = std::move(o.grid_);
    spectral_ = std::move(o.spectral_);
    grid_valid_ = o.grid_valid_.load();
    spectral_valid_ = o.spectral_valid_.load();
    return *this;
}

void TorusMap::check_node(int c, int i, int j) const {
    if (c < 0 || c >= comps_ || i < 0 || i >= spec_.n1 || j < 0 || j >= spec_.n2)
        fail(ErrorCode::invalid_argument, "TorusMap: index out of range");
}

double TorusMap::value(int c, int i, int j) const {
    check_node(c, i, j);
    ensure_grid();
    return grid_[index(c, i, j)];
}

void TorusMap::set_value(int c, int i, int j, double v) {
    check_node(c, i, j);
    ensure_grid();
    grid_[index(c, i, j)] = v;
    spectral_valid_ = false;
}

const std::vector<double>& TorusMap::grid_data() const {
    ensure_grid();
    return grid_;
}

std::vector<double>& TorusMap::mutable_grid_data() {
    ensure_grid();
    spectral_valid_ = false;
    return grid_;
}

TorusMap::cplx TorusMap::coeff(int c, int k, int l) const {
    ensure_spectral();
    return spectral_[index(c, bin1(k), bin2(l))];
}

void TorusMap::set_coeff(int c, int k, int l, cplx v) {
    ensure_spectral();
    spectral_[index(c, bin1(k), bin2(l))] = v;
    grid_valid_ = false;
}

const std::vector<TorusMap::cplx>& TorusMap::spectral_data() const {
    ensure_spectral();
    return spectral_;
}

std::vector<TorusMap::cplx>& TorusMap::mutable_spectral_data() {
    ensure_spectral();
    grid_valid_ = false;
    return spectral_;
}

void TorusMap::ensure_spectral() const {
    if (spectral_valid_) return;
    std::lock_guard<std::mutex> lk(sync_);
    if (spectral_valid_) return;
    const int n1 = spec_.n1, n2 = spec_.n2;
    const int nn = spec_.nodes();
    for (double v : grid_)
        if (!std::isfinite(v))
            fail(ErrorCode::non_finite, "to_spectral: non-finite grid value");
    spectral_.assign(static_cast<size_t>(comps_) * nn, cplx(0, 0));
    std::vector<cplx> buf_in(nn), buf_out(nn);
    const double scale = 1.0 / nn;
    for (int c = 0; c < comps_; ++c) {
        for (int i = 0; i < nn; ++i) buf_in[i] = cplx(grid_[static_cast<size_t>(c) * nn + i], 0.0);
        if (nn == 1) {
            buf_out[0] = buf_in[0];
        } else {
            run_fft(n1, n2, FFTW_FORWARD, buf_in.data(), buf_out.data());
        }
        cplx* dst = spectral_.data() + static_cast<size_t>(c) * nn;
        for (int i = 0; i < nn; ++i) dst[i] = buf_out[i] * scale;
        // Nyquist rows dropped: keeps the real inverse well defined under
        // arbitrary-angle shifts.
        if (n1 >= 2)
            for (int j = 0; j < n2; ++j) dst[(n1 / 2) * n2 + j] = 0.0;
        if (n2 >= 2)
            for (int i = 0; i < n1; ++i) dst[i * n2 + n2 / 2] = 0.0;
        // Enforce exact conjugate symmetry.
        for (int i = 0; i < n1; ++i) {
            for (int j = 0; j < n2; ++j) {
                int i2 = (n1 - i) % n1, j2 = (n2 - j) % n2;
                if (i * n2 + j > i2 * n2 + j2) continue;
                cplx a = dst[i * n2 + j];
                cplx b = dst[i2 * n2 + j2];
                cplx s = 0.5 * (a + std::conj(b));
                dst[i * n2 + j] = s;
                dst[i2 * n2 + j2] = std::conj(s);
            }
        }
    }
    spectral_valid_ = true;
}

void TorusMap::ensure_grid() const {
    if (grid_valid_) return;
    std::lock_guard<std::mutex> lk(sync_);
    if (grid_valid_) return;
    const int n1 = spec_.n1, n2 = spec_.n2;
    const int nn = spec_.nodes();
    grid_.assign(static_cast<size_t>(comps_) * nn, 0.0);
    std::vector<cplx> buf_out(nn);
    for (int c = 0; c < comps_; ++c) {
        const cplx* src = spectral_.data() + static_cast<size_t>(c) * nn;
        if (nn == 1) {
            buf_out[0] = src[0];
        } else {
            run_fft(n1, n2, FFTW_BACKWARD, src, buf_out.data());
        }
        for (int i = 0; i < nn; ++i) grid_[static_cast<size_t>(c) * nn + i] = buf_out[i].real();
    }
    grid_valid_ = true;
}

double TorusMap::sup_norm() const {
    ensure_grid();
    double m = 0.0;
    for (double v : grid_) m = std::max(m, std::abs(v));
    return m;
}

TorusMap to_spectral(const TorusMap& f) {
    TorusMap out = f;
    out.ensure_spectral();
    return out;
}

TorusMap to_grid(const TorusMap& f) {
    TorusMap out = f;
    out.ensure_grid();
    return out;
}

TorusMap shift(const TorusMap& f, double a, double b) {
    f.ensure_spectral();
    TorusMap out = f;
    auto& sp = out.mutable_spectral_data();
    const int n1 = f.spec().n1, n2 = f.spec().n2;
    const double twopi = 2.0 * std::numbers::pi;
    for (int c = 0; c < f.components(); ++c) {
        for (int i = 0; i < n1; ++i) {
            int k = i <= n1 / 2 ? i : i - n1;
            for (int j = 0; j < n2; ++j) {
                int l = j <= n2 / 2 ? j : j - n2;
                sp[out.index(c, i, j)] *= std::polar(1.0, twopi * (k * a + l * b));
            }
        }
    }
    return out;
}

TorusMap derivative(const TorusMap& f, Axis axis) {
    if (!f.spec().has(axis))
        fail(ErrorCode::invalid_argument, "derivative: axis not present in grid");
    f.ensure_spectral();
    TorusMap out = f;
    auto& sp = out.mutable_spectral_data();
    const int n1 = f.spec().n1, n2 = f.spec().n2;
    const double twopi = 2.0 * std::numbers::pi;
    for (int c = 0; c < f.components(); ++c) {
        for (int i = 0; i < n1; ++i) {
            int k = i <= n1 / 2 ? i : i - n1;
            for (int j = 0; j < n2; ++j) {
                int l = j <= n2 / 2 ? j : j - n2;
                double w = axis == Axis::theta ? twopi * k : twopi * l;
                sp[out.index(c, i, j)] *= TorusMap::cplx(0.0, w);
            }
        }
    }
    return out;
}

std::vector<double> average(const TorusMap& f) {
    std::vector<double> out(f.components(), 0.0);
    if (f.grid_valid()) {
        const auto& g = f.grid_data();
        const int nn = f.spec().nodes();
        for (int c = 0; c < f.components(); ++c) {
            double s = 0.0;
            for (int i = 0; i < nn; ++i) s += g[static_cast<size_t>(c) * nn + i];
            out[c] = s / nn;
        }
    } else {
        for (int c = 0; c < f.components(); ++c) out[c] = f.coeff(c, 0, 0).real();
    }
    return out;
}

double TailNorms::max_theta() const {
    double m = 0.0;
    for (double v : theta) m = std::max(m, v);
    return m;
}

double TailNorms::max_phi() const {
    double m = 0.0;
    for (double v : phi) m = std::max(m, v);
    return m;
}

TailNorms tail_norms(const TorusMap& f, double r_t) {
    if (!(r_t > 0.0 && r_t < 0.5))
        fail(ErrorCode::invalid_argument, "tail_norms: r_t must lie in (0, 1/2)");
    f.ensure_spectral();
    const int n1 = f.spec().n1, n2 = f.spec().n2;
    const int k_t = static_cast<int>(std::floor(r_t * n1));
    const int j_t = static_cast<int>(std::floor(r_t * n2));
    TailNorms out;
    out.theta.assign(f.components(), 0.0);
    out.phi.assign(f.components(), 0.0);
    const auto& sp = f.spectral_data();
    for (int c = 0; c < f.components(); ++c) {
        for (int i = 0; i < n1; ++i) {
            int k = i <= n1 / 2 ? i : i - n1;
            for (int j = 0; j < n2; ++j) {
                int l = j <= n2 / 2 ? j : j - n2;
                double mag = std::abs(sp[f.index(c, i, j)]);
                // Size-1 axes carry a single mode that always counts as inside
                // the window.
                bool k_in = (n1 == 1) || std::abs(k) < k_t;
                bool l_in = (n2 == 1) || std::abs(l) < j_t;
                if (n1 > 1 && std::abs(k) > k_t && l_in) out.theta[c] += mag;
                if (n2 > 1 && std::abs(l) > j_t && k_in) out.phi[c] += mag;
            }
        }
    }
    return out;
}

TorusMap lowpass(const TorusMap& f, double r_f) {
    if (!(r_f >= 0.25 && r_f < 0.5))
        fail(ErrorCode::invalid_argument, "lowpass: r_f must lie in [1/4, 1/2)");
    f.ensure_spectral();
    TorusMap out = f;
    auto& sp = out.mutable_spectral_data();
    const int n1 = f.spec().n1, n2 = f.spec().n2;
    const double k_f = r_f * n1, j_f = r_f * n2;
    for (int c = 0; c < f.components(); ++c) {
        for (int i = 0; i < n1; ++i) {
            int k = i <= n1 / 2 ? i : i - n1;
            for (int j = 0; j < n2; ++j) {
                int l = j <= n2 / 2 ? j : j - n2;
                bool cut = (n1 > 1 && std::abs(k) > k_f) || (n2 > 1 && std::abs(l) > j_f);
                if (cut) sp[out.index(c, i, j)] = 0.0;
            }
        }
    }
    return out;
}

TorusMap refine_grid(const TorusMap& f, Axis axis, int max_size) {
    if (!f.spec().has(axis))
        fail(ErrorCode::invalid_argument, "refine_grid: axis not present in grid");
    f.ensure_spectral();
    GridSpec ns = f.spec();
    if (axis == Axis::theta) ns.n1 *= 2; else ns.n2 *= 2;
    if (ns.n1 > max_size || ns.n2 > max_size)
        fail(ErrorCode::invalid_argument, "refine_grid: grid size limit exceeded");
    TorusMap out(ns, f.components());
    auto& sp = out.mutable_spectral_data();
    const int n1 = f.spec().n1, n2 = f.spec().n2;
    for (int c = 0; c < f.components(); ++c) {
        for (int i = 0; i < n1; ++i) {
            int k = i <= n1 / 2 ? i : i - n1;
            for (int j = 0; j < n2; ++j) {
                int l = j <= n2 / 2 ? j : j - n2;
                sp[out.index(c, out.bin1(k), out.bin2(l))] = f.coeff(c, k, l);
            }
        }
    }
    return out;
}

double sup_distance(const TorusMap& f, const TorusMap& g) {
    if (f.spec() != g.spec() || f.components() != g.components())
        fail(ErrorCode::invalid_argument, "sup_distance: layout mismatch");
    const auto& a = f.grid_data();
    const auto& b = g.grid_data();
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

const char* error_code_slug(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::non_finite: return "non_finite";
        case ErrorCode::resonance: return "resonance";
        case ErrorCode::cancellation: return "cancellation";
        case ErrorCode::frame_degenerate: return "frame_degenerate";
        case ErrorCode::not_converged: return "not_converged";
        case ErrorCode::integration_failure: return "integration_failure";
        case ErrorCode::collision: return "collision";
        case ErrorCode::io_error: return "io_error";
    }
    return "unknown";
}

} // namespace toriqp
