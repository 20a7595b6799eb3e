#pragma once

// Paraxial beam propagation in square-law media,
//   i du/dz = -(1/2k0) lap u + (1/2) k0 n0 alpha r^2 u,
// i.e. a 2D oscillator with hbar -> 1/k0, t -> z and frequency
// Omega = sqrt(n0 alpha) per unit length. Mode (nx, ny) picks up
// e^{-i Omega z (nx + ny + 1)}. Field convention: ground mode ~ exp(-r^2 / w^2).
//
// Grid: square window of side `extent`, sample (i, j) at
// x = (i - nx/2) dx, y = (j - ny/2) dy, stored row-major (j outer).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

#include <fftw3.h>

#include "qthermo/error.hpp"
#include "qthermo/oam.hpp"
#include "qthermo/types.hpp"

namespace qthermo {

inline constexpr int default_grid_points = 512;
inline constexpr double default_window_waists = 12.0;
inline constexpr double absorber_fraction = 0.05;
inline constexpr double window_edge_tol = 1e-6;
inline constexpr double max_edge_phase = pi / 8.0;

struct Grid {
    int nx = default_grid_points;
    int ny = default_grid_points;
    double extent = 1.0;

    Grid() = default;
    Grid(int nx_, int ny_, double extent_) : nx(nx_), ny(ny_), extent(extent_)
    {
        if (nx < 8 || ny < 8 || nx % 2 || ny % 2)
            throw InvalidDimension("Grid: sizes must be even and >= 8");
        if (!(extent > 0.0) || !std::isfinite(extent))
            throw InvalidParameter("Grid: extent must be finite and > 0");
    }

    /// Default sampling with a window of `waists` beam waists.
    static Grid for_waist(double waist, int points = default_grid_points, double waists = default_window_waists)
    {
        return Grid(points, points, waists * waist);
    }

    double dx() const { return extent / nx; }
    double dy() const { return extent / ny; }
    double x(int i) const { return (i - nx / 2) * dx(); }
    double y(int j) const { return (j - ny / 2) * dy(); }
    std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
    double cell() const { return dx() * dy(); }
    bool operator==(const Grid&) const = default;
};

struct FieldGrid {
    Grid grid;
    std::vector<cplx> u;

    FieldGrid() = default;
    explicit FieldGrid(const Grid& g) : grid(g), u(g.size(), cplx(0.0)) {}

    cplx& at(int i, int j) { return u[static_cast<std::size_t>(j) * grid.nx + i]; }
    const cplx& at(int i, int j) const { return u[static_cast<std::size_t>(j) * grid.nx + i]; }

    double norm2() const
    {
        double s = 0.0;
        for (const auto& c : u)
            s += std::norm(c);
        return s * grid.cell();
    }

    double peak_intensity() const
    {
        double m = 0.0;
        for (const auto& c : u)
            m = std::max(m, std::norm(c));
        return m;
    }

    void normalize()
    {
        const double n = norm2();
        if (!(n > 0.0) || !std::isfinite(n))
            throw StateValidityError("FieldGrid: cannot normalize a zero or non-finite field");
        const double s = 1.0 / std::sqrt(n);
        for (auto& c : u)
            c *= s;
    }

    /// <this, other> = sum conj(this) other dx dy.
    cplx inner(const FieldGrid& other) const
    {
        if (!(grid == other.grid))
            throw InvalidDimension("FieldGrid: inner product of fields on different grids");
        cplx s = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k)
            s += std::conj(u[k]) * other.u[k];
        return s * grid.cell();
    }

    /// Largest intensity in the outer `band` fraction of the half window, relative to the peak.
    double edge_ratio(double band = 2.0 * absorber_fraction) const
    {
        const double peak = peak_intensity();
        if (peak == 0.0)
            return 0.0;
        const double hx = 0.5 * grid.extent * (1.0 - band), hy = hx;
        double m = 0.0;
        for (int j = 0; j < grid.ny; ++j)
            for (int i = 0; i < grid.nx; ++i)
                if (std::abs(grid.x(i)) > hx || std::abs(grid.y(j)) > hy)
                    m = std::max(m, std::norm(at(i, j)));
        return m / peak;
    }

    void require_inside_window(const char* where) const
    {
        const double r = edge_ratio();
        if (r > window_edge_tol)
            throw WindowError(std::string(where) + ": edge intensity " + std::to_string(r)
                              + " of peak exceeds 1e-6; enlarge the window");
    }
};

// ---------------------------------------------------------------------------
// Modes

/// Physicists' Hermite polynomial by recurrence.
inline double hermite(int n, double x)
{
    double h0 = 1.0, h1 = 2.0 * x;
    if (n == 0)
        return h0;
    for (int k = 1; k < n; ++k) {
        const double h2 = 2.0 * x * h1 - 2.0 * k * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

inline double assoc_laguerre(int p, int a, double x)
{
    double l0 = 1.0, l1 = 1.0 + a - x;
    if (p == 0)
        return l0;
    for (int k = 1; k < p; ++k) {
        const double l2 = ((2.0 * k + 1.0 + a - x) * l1 - (k + a) * l0) / (k + 1.0);
        l0 = l1;
        l1 = l2;
    }
    return l1;
}

struct Offset {
    double x = 0.0;
    double y = 0.0;
};

/// HG_{n,m}(x, y) ~ H_n(sqrt2 x / w) H_m(sqrt2 y / w) exp(-r^2 / w^2), unit L2 norm on the grid.
inline FieldGrid hg_mode(int n, int m, double waist, const Grid& grid, Offset c = {})
{
    if (n < 0 || m < 0)
        throw InvalidParameter("hg_mode: indices must be >= 0");
    if (!(waist > 0.0))
        throw InvalidParameter("hg_mode: waist must be > 0");
    FieldGrid f(grid);
    std::vector<double> hx(grid.nx), hy(grid.ny);
    for (int i = 0; i < grid.nx; ++i) {
        const double s = (grid.x(i) - c.x) / waist;
        hx[i] = hermite(n, std::sqrt(2.0) * s) * std::exp(-s * s);
    }
    for (int j = 0; j < grid.ny; ++j) {
        const double s = (grid.y(j) - c.y) / waist;
        hy[j] = hermite(m, std::sqrt(2.0) * s) * std::exp(-s * s);
    }
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i)
            f.at(i, j) = hx[i] * hy[j];
    f.normalize();
    return f;
}

inline FieldGrid hg_mode(int n, double waist, const Grid& grid) { return hg_mode(n, 0, waist, grid); }

/// LG_p^l ~ (sqrt2 r / w)^|l| L_p^|l|(2 r^2 / w^2) exp(-r^2 / w^2) e^{i l phi}.
inline FieldGrid lg_mode(int l, int p, double waist, const Grid& grid, Offset c = {})
{
    if (p < 0)
        throw InvalidParameter("lg_mode: radial index must be >= 0");
    if (!(waist > 0.0))
        throw InvalidParameter("lg_mode: waist must be > 0");
    FieldGrid f(grid);
    const int a = std::abs(l);
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            const double x = grid.x(i) - c.x, y = grid.y(j) - c.y;
            const double rho2 = (x * x + y * y) / (waist * waist);
            const double amp = std::pow(2.0 * rho2, 0.5 * a) * assoc_laguerre(p, a, 2.0 * rho2) * std::exp(-rho2);
            f.at(i, j) = amp * std::polar(1.0, l * std::atan2(y, x));
        }
    f.normalize();
    return f;
}

/// Entries <b_m, a_n> (row m, column n).
inline CMatrix mode_overlap_matrix(const std::vector<FieldGrid>& family_a, const std::vector<FieldGrid>& family_b)
{
    CMatrix m(family_b.size(), family_a.size());
    for (std::size_t r = 0; r < family_b.size(); ++r)
        for (std::size_t c = 0; c < family_a.size(); ++c)
            m(r, c) = family_b[r].inner(family_a[c]);
    return m;
}

struct OverlapTransitions {
    RMatrix transitions;    ///< |<b_m, a_n>|^2 with columns rescaled to sum to 1
    RVector captured_mass;  ///< column sums before rescaling
};

/// Transition probabilities from a truncated overlap matrix; the mass that
/// leaks outside family_b is reported and the columns renormalized.
inline OverlapTransitions transitions_from_overlaps(const CMatrix& overlaps, double min_mass = 1e-3)
{
    OverlapTransitions t{overlaps.cwiseAbs2(), RVector(overlaps.cols())};
    for (Eigen::Index c = 0; c < overlaps.cols(); ++c) {
        const double s = t.transitions.col(c).sum();
        if (!(s >= min_mass))
            throw ProcessValidityError("transitions_from_overlaps: column " + std::to_string(c)
                                       + " keeps almost no mass in the target family");
        t.captured_mass(c) = s;
        t.transitions.col(c) /= s;
    }
    return t;
}

/// LG_0^l for l = -l_max..l_max (OAM ordering of oam_protocol).
inline std::vector<FieldGrid> lg_family(int l_max, double waist, const Grid& grid, Offset c = {})
{
    require_l_max(l_max);
    std::vector<FieldGrid> out;
    for (int l = -l_max; l <= l_max; ++l)
        out.push_back(lg_mode(l, 0, waist, grid, c));
    return out;
}

// ---------------------------------------------------------------------------
// Media and propagation

struct SquareLawMedium {
    double n0 = 1.0;
    double alpha_medium = 0.0; ///< n(r) = n0 - (1/2) n0 alpha r^2
    double k0 = 1.0;

    void validate() const
    {
        if (!(n0 > 0.0) || !(alpha_medium >= 0.0) || !(k0 > 0.0) || !std::isfinite(n0 * alpha_medium * k0))
            throw InvalidParameter("SquareLawMedium: need n0 > 0, alpha >= 0, k0 > 0");
    }

    /// Mode angle rate per unit length.
    double omega() const { return std::sqrt(n0 * alpha_medium); }
    /// hbar omega with hbar -> 1/k0.
    double quantum() const { return omega() / k0; }
    double index(double r2) const { return n0 - 0.5 * n0 * alpha_medium * r2; }
    double potential(double r2) const { return 0.5 * k0 * n0 * alpha_medium * r2; }

    double matched_waist() const
    {
        validate();
        if (alpha_medium == 0.0)
            throw InvalidParameter("SquareLawMedium: free space has no matched waist");
        return std::sqrt(2.0 / (k0 * omega()));
    }

    void require_positive_index(const Grid& g) const
    {
        const double h = 0.5 * g.extent;
        if (!(index(2.0 * h * h) > 0.0))
            throw InvalidParameter("SquareLawMedium: index turns negative inside the window");
    }
};

/// Largest dz keeping the potential phase per step below pi/8 at the window corner.
inline double max_step(const SquareLawMedium& m, const Grid& g)
{
    const double h = 0.5 * g.extent;
    const double v = m.potential(2.0 * h * h);
    return v > 0.0 ? max_edge_phase / v : std::numeric_limits<double>::infinity();
}

struct StepPlan {
    double dz;
    int steps;
};

/// Steps covering `angle` of mode rotation with dz <= max_step. The Strang map
/// of an oscillator rotates phase space by acos(1 - (Omega dz)^2 / 2) per step,
/// so dz = 2 sin(angle / 2N) / Omega makes N steps an exact rotation by `angle`.
inline StepPlan rotation_plan(const SquareLawMedium& m, const Grid& g, double angle)
{
    m.validate();
    if (m.alpha_medium == 0.0)
        throw InvalidParameter("rotation_plan: free space does not rotate");
    if (!(angle > 0.0))
        throw InvalidParameter("rotation_plan: angle must be > 0");
    const double w = m.omega();
    const int n = std::max(1, static_cast<int>(std::ceil(angle / (w * max_step(m, g)))));
    return {2.0 * std::sin(0.5 * angle / n) / w, n};
}

/// Smooth cosine ramp from 1 to 0 over the outer `fraction` of the half window.
inline double absorber_profile(double x, double half, double fraction = absorber_fraction)
{
    const double start = half * (1.0 - fraction);
    const double a = std::abs(x);
    if (a <= start)
        return 1.0;
    const double t = std::min((a - start) / (half - start), 1.0);
    return std::cos(0.5 * pi * t);
}

struct PropagationOptions {
    bool absorber = true;
    bool check_window = true;
};

/// In-place 2D FFT pair on one buffer; backward is normalized.
class Fft2 {
public:
    explicit Fft2(const Grid& g) : grid_(g), buf_(g.size())
    {
        auto* p = reinterpret_cast<fftw_complex*>(buf_.data());
        forward_ = fftw_plan_dft_2d(g.ny, g.nx, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
        backward_ = fftw_plan_dft_2d(g.ny, g.nx, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
        if (!forward_ || !backward_)
            throw Error("FFTW plan creation failed");
    }
    ~Fft2()
    {
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
    }
    Fft2(const Fft2&) = delete;
    Fft2& operator=(const Fft2&) = delete;

    std::vector<cplx>& buffer() { return buf_; }
    void forward() { fftw_execute(forward_); }
    void backward()
    {
        fftw_execute(backward_);
        const double s = 1.0 / static_cast<double>(buf_.size());
        for (auto& c : buf_)
            c *= s;
    }

    /// Angular spatial frequency of FFT bin k on an axis of n points.
    static double wavenumber(int k, int n, double extent)
    {
        const int kk = k < n / 2 ? k : k - n;
        return 2.0 * pi * kk / extent;
    }

    /// Multiplies the spectrum by exp(-i dz |k|^2 / (2 k0)).
    std::vector<cplx> kinetic_phases(double dz, double k0) const
    {
        std::vector<cplx> out(grid_.size());
        for (int j = 0; j < grid_.ny; ++j) {
            const double ky = wavenumber(j, grid_.ny, grid_.extent);
            for (int i = 0; i < grid_.nx; ++i) {
                const double kx = wavenumber(i, grid_.nx, grid_.extent);
                out[static_cast<std::size_t>(j) * grid_.nx + i] = std::polar(1.0, -dz * (kx * kx + ky * ky) / (2.0 * k0));
            }
        }
        return out;
    }

private:
    Grid grid_;
    std::vector<cplx> buf_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

/// Strang splitting: half potential, exact kinetic step in k-space, half
/// potential. `visit(step, field)` runs after each step.
template <class Visitor>
FieldGrid split_step_propagate(const FieldGrid& field, const SquareLawMedium& medium, double dz, int steps,
                               Visitor&& visit, PropagationOptions opt = {})
{
    medium.validate();
    const Grid& g = field.grid;
    medium.require_positive_index(g);
    if (!(dz > 0.0) || steps < 0)
        throw InvalidParameter("split_step_propagate: need dz > 0 and steps >= 0");
    if (dz > max_step(medium, g) * (1.0 + 1e-12))
        throw InvalidParameter("split_step_propagate: dz exceeds the pi/8 edge-phase limit");
    if (opt.check_window)
        field.require_inside_window("split_step_propagate input");

    const double hx = 0.5 * g.extent, hy = hx;
    std::vector<cplx> half(g.size());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double x = g.x(i), y = g.y(j);
            double a = 1.0;
            if (opt.absorber)
                a = std::sqrt(absorber_profile(x, hx) * absorber_profile(y, hy));
            half[static_cast<std::size_t>(j) * g.nx + i] = a * std::polar(1.0, -0.5 * dz * medium.potential(x * x + y * y));
        }

    Fft2 fft(g);
    const auto kin = fft.kinetic_phases(dz, medium.k0);
    auto& buf = fft.buffer();
    buf = field.u;
    FieldGrid out(g);
    for (int s = 1; s <= steps; ++s) {
        for (std::size_t k = 0; k < buf.size(); ++k)
            buf[k] *= half[k];
        fft.forward();
        for (std::size_t k = 0; k < buf.size(); ++k)
            buf[k] *= kin[k];
        fft.backward();
        for (std::size_t k = 0; k < buf.size(); ++k)
            buf[k] *= half[k];
        if constexpr (!std::is_same_v<std::decay_t<Visitor>, std::nullptr_t>) {
            out.u = buf;
            visit(s, static_cast<const FieldGrid&>(out));
        }
    }
    out.u = buf;
    if (opt.check_window)
        out.require_inside_window("split_step_propagate output");
    return out;
}

inline FieldGrid split_step_propagate(const FieldGrid& field, const SquareLawMedium& medium, double dz, int steps,
                                      PropagationOptions opt = {})
{
    return split_step_propagate(field, medium, dz, steps, nullptr, opt);
}

/// Exact free-space propagation over z (single spectral step).
inline FieldGrid free_propagate(const FieldGrid& field, double k0, double z)
{
    if (!(k0 > 0.0))
        throw InvalidParameter("free_propagate: k0 must be > 0");
    if (z == 0.0)
        return field;
    Fft2 fft(field.grid);
    const auto kin = fft.kinetic_phases(z, k0);
    auto& buf = fft.buffer();
    buf = field.u;
    fft.forward();
    for (std::size_t k = 0; k < buf.size(); ++k)
        buf[k] *= kin[k];
    fft.backward();
    FieldGrid out(field.grid);
    out.u = buf;
    return out;
}

/// Closed-form free Gaussian exp(-r^2/w0^2) after distance z:
/// (1/q) exp(-r^2 / (w0^2 q)), q = 1 + i z / z_R, z_R = k0 w0^2 / 2 (unnormalized).
inline cplx gaussian_beam(double r2, double w0, double k0, double z)
{
    const double zr = 0.5 * k0 * w0 * w0;
    const cplx q(1.0, z / zr);
    return std::exp(-r2 / (w0 * w0 * q)) / q;
}

struct LensFrft {
    double z;          ///< free distance before and after the lens
    double waist;      ///< Gaussian width mapped onto itself
};

/// Free z, thin lens f, free z realizes an FRFT of angle alpha when
/// z = 2 f sin^2(alpha/2); the matched waist obeys w^2 = 2 f sin(alpha) / k0.
inline LensFrft lens_frft_geometry(double f, double alpha, double k0)
{
    if (!(f > 0.0) || !(k0 > 0.0))
        throw InvalidParameter("frft_via_lens: need f > 0 and k0 > 0");
    if (!(alpha > 0.0 && alpha < pi))
        throw InvalidParameter("frft_via_lens: alpha must lie in (0, pi)");
    const double s = std::sin(0.5 * alpha);
    return {2.0 * f * s * s, std::sqrt(2.0 * f * std::sin(alpha) / k0)};
}

inline FieldGrid frft_via_lens(const FieldGrid& field, double f, double alpha, double k0)
{
    if (alpha == 0.0)
        return field;
    const LensFrft geo = lens_frft_geometry(f, alpha, k0);
    FieldGrid u = free_propagate(field, k0, geo.z);
    const Grid& g = u.grid;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double r2 = g.x(i) * g.x(i) + g.y(j) * g.y(j);
            u.at(i, j) *= std::polar(1.0, -k0 * r2 / (2.0 * f));
        }
    u = free_propagate(u, k0, geo.z);
    u.require_inside_window("frft_via_lens output");
    return u;
}

/// rms radius sqrt(<r^2>) of the intensity.
inline double rms_radius(const FieldGrid& f)
{
    double num = 0.0, den = 0.0;
    for (int j = 0; j < f.grid.ny; ++j)
        for (int i = 0; i < f.grid.nx; ++i) {
            const double w = std::norm(f.at(i, j));
            num += w * (f.grid.x(i) * f.grid.x(i) + f.grid.y(j) * f.grid.y(j));
            den += w;
        }
    return std::sqrt(num / den);
}

// ---------------------------------------------------------------------------
// Export

inline constexpr char field_magic[8] = {'Q', 'T', 'F', 'I', 'E', 'L', 'D', '1'};

namespace detail {

template <class T>
void put_le(std::ostream& os, T v)
{
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get_le(std::istream& is)
{
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

} // namespace detail

/// 32-byte header (magic, nx, ny as uint64, extent as double), then
/// row-major little-endian (re, im) double pairs.
inline void write_field_binary(std::ostream& os, const FieldGrid& f)
{
    os.write(field_magic, sizeof field_magic);
    detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(f.grid.nx));
    detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(f.grid.ny));
    detail::put_le<double>(os, f.grid.extent);
    for (const auto& c : f.u) {
        detail::put_le<double>(os, c.real());
        detail::put_le<double>(os, c.imag());
    }
}

inline void write_field_binary(const std::string& path, const FieldGrid& f)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw Error("cannot open " + path);
    write_field_binary(os, f);
    if (!os)
        throw Error("write failed for " + path);
}

inline FieldGrid read_field_binary(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw Error("cannot open " + path);
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, field_magic, sizeof magic) != 0)
        throw ConfigError(path + " is not a field file");
    const auto nx = detail::get_le<std::uint64_t>(is);
    const auto ny = detail::get_le<std::uint64_t>(is);
    const auto extent = detail::get_le<double>(is);
    if (nx > (1u << 16) || ny > (1u << 16))
        throw ConfigError(path + ": implausible grid size");
    FieldGrid f(Grid(static_cast<int>(nx), static_cast<int>(ny), extent));
    for (auto& c : f.u) {
        const double re = detail::get_le<double>(is);
        const double im = detail::get_le<double>(is);
        c = {re, im};
    }
    if (!is)
        throw ConfigError(path + ": truncated field data");
    return f;
}

/// Binary PGM (P5) of the intensity scaled to the peak.
inline void write_intensity_pgm(std::ostream& os, const FieldGrid& f)
{
    os << "P5\n" << f.grid.nx << ' ' << f.grid.ny << "\n255\n";
    const double peak = f.peak_intensity();
    for (int j = 0; j < f.grid.ny; ++j)
        for (int i = 0; i < f.grid.nx; ++i) {
            const double v = peak > 0.0 ? std::norm(f.at(i, j)) / peak : 0.0;
            os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
        }
}

inline void write_intensity_pgm(const std::string& path, const FieldGrid& f)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw Error("cannot open " + path);
    write_intensity_pgm(os, f);
}

struct ParaxialReport {
    std::vector<double> slopes;    ///< d phase / d theta for HG_{n,0}
    double norm_drift = 0.0;       ///< |norm - 1| after the run
    int steps = 0;
    double gaussian_error = 0.0;   ///< max |u - u_exact| / peak amplitude
    FieldGrid initial, final_;
};

/// Eigenphase regression, norm drift and free Gaussian diffraction on one grid.
inline ParaxialReport paraxial_check(const SquareLawMedium& m, int points, double window, int max_mode, int steps,
                                     int record_every)
{
    const double w = m.matched_waist();
    const Grid g = Grid::for_waist(w, points, window);
    std::vector<FieldGrid> modes;
    FieldGrid in(g);
    for (int n = 0; n <= max_mode; ++n) {
        modes.push_back(hg_mode(n, w, g));
        for (std::size_t k = 0; k < in.u.size(); ++k)
            in.u[k] += modes.back().u[k];
    }
    in.normalize();
    const double dz = max_step(m, g);
    std::vector<double> theta;
    std::vector<std::vector<double>> phase(modes.size());
    ParaxialReport rep;
    rep.steps = steps;
    rep.initial = in;
    rep.final_ = split_step_propagate(in, m, dz, steps, [&](int s, const FieldGrid& u) {
        if (s % record_every)
            return;
        theta.push_back(m.omega() * dz * s);
        for (std::size_t n = 0; n < modes.size(); ++n) {
            double ph = std::arg(modes[n].inner(u));
            if (!phase[n].empty()) {
                double d = ph - phase[n].back();
                d -= 2.0 * pi * std::round(d / (2.0 * pi));
                ph = phase[n].back() + d;
            }
            phase[n].push_back(ph);
        }
    });
    rep.norm_drift = std::abs(rep.final_.norm2() - 1.0);
    for (const auto& y : phase) {
        const double n = static_cast<double>(theta.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t k = 0; k < theta.size(); ++k) {
            sx += theta[k];
            sy += y[k];
            sxx += theta[k] * theta[k];
            sxy += theta[k] * y[k];
        }
        rep.slopes.push_back((n * sxy - sx * sy) / (n * sxx - sx * sx));
    }

    // Free space: a Gaussian of the same waist over one Rayleigh range, in ten steps.
    const SquareLawMedium vacuum{m.n0, 0.0, m.k0};
    const FieldGrid gauss = hg_mode(0, w, g);
    const double zr = 0.5 * m.k0 * w * w;
    const FieldGrid out = split_step_propagate(gauss, vacuum, zr / 10.0, 10);
    const double scale = std::abs(gauss.at(g.nx / 2, g.ny / 2));
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double r2 = g.x(i) * g.x(i) + g.y(j) * g.y(j);
            rep.gaussian_error =
                std::max(rep.gaussian_error, std::abs(out.at(i, j) - scale * gaussian_beam(r2, w, m.k0, zr)) / scale);
        }
    return rep;
}

} // namespace qthermo
