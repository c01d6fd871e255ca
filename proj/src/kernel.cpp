#include "xpd/kernel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include "xpd/error.hpp"

namespace xpd {

WeightFunction WeightFunction::inverse_distance()
{
    return radial("inverse", [](double r, double horizon) { return horizon / r; });
}

Family gather_family(const NodeSet& nodes, const FamilyGraph& graph, std::size_t i,
                     std::span<const std::uint8_t> broken, bool include_broken)
{
    Family f;
    f.dimension = nodes.dimension;
    f.horizon = nodes.horizon[i];
    const std::size_t n = graph.family_size(i);
    f.xi.reserve(n);
    f.measure.reserve(n);
    f.slots.reserve(n);
    for (std::size_t b = graph.begin(i); b < graph.end(i); ++b) {
        if (!include_broken && !broken.empty() && broken[b]) continue;
        f.add(graph.xi[b], nodes.cell_measure[graph.neighbors[b]]);
        f.slots.push_back(b);
    }
    return f;
}

void hydro_basis(const Vec3& xi, int dimension, std::span<double> out)
{
    const double x = xi.x, y = xi.y, z = xi.z;
    if (dimension == 2) {
        out[0] = x * x;
        out[1] = y * y;
        out[2] = x * y;
        return;
    }
    out[0] = x * x;
    out[1] = y * y;
    out[2] = z * z;
    out[3] = x * y;
    out[4] = y * z;
    out[5] = z * x;
}

void devia_basis(const Vec3& xi, int dimension, std::span<double> out)
{
    const double x = xi.x, y = xi.y, z = xi.z;
    const double inv = 1.0 / dot(xi, xi);
    if (dimension == 2) {
        out[0] = x * x * x * x * inv;
        out[1] = y * y * y * y * inv;
        out[2] = x * x * y * y * inv;
        out[3] = x * x * x * y * inv;
        out[4] = y * y * y * x * inv;
        return;
    }
    out[0] = x * x * x * x * inv;
    out[1] = y * y * y * y * inv;
    out[2] = z * z * z * z * inv;
    out[3] = x * x * y * y * inv;
    out[4] = y * y * z * z * inv;
    out[5] = z * z * x * x * inv;
    out[6] = x * x * x * y * inv;
    out[7] = x * x * x * z * inv;
    out[8] = y * y * y * x * inv;
    out[9] = y * y * y * z * inv;
    out[10] = z * z * z * x * inv;
    out[11] = z * z * z * y * inv;
    out[12] = x * x * y * z * inv;
    out[13] = y * y * x * z * inv;
    out[14] = z * z * x * y * inv;
}

namespace {

constexpr std::array<double, 3> kHydro2{1.0, 1.0, 0.0};
constexpr std::array<double, 6> kHydro3{1.0, 1.0, 1.0, 0.0, 0.0, 0.0};
constexpr std::array<double, 5> kDevia2{1.5, 1.5, 0.5, 0.0, 0.0};
constexpr std::array<double, 15> kDevia3{1.5, 1.5, 1.5, 0.5, 0.5, 0.5, 0, 0, 0, 0, 0, 0, 0, 0, 0};

using BasisFn = void (*)(const Vec3&, int, std::span<double>);

/// Shared Lagrange-multiplier solve: omega = omega_s + lambda . basis with
/// sum omega basis V = targets.
Multipliers solve_moment_system(const Family& family, std::span<const double> omega_s, BasisFn basis,
                                std::span<const double> targets, double pivot_tolerance, const char* label)
{
    const int n = static_cast<int>(targets.size());
    const auto un = static_cast<std::size_t>(n);
    if (family.size() == 0) throw Error(ErrorKind::EmptyFamily, std::string(label) + ": empty family");
    std::vector<double> a(un * un, 0.0);
    std::vector<double> rhs(targets.begin(), targets.end());
    std::array<double, 15> phi{};
    for (std::size_t b = 0; b < family.size(); ++b) {
        basis(family.xi[b], family.dimension, std::span<double>(phi.data(), un));
        const double v = family.measure[b];
        for (std::size_t r = 0; r < un; ++r) {
            rhs[r] -= omega_s[b] * phi[r] * v;
            const double pr = phi[r] * v;
            for (std::size_t c = r; c < un; ++c) a[r * un + c] += pr * phi[c];
        }
    }
    for (std::size_t r = 0; r < un; ++r)
        for (std::size_t c = 0; c < r; ++c) a[r * un + c] = a[c * un + r];

    if (!solve_dense(a, rhs, n, pivot_tolerance))
        throw SingularSystem(std::string(label) + ": moment matrix is singular for a family of " +
                             std::to_string(family.size()) + " bonds");

    Multipliers out;
    out.lambda = std::move(rhs);
    out.omega.resize(family.size());
    for (std::size_t b = 0; b < family.size(); ++b) {
        basis(family.xi[b], family.dimension, std::span<double>(phi.data(), un));
        double corr = 0.0;
        for (std::size_t r = 0; r < un; ++r) corr += out.lambda[r] * phi[r];
        out.omega[b] = omega_s[b] + corr;
    }
    return out;
}

std::vector<SphericalInfluence> spherical_values(const Family& family, const WeightFunction& weight)
{
    const double m = weighted_volume(family, weight);
    std::vector<SphericalInfluence> out(family.size());
    for (std::size_t b = 0; b < family.size(); ++b)
        out[b] = spherical_influence(weight(norm(family.xi[b]), family.horizon), m, family.dimension);
    return out;
}

} // namespace

std::span<const double> hydro_targets(int dimension)
{
    return dimension == 2 ? std::span<const double>(kHydro2) : std::span<const double>(kHydro3);
}

std::span<const double> devia_targets(int dimension)
{
    return dimension == 2 ? std::span<const double>(kDevia2) : std::span<const double>(kDevia3);
}

bool solve_dense(std::span<double> a, std::span<double> b, int n, double rel_tolerance)
{
    const auto un = static_cast<std::size_t>(n);
    double max_diag = 0.0;
    for (std::size_t k = 0; k < un; ++k) max_diag = std::max(max_diag, std::abs(a[k * un + k]));
    if (!(max_diag > 0.0)) return false;
    const double threshold = rel_tolerance * max_diag;
    for (std::size_t k = 0; k < un; ++k) {
        std::size_t piv = k;
        for (std::size_t r = k + 1; r < un; ++r)
            if (std::abs(a[r * un + k]) > std::abs(a[piv * un + k])) piv = r;
        if (!(std::abs(a[piv * un + k]) >= threshold)) return false;
        if (piv != k) {
            for (std::size_t c = 0; c < un; ++c) std::swap(a[k * un + c], a[piv * un + c]);
            std::swap(b[k], b[piv]);
        }
        const double inv = 1.0 / a[k * un + k];
        for (std::size_t r = k + 1; r < un; ++r) {
            const double f = a[r * un + k] * inv;
            if (f == 0.0) continue;
            for (std::size_t c = k; c < un; ++c) a[r * un + c] -= f * a[k * un + c];
            b[r] -= f * b[k];
        }
    }
    for (std::size_t k = un; k-- > 0;) {
        double s = b[k];
        for (std::size_t c = k + 1; c < un; ++c) s -= a[k * un + c] * b[c];
        b[k] = s / a[k * un + k];
    }
    return true;
}

double weighted_volume(const Family& family, const WeightFunction& weight)
{
    if (family.size() == 0) throw Error(ErrorKind::EmptyFamily, "weighted volume of an empty family");
    double m = 0.0;
    for (std::size_t b = 0; b < family.size(); ++b) {
        const double r2 = dot(family.xi[b], family.xi[b]);
        m += weight(std::sqrt(r2), family.horizon) * r2 * family.measure[b];
    }
    return m;
}

SphericalInfluence spherical_influence(double omega, double weighted_vol, int dimension)
{
    const double nd = dimension;
    return {nd / weighted_vol * omega, nd * (nd + 2.0) / (2.0 * weighted_vol) * omega};
}

Multipliers solve_hydro_multipliers(const Family& family, std::span<const double> omega_h_s, double pivot_tolerance)
{
    return solve_moment_system(family, omega_h_s, &hydro_basis, hydro_targets(family.dimension), pivot_tolerance,
                               "hydrostatic");
}

Multipliers solve_hydro_multipliers(const Family& family, const WeightFunction& weight, double pivot_tolerance)
{
    const auto s = spherical_values(family, weight);
    std::vector<double> w(s.size());
    for (std::size_t b = 0; b < s.size(); ++b) w[b] = s[b].hydro;
    return solve_hydro_multipliers(family, w, pivot_tolerance);
}

Multipliers solve_devia_multipliers(const Family& family, std::span<const double> omega_d_s, double pivot_tolerance)
{
    return solve_moment_system(family, omega_d_s, &devia_basis, devia_targets(family.dimension), pivot_tolerance,
                               "deviatoric");
}

Multipliers solve_devia_multipliers(const Family& family, const WeightFunction& weight, double pivot_tolerance)
{
    const auto s = spherical_values(family, weight);
    std::vector<double> w(s.size());
    for (std::size_t b = 0; b < s.size(); ++b) w[b] = s[b].devia;
    return solve_devia_multipliers(family, w, pivot_tolerance);
}

double ConstraintResiduals::max_abs() const
{
    double m = 0.0;
    for (double v : h) m = std::max(m, std::abs(v));
    for (double v : d) m = std::max(m, std::abs(v));
    return m;
}

ConstraintResiduals constraint_residuals(const Family& family, std::span<const double> omega_h,
                                         std::span<const double> omega_d)
{
    const int dim = family.dimension;
    const auto th = hydro_targets(dim);
    const auto td = devia_targets(dim);
    ConstraintResiduals out;
    out.h.assign(th.size(), 0.0);
    out.d.assign(td.size(), 0.0);
    std::array<double, 15> phi{};
    for (std::size_t b = 0; b < family.size(); ++b) {
        const double v = family.measure[b];
        hydro_basis(family.xi[b], dim, phi);
        for (std::size_t k = 0; k < th.size(); ++k) out.h[k] += omega_h[b] * phi[k] * v;
        devia_basis(family.xi[b], dim, phi);
        for (std::size_t k = 0; k < td.size(); ++k) out.d[k] += omega_d[b] * phi[k] * v;
    }
    for (std::size_t k = 0; k < th.size(); ++k) out.h[k] = (out.h[k] - th[k]) / (th[k] != 0.0 ? th[k] : 1.0);
    for (std::size_t k = 0; k < td.size(); ++k) out.d[k] = (out.d[k] - td[k]) / (td[k] != 0.0 ? td[k] : 1.0);
    return out;
}

bool needs_hydro_fallback(std::span<const double> omega_h)
{
    return std::any_of(omega_h.begin(), omega_h.end(), [](double w) { return w < 0.0; });
}

std::size_t KernelData::count_hydro_fallback() const
{
    return static_cast<std::size_t>(std::count(hydro_fallback.begin(), hydro_fallback.end(), 1));
}

std::size_t KernelData::count_singular() const
{
    return static_cast<std::size_t>(std::count(singular_fallback.begin(), singular_fallback.end(), 1));
}

namespace {

/// Fills node i's slots; returns the number of negative omega_d values.
std::size_t fill_family(KernelData& k, const NodeSet& nodes, const FamilyGraph& graph, std::size_t i,
                        std::span<const std::uint8_t> broken, const KernelOptions& options, bool& singular)
{
    const int dim = nodes.dimension;
    const auto nh = static_cast<std::size_t>(hydro_size(dim));
    const auto nd = static_cast<std::size_t>(devia_size(dim));
    std::fill_n(k.lambda_h.begin() + static_cast<std::ptrdiff_t>(i * nh), nh, 0.0);
    std::fill_n(k.lambda_d.begin() + static_cast<std::ptrdiff_t>(i * nd), nd, 0.0);
    k.hydro_fallback[i] = 0;
    k.singular_fallback[i] = 0;
    k.correction_ratio[i] = 0.0;
    singular = false;

    const Family fam = gather_family(nodes, graph, i, broken, options.include_precracked);
    if (fam.size() == 0) {
        k.weighted_volume[i] = 0.0;
        for (std::size_t b = graph.begin(i); b < graph.end(i); ++b)
            k.omega_h[b] = k.omega_d[b] = k.omega_h_s[b] = k.omega_d_s[b] = 0.0;
        return 0;
    }
    const double m = weighted_volume(fam, options.weight);
    k.weighted_volume[i] = m;
    // Slots outside the family (cracked) keep spherical values; they never enter sums.
    for (std::size_t b = graph.begin(i); b < graph.end(i); ++b) {
        const auto s = spherical_influence(options.weight(graph.length[b], fam.horizon), m, dim);
        k.omega_h_s[b] = k.omega_h[b] = s.hydro;
        k.omega_d_s[b] = k.omega_d[b] = s.devia;
    }
    if (options.model == KernelModel::Spherical) return 0;

    std::vector<double> wh(fam.size()), wd(fam.size());
    for (std::size_t q = 0; q < fam.size(); ++q) {
        wh[q] = k.omega_h_s[fam.slots[q]];
        wd[q] = k.omega_d_s[fam.slots[q]];
    }
    Multipliers hydro, devia;
    try {
        hydro = solve_hydro_multipliers(fam, wh, options.pivot_tolerance);
        devia = solve_devia_multipliers(fam, wd, options.pivot_tolerance);
    } catch (const SingularSystem&) {
        k.singular_fallback[i] = 1;
        singular = true;
        return 0;
    }
    std::copy(hydro.lambda.begin(), hydro.lambda.end(), k.lambda_h.begin() + static_cast<std::ptrdiff_t>(i * nh));
    std::copy(devia.lambda.begin(), devia.lambda.end(), k.lambda_d.begin() + static_cast<std::ptrdiff_t>(i * nd));
    std::size_t negative_d = 0;
    double ratio = 0.0;
    for (std::size_t q = 0; q < fam.size(); ++q) {
        const auto b = fam.slots[q];
        k.omega_h[b] = hydro.omega[q];
        k.omega_d[b] = devia.omega[q];
        if (devia.omega[q] < 0.0) ++negative_d;
        ratio = std::max(ratio, std::abs(hydro.omega[q] - wh[q]) / wh[q]);
    }
    k.correction_ratio[i] = ratio;
    k.hydro_fallback[i] = needs_hydro_fallback(hydro.omega) ? 1 : 0;
    return negative_d;
}

} // namespace

KernelData compute_kernels(const NodeSet& nodes, const FamilyGraph& graph, const KernelOptions& options)
{
    const std::size_t n = nodes.size();
    const int dim = nodes.dimension;
    KernelData k;
    k.dimension = dim;
    k.model = options.model;
    k.weighted_volume.assign(n, 0.0);
    k.lambda_h.assign(n * static_cast<std::size_t>(hydro_size(dim)), 0.0);
    k.lambda_d.assign(n * static_cast<std::size_t>(devia_size(dim)), 0.0);
    const std::size_t nb = graph.num_bonds();
    k.omega_h.assign(nb, 0.0);
    k.omega_d.assign(nb, 0.0);
    k.omega_h_s.assign(nb, 0.0);
    k.omega_d_s.assign(nb, 0.0);
    k.hydro_fallback.assign(n, 0);
    k.singular_fallback.assign(n, 0);
    k.correction_ratio.assign(n, 0.0);

    std::vector<std::size_t> neg(n, 0);
#pragma omp parallel for schedule(dynamic, 64)
    for (long ii = 0; ii < static_cast<long>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        bool singular = false;
        neg[i] = fill_family(k, nodes, graph, i, graph.broken, options, singular);
    }
    for (std::size_t i = 0; i < n; ++i) k.negative_omega_d += neg[i];

    std::size_t reported = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!k.singular_fallback[i]) continue;
        if (reported++ < 10)
            warn("SingularSystem: node " + std::to_string(i) + " falls back to spherical influence");
    }
    if (reported > 10) warn(std::to_string(reported) + " families fell back to spherical influence in total");
    return k;
}

void recompute_family(KernelData& kernels, const NodeSet& nodes, const FamilyGraph& graph, std::size_t i,
                      std::span<const std::uint8_t> broken, const KernelOptions& options)
{
    bool singular = false;
    KernelOptions opts = options;
    opts.include_precracked = false;
    fill_family(kernels, nodes, graph, i, broken, opts, singular);
    if (singular) warn("SingularSystem: node " + std::to_string(i) + " falls back to spherical influence");
}

ConstraintResiduals family_residuals(const KernelData& kernels, const NodeSet& nodes, const FamilyGraph& graph,
                                     std::size_t i, std::span<const std::uint8_t> broken)
{
    const Family fam = gather_family(nodes, graph, i, broken);
    std::vector<double> wh(fam.size()), wd(fam.size());
    for (std::size_t q = 0; q < fam.size(); ++q) {
        wh[q] = kernels.omega_h[fam.slots[q]];
        wd[q] = kernels.omega_d[fam.slots[q]];
    }
    return constraint_residuals(fam, wh, wd);
}

namespace {

constexpr char kMagic[8] = {'X', 'P', 'D', 'K', 'E', 'R', 'N', '1'};
constexpr std::uint32_t kCacheVersion = 1;

struct Fnv1a {
    std::uint64_t h = 1469598103934665603ULL;
    void bytes(const void* p, std::size_t n)
    {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t k = 0; k < n; ++k) {
            h ^= c[k];
            h *= 1099511628211ULL;
        }
    }
    template <class T>
    void vec(const std::vector<T>& v)
    {
        const std::uint64_t n = v.size();
        bytes(&n, sizeof n);
        if (!v.empty()) bytes(v.data(), v.size() * sizeof(T));
    }
    template <class T>
    void value(const T& v) { bytes(&v, sizeof v); }
};

template <class T>
void write_vec(std::ofstream& out, const std::vector<T>& v)
{
    const std::uint64_t n = v.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    if (n) out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
}

template <class T>
bool read_vec(std::ifstream& in, std::vector<T>& v)
{
    std::uint64_t n = 0;
    if (!in.read(reinterpret_cast<char*>(&n), sizeof n)) return false;
    if (n > (1ULL << 34)) return false;
    v.resize(n);
    if (n) in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
    return static_cast<bool>(in);
}

} // namespace

std::uint64_t kernel_cache_key(const NodeSet& nodes, const FamilyGraph& graph, const KernelOptions& options)
{
    Fnv1a h;
    h.value(nodes.dimension);
    h.vec(nodes.positions);
    h.vec(nodes.cell_measure);
    h.vec(nodes.horizon);
    h.vec(graph.offsets);
    h.vec(graph.neighbors);
    h.vec(graph.broken);
    h.bytes(options.weight.name.data(), options.weight.name.size());
    h.value(static_cast<int>(options.model));
    h.value(options.include_precracked);
    h.value(options.pivot_tolerance);
    return h.h;
}

void save_kernels(const std::filesystem::path& path, const KernelData& k, std::uint64_t key)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write kernel cache " + path.string());
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&kCacheVersion), sizeof kCacheVersion);
    out.write(reinterpret_cast<const char*>(&key), sizeof key);
    const std::int32_t dim = k.dimension;
    const std::int32_t model = static_cast<std::int32_t>(k.model);
    const std::uint64_t neg = k.negative_omega_d;
    out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    out.write(reinterpret_cast<const char*>(&model), sizeof model);
    out.write(reinterpret_cast<const char*>(&neg), sizeof neg);
    write_vec(out, k.weighted_volume);
    write_vec(out, k.lambda_h);
    write_vec(out, k.lambda_d);
    write_vec(out, k.omega_h);
    write_vec(out, k.omega_d);
    write_vec(out, k.omega_h_s);
    write_vec(out, k.omega_d_s);
    write_vec(out, k.hydro_fallback);
    write_vec(out, k.singular_fallback);
    write_vec(out, k.correction_ratio);
    if (!out) throw Error(ErrorKind::Io, "write failed for kernel cache " + path.string());
}

bool load_kernels(const std::filesystem::path& path, std::uint64_t key, KernelData& k)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    char magic[sizeof kMagic];
    std::uint32_t version = 0;
    std::uint64_t stored = 0;
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) return false;
    if (!in.read(reinterpret_cast<char*>(&version), sizeof version) || version != kCacheVersion) return false;
    if (!in.read(reinterpret_cast<char*>(&stored), sizeof stored) || stored != key) return false;
    std::int32_t dim = 0, model = 0;
    std::uint64_t neg = 0;
    in.read(reinterpret_cast<char*>(&dim), sizeof dim);
    in.read(reinterpret_cast<char*>(&model), sizeof model);
    in.read(reinterpret_cast<char*>(&neg), sizeof neg);
    KernelData tmp;
    tmp.dimension = dim;
    tmp.model = static_cast<KernelModel>(model);
    tmp.negative_omega_d = neg;
    const bool ok = read_vec(in, tmp.weighted_volume) && read_vec(in, tmp.lambda_h) && read_vec(in, tmp.lambda_d) &&
                    read_vec(in, tmp.omega_h) && read_vec(in, tmp.omega_d) && read_vec(in, tmp.omega_h_s) &&
                    read_vec(in, tmp.omega_d_s) && read_vec(in, tmp.hydro_fallback) &&
                    read_vec(in, tmp.singular_fallback) && read_vec(in, tmp.correction_ratio);
    if (!ok) return false;
    k = std::move(tmp);
    return true;
}

} // namespace xpd
