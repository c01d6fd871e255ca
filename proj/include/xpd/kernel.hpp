#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "xpd/discretization.hpp"

namespace xpd {

/// Radial influence weight omega(|xi|). The profile receives the bond length and
/// the owning node's horizon; it must be positive on (0, delta].
struct WeightFunction {
    enum class Kind { Constant, Radial };
    Kind kind = Kind::Constant;
    std::string name = "constant";
    std::function<double(double, double)> profile;

    double operator()(double r, double horizon) const { return kind == Kind::Constant ? 1.0 : profile(r, horizon); }

    static WeightFunction constant() { return {}; }
    static WeightFunction radial(std::string name, std::function<double(double, double)> profile)
    {
        return {Kind::Radial, std::move(name), std::move(profile)};
    }
    /// omega = delta / r, a common alternative to the constant weight.
    static WeightFunction inverse_distance();
};

/// Bonds of a single family as seen from its owner, in quadrature form.
struct Family {
    int dimension = 2;
    double horizon = 0.0;
    std::vector<Vec3> xi;
    std::vector<double> measure;
    /// Graph slot of each bond (empty for hand-built families).
    std::vector<std::size_t> slots;

    std::size_t size() const { return xi.size(); }
    void add(const Vec3& bond, double cell_measure)
    {
        xi.push_back(bond);
        measure.push_back(cell_measure);
    }
};

/// Collects node i's bonds; bonds flagged in `broken` are skipped unless include_broken.
Family gather_family(const NodeSet& nodes, const FamilyGraph& graph, std::size_t i,
                     std::span<const std::uint8_t> broken, bool include_broken = false);

constexpr int hydro_size(int dimension) { return dimension == 2 ? 3 : 6; }
constexpr int devia_size(int dimension) { return dimension == 2 ? 5 : 15; }

/// Quadratic monomials [xi1^2, xi2^2, (xi3^2,) xi1 xi2, (xi2 xi3, xi3 xi1)].
void hydro_basis(const Vec3& xi, int dimension, std::span<double> out);
/// Quartic monomials divided by |xi|^2, ordered as the deviatoric constraints.
void devia_basis(const Vec3& xi, int dimension, std::span<double> out);
std::span<const double> hydro_targets(int dimension);
std::span<const double> devia_targets(int dimension);

/// m = sum omega |xi|^2 V. Throws EmptyFamily for an empty family.
double weighted_volume(const Family& family, const WeightFunction& weight);

struct SphericalInfluence {
    double hydro = 0.0;
    double devia = 0.0;
};

/// omega_h_s = n_d / m * omega, omega_d_s = n_d (n_d + 2) / (2 m) * omega.
SphericalInfluence spherical_influence(double omega, double weighted_vol, int dimension);

struct Multipliers {
    std::vector<double> lambda;
    std::vector<double> omega;
};

/// Lagrange-multiplier correction of omega_h_s so that all hydrostatic moment
/// constraints hold. Throws SingularSystem when the moment matrix is rank deficient.
Multipliers solve_hydro_multipliers(const Family& family, std::span<const double> omega_h_s,
                                    double pivot_tolerance = 1e-12);
Multipliers solve_hydro_multipliers(const Family& family, const WeightFunction& weight,
                                    double pivot_tolerance = 1e-12);

/// Deviatoric counterpart (5 constraints in 2-D, 15 in 3-D).
Multipliers solve_devia_multipliers(const Family& family, std::span<const double> omega_d_s,
                                    double pivot_tolerance = 1e-12);
Multipliers solve_devia_multipliers(const Family& family, const WeightFunction& weight,
                                    double pivot_tolerance = 1e-12);

struct ConstraintResiduals {
    std::vector<double> h;
    std::vector<double> d;
    double max_abs() const;
};

/// Discrete moment residuals for given per-bond influence values, each
/// normalised by its non-zero target.
ConstraintResiduals constraint_residuals(const Family& family, std::span<const double> omega_h,
                                         std::span<const double> omega_d);

/// True when any corrected hydrostatic influence is negative.
bool needs_hydro_fallback(std::span<const double> omega_h);

enum class KernelModel { Corrected, Spherical };

struct KernelOptions {
    WeightFunction weight;
    KernelModel model = KernelModel::Corrected;
    /// Let pre-cracked bonds enter the moment matrices.
    bool include_precracked = false;
    double pivot_tolerance = 1e-12;
};

/// Per-family influence data; per-bond arrays are indexed by graph slot.
struct KernelData {
    int dimension = 2;
    KernelModel model = KernelModel::Corrected;
    std::vector<double> weighted_volume;
    std::vector<double> lambda_h;
    std::vector<double> lambda_d;
    std::vector<double> omega_h;
    std::vector<double> omega_d;
    std::vector<double> omega_h_s;
    std::vector<double> omega_d_s;
    std::vector<std::uint8_t> hydro_fallback;
    std::vector<std::uint8_t> singular_fallback;
    std::size_t negative_omega_d = 0;
    /// Largest |lambda . basis| / omega_s over the family; a conditioning diagnostic.
    std::vector<double> correction_ratio;

    std::size_t num_nodes() const { return weighted_volume.size(); }
    std::size_t count_hydro_fallback() const;
    std::size_t count_singular() const;
    /// Influence values the force state must use for bond slot b owned by node i.
    double force_omega_h(std::size_t i, std::size_t b) const { return hydro_fallback[i] ? omega_h_s[b] : omega_h[b]; }
    double force_omega_d(std::size_t i, std::size_t b) const { return hydro_fallback[i] ? omega_d_s[b] : omega_d[b]; }
};

KernelData compute_kernels(const NodeSet& nodes, const FamilyGraph& graph, const KernelOptions& options);

/// Recomputes node i's family against the given broken flags.
void recompute_family(KernelData& kernels, const NodeSet& nodes, const FamilyGraph& graph, std::size_t i,
                      std::span<const std::uint8_t> broken, const KernelOptions& options);

/// Residuals of node i's family using its stored kernel values.
ConstraintResiduals family_residuals(const KernelData& kernels, const NodeSet& nodes, const FamilyGraph& graph,
                                     std::size_t i, std::span<const std::uint8_t> broken);

/// Content hash of everything the kernels depend on; keys the cache file.
std::uint64_t kernel_cache_key(const NodeSet& nodes, const FamilyGraph& graph, const KernelOptions& options);
void save_kernels(const std::filesystem::path& path, const KernelData& kernels, std::uint64_t key);
/// Returns false when the file is missing, from another version, or keyed differently.
bool load_kernels(const std::filesystem::path& path, std::uint64_t key, KernelData& kernels);

/// Solves A x = b in place with partial pivoting; false when a pivot falls
/// below rel_tolerance * max|diag(A)|.
bool solve_dense(std::span<double> a, std::span<double> b, int n, double rel_tolerance);

} // namespace xpd
