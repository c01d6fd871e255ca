#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "xpd/mechanics.hpp"

namespace xpd {

/// Prescribed value on one displacement component of one node.
struct DofConstraint {
    enum class Kind { Displacement, Velocity };
    std::size_t node = 0;
    int component = 0;
    Kind kind = Kind::Displacement;
    double value = 0.0;
    /// Velocity constraints release after this much simulated time.
    double duration = std::numeric_limits<double>::infinity();
};

using Constraints = std::vector<DofConstraint>;

struct ExplicitConfig {
    double dt = 0.0;
    std::size_t steps = 0;
    /// Snapshot every `cadence` steps (0 disables).
    std::size_t cadence = 0;
    double stability_safety = 0.5;
    bool failure = true;
    /// Re-solve the multipliers of families that lost bonds.
    bool recompute_on_break = false;
};

/// One explicit step: a = (L + b) / rho, v += a dt, u += v dt, then constraints.
/// Throws NumericalBlowup when any component turns non-finite.
void explicit_step(MechState& state, const ForceField& forces, double density, double dt,
                   const Constraints& constraints, std::size_t step, double time);

/// dt <= min Delta * sqrt(rho / kappa) * safety; returns the bound.
double stable_time_step(const NodeSet& nodes, const MaterialParams& material, double safety);

/// 2d x 2d block mapping endpoint displacements to endpoint forces.
struct BondStiffness {
    int dimension = 3;
    /// Upper-left d x d entries are -k, off-diagonal blocks +k.
    std::array<double, 36> block{};

    int size() const { return 2 * dimension; }
    double operator()(int r, int c) const { return block[static_cast<std::size_t>(r * 6 + c)]; }
    double k(int a, int b) const { return -(*this)(a, b); }
};

/// k_ab = C xi_a xi_b / |xi|^3 dV dV'.
BondStiffness bond_stiffness(const Vec3& xi, double c, double dv, double dv_other, int dimension);

/// Diagonal ADR mass (dt^2 / 4) sum_j |K_ij| * safety, per node and component,
/// flattened as node * dimension + component.
std::vector<double> adr_mass(const NodeSet& nodes, const FamilyGraph& graph, std::span<const std::uint8_t> broken,
                             const MaterialParams& material, double dt, double safety_factor = 1.05);

/// Per-DOF max of the LBBPD rows and the model's own tangent rows, scaled the
/// same way. Guards the fictitious mass where corrected kernels are stiffer
/// than the bond-based estimate.
std::vector<double> adr_mass_envelope(const ForceModel& model, std::span<const std::uint8_t> broken, double dt,
                                      double safety_factor = 1.05);

/// Dense global LBBPD stiffness for small node sets (tests and checks).
std::vector<double> assemble_lbbpd_stiffness(const NodeSet& nodes, const FamilyGraph& graph,
                                             const MaterialParams& material);

struct AdrState {
    double dt = 1.0;
    std::vector<double> mass;
    std::vector<std::uint8_t> free;
    std::vector<double> u;
    std::vector<double> v_half;
    std::vector<double> force;
    std::vector<double> force_prev;
    std::vector<double> k_local;
    double damping = 0.0;
    std::size_t iteration = 0;
    double residual = 0.0;
    std::size_t negative_radicand = 0;

    std::size_t size() const { return u.size(); }
};

AdrState make_adr_state(std::vector<double> mass, std::vector<double> u0, std::vector<std::uint8_t> free, double dt);

/// Advances u given the force vector evaluated at the current u.
void adr_step(AdrState& adr, std::span<const double> force);

/// max |F| over free DOFs divided by max |F| over constrained DOFs (or by
/// `fallback_scale` when nothing is constrained or reactions vanish).
double adr_residual(std::span<const double> force, std::span<const std::uint8_t> free, double fallback_scale);

struct QuasiStaticOptions {
    double tolerance = 1e-5;
    std::size_t max_iterations = 20000;
    double dt = 1.0;
    double safety_factor = 1.05;
    enum class Mass { Lbbpd, Envelope };
    Mass mass = Mass::Envelope;
};

struct QuasiStaticReport {
    bool converged = false;
    std::size_t iterations = 0;
    double residual = 0.0;
    std::size_t negative_radicand = 0;
    std::vector<double> history;
};

/// ADR to static equilibrium. Only displacement constraints are honoured.
/// Throws NotConverged with the residual history when max_iterations is hit.
QuasiStaticReport run_quasi_static(const ForceModel& model, const NodeSet& nodes, const FamilyGraph& graph,
                                   const MaterialParams& material, MechState& state, const Constraints& constraints,
                                   const QuasiStaticOptions& options);

struct DynamicReport {
    std::size_t steps = 0;
    double time = 0.0;
    std::size_t broken_pairs = 0;
    std::size_t recomputed_families = 0;
};

struct DynamicObservers {
    /// After every step, with the number of pairs broken in that step.
    std::function<void(std::size_t step, double time, const MechState&, std::size_t newly_broken)> on_step;
    /// At step 0 and every `cadence` steps.
    std::function<void(std::size_t step, double time, const MechState&)> on_snapshot;
};

/// Explicit dynamics: phase A/B force evaluation, phase C failure on phase-A
/// stretches, then the explicit update. `kernels` is only modified when
/// recompute_on_break is set.
DynamicReport run_dynamic(const ForceModel& model, const NodeSet& nodes, const FamilyGraph& graph,
                          const MaterialParams& material, MechState& state, const Constraints& constraints,
                          const ExplicitConfig& config, const DynamicObservers& observers = {},
                          KernelData* kernels = nullptr, const KernelOptions* kernel_options = nullptr);

} // namespace xpd
