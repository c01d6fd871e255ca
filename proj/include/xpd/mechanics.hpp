#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xpd/discretization.hpp"
#include "xpd/kernel.hpp"

namespace xpd {

enum class Regime { ThreeD, PlaneStress, PlaneStrain };

const char* to_string(Regime regime);
std::optional<Regime> parse_regime(const std::string& text);

struct MaterialParams {
    double youngs_modulus = 0.0;
    double poisson_ratio = 0.0;
    double density = 1.0;
    double fracture_energy = 0.0;
    Regime regime = Regime::PlaneStress;
    /// Explicit critical stretch; required for failure outside plane strain.
    std::optional<double> critical_stretch;

    double bulk_modulus() const;
    double shear_modulus() const;
    /// Linearised bond-based constant C for horizon delta.
    double bond_constant(double delta) const;
    /// S0 for horizon delta: the configured value, or the plane-strain energy formula.
    /// Throws ValidationError when neither applies.
    double critical_stretch_for(double delta) const;
    /// Throws ValidationError listing every violated invariant.
    void validate() const;
};

/// sqrt(5 pi G0 / (12 E delta)).
double plane_strain_critical_stretch(double youngs_modulus, double fracture_energy, double delta);

enum class Model { Xosbpd, Osbpd, Lbbpd };

const char* to_string(Model model);
std::optional<Model> parse_model(const std::string& text);

struct MechState {
    std::vector<Vec3> displacement;
    std::vector<Vec3> velocity;
    std::vector<Vec3> acceleration;
    std::vector<Vec3> body_force;
    std::vector<double> dilatation;
    std::vector<double> sed;
    std::vector<double> damage;
    /// Per bond slot.
    std::vector<double> deformed_length;
    std::vector<double> extension;
    std::vector<double> stretch;
    std::vector<std::uint8_t> broken;

    std::size_t num_nodes() const { return displacement.size(); }
};

/// Zero state sized for the graph; broken flags start from the pre-cracks.
MechState make_state(const NodeSet& nodes, const FamilyGraph& graph);

struct ForceField {
    std::vector<Vec3> internal_force;
    /// Per bond slot, the owner's scalar force state.
    std::vector<double> scalar;
};

struct BondKinematics {
    Vec3 eta;
    double length = 0.0;
    double extension = 0.0;
    double stretch = 0.0;
};

/// Throws DegenerateBond when the deformed bond collapses to zero length.
BondKinematics kinematics(const Vec3& xi, const Vec3& eta);

/// t = kappa omega_h |xi| theta + 2 mu omega_d e_d.
inline double scalar_force_state(double kappa, double mu, double omega_h, double omega_d, double xi_length,
                                 double theta, double e_d)
{
    return kappa * omega_h * xi_length * theta + 2.0 * mu * omega_d * e_d;
}

/// Fills deformed length, extension and stretch for every bond.
void compute_kinematics(const NodeSet& nodes, const FamilyGraph& graph, MechState& state);

/// theta_i = sum over intact bonds of omega_h |xi| e V, always with the corrected omega_h.
double dilatation(const NodeSet& nodes, const FamilyGraph& graph, const KernelData& kernels, const MechState& state,
                  std::size_t i);
void compute_dilatation(const NodeSet& nodes, const FamilyGraph& graph, const KernelData& kernels, MechState& state);

/// W = kappa theta^2 / 2 + mu sum omega_d (e_d)^2 V with e_d = e - theta |xi| / n_d.
double strain_energy_density(const NodeSet& nodes, const FamilyGraph& graph, const KernelData& kernels,
                             const MaterialParams& material, const MechState& state, std::size_t i);
void compute_sed(const NodeSet& nodes, const FamilyGraph& graph, const KernelData& kernels,
                 const MaterialParams& material, MechState& state);

/// Nodal internal force density for one of the three models. State-based models
/// need kinematics and dilatation current; the linearised bond model reads
/// displacements only.
class ForceModel {
public:
    ForceModel(const NodeSet& nodes, const FamilyGraph& graph, const KernelData* kernels,
               const MaterialParams& material, Model model);

    Model model() const { return model_; }
    const KernelData* kernels() const { return kernels_; }

    /// Phase A: kinematics and dilatation.
    void update_kinematics(MechState& state) const;
    /// Phase B: scalar force states and nodal forces.
    void internal_forces(const MechState& state, ForceField& forces) const;
    /// A then B.
    void evaluate(MechState& state, ForceField& forces) const;
    void compute_sed(MechState& state) const;

    /// Row sums of |K| for the model's small-displacement tangent, flattened as
    /// node * dimension + component. Rows include the dilatation coupling
    /// through both endpoint families.
    std::vector<double> tangent_row_abs_sums(std::span<const std::uint8_t> broken) const;

    const NodeSet& nodes() const { return nodes_; }
    const FamilyGraph& graph() const { return graph_; }
    const MaterialParams& material() const { return material_; }

private:
    const NodeSet& nodes_;
    const FamilyGraph& graph_;
    const KernelData* kernels_;
    MaterialParams material_;
    Model model_;
    double kappa_;
    double mu_;
    /// Per-bond C for the linearised model (pair-averaged horizon).
    std::vector<double> bond_c_;
};

/// Phase C: breaks every intact bond with S > S0 on both sides and refreshes
/// damage. Returns the number of newly broken pairs; `newly_broken`, when
/// given, receives the owner nodes whose families changed.
std::size_t update_failure(const NodeSet& nodes, const FamilyGraph& graph, const MaterialParams& material,
                           MechState& state, std::vector<std::size_t>* touched_nodes = nullptr);

/// phi_i = 1 - sum_intact V_j / sum_all V_j.
void compute_damage(const NodeSet& nodes, const FamilyGraph& graph, MechState& state);

} // namespace xpd
