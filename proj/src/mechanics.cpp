#include "xpd/mechanics.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <numbers>

#include "xpd/error.hpp"

namespace xpd {

const char* to_string(Regime regime)
{
    switch (regime) {
    case Regime::ThreeD: return "3d";
    case Regime::PlaneStress: return "plane-stress";
    case Regime::PlaneStrain: return "plane-strain";
    }
    return "?";
}

std::optional<Regime> parse_regime(const std::string& text)
{
    if (text == "3d" || text == "3-d") return Regime::ThreeD;
    if (text == "plane-stress" || text == "plane_stress") return Regime::PlaneStress;
    if (text == "plane-strain" || text == "plane_strain") return Regime::PlaneStrain;
    return std::nullopt;
}

const char* to_string(Model model)
{
    switch (model) {
    case Model::Xosbpd: return "xosbpd";
    case Model::Osbpd: return "osbpd";
    case Model::Lbbpd: return "lbbpd";
    }
    return "?";
}

std::optional<Model> parse_model(const std::string& text)
{
    if (text == "xosbpd") return Model::Xosbpd;
    if (text == "osbpd") return Model::Osbpd;
    if (text == "lbbpd") return Model::Lbbpd;
    return std::nullopt;
}

double MaterialParams::bulk_modulus() const
{
    const double e = youngs_modulus;
    const double nu = poisson_ratio;
    switch (regime) {
    case Regime::ThreeD: return e / (3.0 * (1.0 - 2.0 * nu));
    case Regime::PlaneStrain: return e / (2.0 * (1.0 + nu) * (1.0 - 2.0 * nu));
    case Regime::PlaneStress: return e / (2.0 * (1.0 - nu));
    }
    return 0.0;
}

double MaterialParams::shear_modulus() const { return youngs_modulus / (2.0 * (1.0 + poisson_ratio)); }

double MaterialParams::bond_constant(double delta) const
{
    const double e = youngs_modulus;
    const double nu = poisson_ratio;
    const double pi = std::numbers::pi;
    switch (regime) {
    case Regime::PlaneStress: return 6.0 * e / (pi * delta * delta * delta * (1.0 - nu));
    case Regime::PlaneStrain: return 6.0 * e / (pi * delta * delta * delta * (1.0 + nu) * (1.0 - 2.0 * nu));
    case Regime::ThreeD: return 18.0 * bulk_modulus() / (pi * delta * delta * delta * delta);
    }
    return 0.0;
}

double plane_strain_critical_stretch(double youngs_modulus, double fracture_energy, double delta)
{
    return std::sqrt(5.0 * std::numbers::pi * fracture_energy / (12.0 * youngs_modulus * delta));
}

double MaterialParams::critical_stretch_for(double delta) const
{
    if (critical_stretch) return *critical_stretch;
    if (regime == Regime::PlaneStrain && fracture_energy > 0.0)
        return plane_strain_critical_stretch(youngs_modulus, fracture_energy, delta);
    throw ValidationError({std::string("failure in the ") + to_string(regime) +
                           " regime needs an explicit critical_stretch (or plane strain with fracture_energy)"});
}

void MaterialParams::validate() const
{
    std::vector<std::string> problems;
    if (!(youngs_modulus > 0.0)) problems.emplace_back("youngs_modulus must be > 0");
    if (!(poisson_ratio > -1.0 && poisson_ratio < 0.5)) problems.emplace_back("poisson_ratio must lie in (-1, 0.5)");
    if (!(density > 0.0)) problems.emplace_back("density must be > 0");
    if (fracture_energy < 0.0) problems.emplace_back("fracture_energy must be >= 0");
    if (critical_stretch && !(*critical_stretch > 0.0)) problems.emplace_back("critical_stretch must be > 0");
    if (problems.empty() && !(bulk_modulus() > 0.0 && shear_modulus() > 0.0))
        problems.emplace_back("derived moduli must be positive");
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

MechState make_state(const NodeSet& nodes, const FamilyGraph& graph)
{
    const std::size_t n = nodes.size();
    const std::size_t nb = graph.num_bonds();
    MechState s;
    s.displacement.assign(n, Vec3{});
    s.velocity.assign(n, Vec3{});
    s.acceleration.assign(n, Vec3{});
    s.body_force.assign(n, Vec3{});
    s.dilatation.assign(n, 0.0);
    s.sed.assign(n, 0.0);
    s.damage.assign(n, 0.0);
    s.deformed_length = graph.length;
    s.extension.assign(nb, 0.0);
    s.stretch.assign(nb, 0.0);
    s.broken = graph.broken.empty() ? std::vector<std::uint8_t>(nb, 0) : graph.broken;
    compute_damage(nodes, graph, s);
    return s;
}

BondKinematics kinematics(const Vec3& xi, const Vec3& eta)
{
    BondKinematics k;
    k.eta = eta;
    k.length = norm(xi + eta);
    if (!(k.length > 0.0)) throw Error(ErrorKind::DegenerateBond, "deformed bond has zero length");
    const double r = norm(xi);
    k.extension = k.length - r;
    k.stretch = k.extension / r;
    return k;
}

void compute_kinematics(const NodeSet& nodes, const FamilyGraph& graph, MechState& state)
{
    const auto n = static_cast<long>(nodes.size());
    std::atomic<long> degenerate{-1};
#pragma omp parallel for schedule(static)
    for (long ii = 0; ii < n; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const Vec3 ui = state.displacement[i];
        for (std::size_t b = graph.begin(i); b < graph.end(i); ++b) {
            const Vec3 y = graph.xi[b] + (state.displacement[graph.neighbors[b]] - ui);
            const double len = norm(y);
            if (!(len > 0.0)) degenerate.store(ii);
            state.deformed_length[b] = len;
            state.extension[b] = len - graph.length[b];
            state.stretch[b] = state.extension[b] / graph.length[b];
        }
    }
    if (degenerate.load() >= 0)
        throw Error(ErrorKind::DegenerateBond,
                    "deformed bond of node " + std::to_string(degenerate.load()) + " collapsed to zero length");
}

double dilatation(const NodeSet& nodes, const FamilyGraph& graph, const KernelData& kernels, const MechState& state,
                  std::size_t i)
{
    double theta = 0.0;
    for (std::size_t b = graph.begin(i); b < graph.end(i); ++b) {
        if (state.broken[b]) continue;
        theta += kernels.omega_h[b] * graph.length[b] * state.extension[b] * nodes.cell_measure[graph.neighbors[b]];
    }
    return theta;
}

void compute_dilatation(const NodeSet& nodes, const FamilyGraph& graph, const KernelData& kernels, MechState& state)
{
    const auto n = static_cast<long>(nodes.size());
#pragma omp parallel for schedule(static)
    for (long ii = 0; ii < n; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        state.dilatation[i] = dilatation(nodes, graph, kernels, state, i);
    }
}

double strain_energy_density(const NodeSet& nodes, const FamilyGraph& graph, const KernelData& kernels,
                             const MaterialParams& material, const MechState& state, std::size_t i)
{
    const double nd = nodes.dimension;
    const double theta = state.dilatation[i];
    double dev = 0.0;
    for (std::size_t b = graph.begin(i); b < graph.end(i); ++b) {
        if (state.broken[b]) continue;
        const double ed = state.extension[b] - theta * graph.length[b] / nd;
        dev += kernels.omega_d[b] * ed * ed * nodes.cell_measure[graph.neighbors[b]];
    }
    return 0.5 * material.bulk_modulus() * theta * theta + material.shear_modulus() * dev;
}

void compute_sed(const NodeSet& nodes, const FamilyGraph& graph, const KernelData& kernels,
                 const MaterialParams& material, MechState& state)
{
    const auto n = static_cast<long>(nodes.size());
#pragma omp parallel for schedule(static)
    for (long ii = 0; ii < n; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        state.sed[i] = strain_energy_density(nodes, graph, kernels, material, state, i);
    }
}

ForceModel::ForceModel(const NodeSet& nodes, const FamilyGraph& graph, const KernelData* kernels,
                       const MaterialParams& material, Model model)
    : nodes_(nodes), graph_(graph), kernels_(kernels), material_(material), model_(model),
      kappa_(material.bulk_modulus()), mu_(material.shear_modulus())
{
    if (model != Model::Lbbpd && kernels == nullptr)
        throw Error(ErrorKind::Validation, std::string(to_string(model)) + " needs kernel data");
    if (model == Model::Lbbpd) {
        bond_c_.resize(graph.num_bonds());
        for (std::size_t i = 0; i < nodes.size(); ++i)
            for (std::size_t b = graph.begin(i); b < graph.end(i); ++b)
                bond_c_[b] = material.bond_constant(0.5 * (nodes.horizon[i] + nodes.horizon[graph.neighbors[b]]));
    }
}

void ForceModel::update_kinematics(MechState& state) const
{
    compute_kinematics(nodes_, graph_, state);
    if (kernels_ != nullptr)
        compute_dilatation(nodes_, graph_, *kernels_, state);
    else
        std::fill(state.dilatation.begin(), state.dilatation.end(), 0.0);
}

void ForceModel::internal_forces(const MechState& state, ForceField& forces) const
{
    const std::size_t n = nodes_.size();
    const auto ln = static_cast<long>(n);
    forces.internal_force.assign(n, Vec3{});
    forces.scalar.assign(graph_.num_bonds(), 0.0);

    if (model_ == Model::Lbbpd) {
        // f = C (xi xi^T / |xi|^3) eta, split evenly between the two slots.
#pragma omp parallel for schedule(static)
        for (long ii = 0; ii < ln; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            Vec3 acc;
            for (std::size_t b = graph_.begin(i); b < graph_.end(i); ++b) {
                if (state.broken[b]) continue;
                const auto j = graph_.neighbors[b];
                const Vec3& xi = graph_.xi[b];
                const double r = graph_.length[b];
                const Vec3 eta = state.displacement[j] - state.displacement[i];
                const double s = bond_c_[b] * dot(xi, eta) / (r * r * r);
                forces.scalar[b] = 0.5 * s * r;
                acc += xi * (s * nodes_.cell_measure[j]);
            }
            forces.internal_force[i] = acc;
        }
        return;
    }

    const KernelData& k = *kernels_;
    const double nd = nodes_.dimension;
#pragma omp parallel for schedule(static)
    for (long ii = 0; ii < ln; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double theta = state.dilatation[i];
        for (std::size_t b = graph_.begin(i); b < graph_.end(i); ++b) {
            if (state.broken[b]) continue;
            const double r = graph_.length[b];
            const double ed = state.extension[b] - theta * r / nd;
            forces.scalar[b] =
                scalar_force_state(kappa_, mu_, k.force_omega_h(i, b), k.force_omega_d(i, b), r, theta, ed);
        }
    }
#pragma omp parallel for schedule(static)
    for (long ii = 0; ii < ln; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        Vec3 acc;
        for (std::size_t b = graph_.begin(i); b < graph_.end(i); ++b) {
            if (state.broken[b]) continue;
            const auto j = graph_.neighbors[b];
            const Vec3 y = graph_.xi[b] + (state.displacement[j] - state.displacement[i]);
            const double t = forces.scalar[b] + forces.scalar[graph_.reverse[b]];
            acc += y * (t * nodes_.cell_measure[j] / state.deformed_length[b]);
        }
        forces.internal_force[i] = acc;
    }
}

void ForceModel::evaluate(MechState& state, ForceField& forces) const
{
    if (model_ != Model::Lbbpd) update_kinematics(state);
    internal_forces(state, forces);
}

void ForceModel::compute_sed(MechState& state) const
{
    if (kernels_ == nullptr) {
        // Bond-based energy: W = sum C s^2 |xi| V / 4.
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            double w = 0.0;
            for (std::size_t b = graph_.begin(i); b < graph_.end(i); ++b) {
                if (state.broken[b]) continue;
                w += 0.25 * bond_c_[b] * state.stretch[b] * state.stretch[b] * graph_.length[b] *
                     nodes_.cell_measure[graph_.neighbors[b]];
            }
            state.sed[i] = w;
        }
        return;
    }
    xpd::compute_sed(nodes_, graph_, *kernels_, material_, state);
}

void compute_damage(const NodeSet& nodes, const FamilyGraph& graph, MechState& state)
{
    const auto n = static_cast<long>(nodes.size());
#pragma omp parallel for schedule(static)
    for (long ii = 0; ii < n; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double all = 0.0;
        double intact = 0.0;
        for (std::size_t b = graph.begin(i); b < graph.end(i); ++b) {
            const double v = nodes.cell_measure[graph.neighbors[b]];
            all += v;
            if (!state.broken[b]) intact += v;
        }
        state.damage[i] = all > 0.0 ? 1.0 - intact / all : 0.0;
    }
}

std::size_t update_failure(const NodeSet& nodes, const FamilyGraph& graph, const MaterialParams& material,
                           MechState& state, std::vector<std::size_t>* touched_nodes)
{
    const std::size_t n = nodes.size();
    const bool fixed = material.critical_stretch.has_value();
    const double s0_fixed = fixed ? *material.critical_stretch : 0.0;
    if (!fixed && n > 0) (void)material.critical_stretch_for(nodes.horizon[0]); // throws outside the parallel region
    // The lower-indexed endpoint owns the pair decision, so both slots flip together.
    std::vector<std::uint8_t> flip(graph.num_bonds(), 0);
    const auto ln = static_cast<long>(n);
#pragma omp parallel for schedule(static)
    for (long ii = 0; ii < ln; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        for (std::size_t b = graph.begin(i); b < graph.end(i); ++b) {
            const auto j = graph.neighbors[b];
            if (j < i || state.broken[b]) continue;
            const double s0 =
                fixed ? s0_fixed : material.critical_stretch_for(0.5 * (nodes.horizon[i] + nodes.horizon[j]));
            if (state.stretch[b] > s0) flip[b] = 1;
        }
    }
    std::size_t count = 0;
    if (touched_nodes) touched_nodes->clear();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t b = graph.begin(i); b < graph.end(i); ++b) {
            if (!flip[b]) continue;
            state.broken[b] = 1;
            state.broken[graph.reverse[b]] = 1;
            ++count;
            if (touched_nodes) {
                touched_nodes->push_back(i);
                touched_nodes->push_back(graph.neighbors[b]);
            }
        }
    }
    if (touched_nodes) {
        std::sort(touched_nodes->begin(), touched_nodes->end());
        touched_nodes->erase(std::unique(touched_nodes->begin(), touched_nodes->end()), touched_nodes->end());
    }
    if (count > 0) compute_damage(nodes, graph, state);
    return count;
}

} // namespace xpd

namespace xpd {

std::vector<double> ForceModel::tangent_row_abs_sums(std::span<const std::uint8_t> broken) const
{
    const auto d = static_cast<std::size_t>(nodes_.dimension);
    const std::size_t n = nodes_.size();
    std::vector<double> rows(n * d, 0.0);
    auto intact = [&](std::size_t b) { return broken.empty() || !broken[b]; };

    // Per-node block accumulator over the two-ring stencil.
    std::vector<std::array<double, 9>> block(n);
    std::vector<std::uint8_t> seen(n, 0);
    std::vector<std::size_t> touched;
    auto add = [&](std::size_t m, const Vec3& row_dir, const Vec3& col_dir, double w) {
        if (!seen[m]) {
            seen[m] = 1;
            block[m].fill(0.0);
            touched.push_back(m);
        }
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t c = 0; c < d; ++c) block[m][a * 3 + c] += w * row_dir[a] * col_dir[c];
    };
    auto unit = [&](std::size_t b) { return graph_.xi[b] * (1.0 / graph_.length[b]); };

    const double nd = nodes_.dimension;
    for (std::size_t i = 0; i < n; ++i) {
        touched.clear();
        const double vi = nodes_.cell_measure[i];
        for (std::size_t b = graph_.begin(i); b < graph_.end(i); ++b) {
            if (!intact(b)) continue;
            const std::size_t j = graph_.neighbors[b];
            const double vj = nodes_.cell_measure[j];
            const Vec3 nij = unit(b);
            const double r = graph_.length[b];
            if (model_ == Model::Lbbpd) {
                const double k = bond_c_[b] * vi * vj / r;
                add(j, nij, nij, k);
                add(i, nij, nij, -k);
                continue;
            }
            const KernelData& k = *kernels_;
            const std::size_t rb = graph_.reverse[b];
            const double beta = 2.0 * mu_ * (k.force_omega_d(i, b) + k.force_omega_d(j, rb));
            add(j, nij, nij, vi * vj * beta);
            add(i, nij, nij, -vi * vj * beta);
            const double alpha_i = kappa_ * k.force_omega_h(i, b) * r - 2.0 * mu_ * k.force_omega_d(i, b) * r / nd;
            const double alpha_j = kappa_ * k.force_omega_h(j, rb) * r - 2.0 * mu_ * k.force_omega_d(j, rb) * r / nd;
            // theta_i and theta_j each depend on their own family.
            for (int side = 0; side < 2; ++side) {
                const std::size_t owner = side == 0 ? i : j;
                const double w = vi * vj * (side == 0 ? alpha_i : alpha_j);
                if (w == 0.0) continue;
                for (std::size_t q = graph_.begin(owner); q < graph_.end(owner); ++q) {
                    if (!intact(q)) continue;
                    const double a = k.omega_h[q] * graph_.length[q] * nodes_.cell_measure[graph_.neighbors[q]];
                    const Vec3 nq = unit(q);
                    add(graph_.neighbors[q], nij, nq, w * a);
                    add(owner, nij, nq, -w * a);
                }
            }
        }
        for (std::size_t m : touched) {
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t c = 0; c < d; ++c) rows[i * d + a] += std::abs(block[m][a * 3 + c]);
            seen[m] = 0;
        }
    }
    return rows;
}

} // namespace xpd
