#include "xpd/solver.hpp"

#include <algorithm>
#include <cmath>

#include "xpd/error.hpp"

namespace xpd {

namespace {

bool finite(const Vec3& v) { return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z); }

double max_abs(std::span<const double> v, std::span<const std::uint8_t> mask, bool want)
{
    double m = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k)
        if (static_cast<bool>(mask[k]) == want) m = std::max(m, std::abs(v[k]));
    return m;
}

} // namespace

void explicit_step(MechState& state, const ForceField& forces, double density, double dt,
                   const Constraints& constraints, std::size_t step, double time)
{
    const std::size_t n = state.num_nodes();
    const double inv_rho = 1.0 / density;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 a = (forces.internal_force[i] + state.body_force[i]) * inv_rho;
        state.acceleration[i] = a;
        state.velocity[i] += a * dt;
    }
    for (const auto& c : constraints) {
        if (c.kind != DofConstraint::Kind::Velocity || time >= c.duration) continue;
        state.velocity[c.node][static_cast<std::size_t>(c.component)] = c.value;
    }
    for (std::size_t i = 0; i < n; ++i) state.displacement[i] += state.velocity[i] * dt;
    for (const auto& c : constraints) {
        if (c.kind != DofConstraint::Kind::Displacement) continue;
        state.displacement[c.node][static_cast<std::size_t>(c.component)] = c.value;
        state.velocity[c.node][static_cast<std::size_t>(c.component)] = 0.0;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!finite(state.displacement[i]) || !finite(state.velocity[i]))
            throw NumericalBlowup(step, "non-finite state at node " + std::to_string(i));
    }
}

double stable_time_step(const NodeSet& nodes, const MaterialParams& material, double safety)
{
    double dmin = std::numeric_limits<double>::infinity();
    for (double d : nodes.char_length) dmin = std::min(dmin, d);
    return dmin * std::sqrt(material.density / material.bulk_modulus()) * safety;
}

BondStiffness bond_stiffness(const Vec3& xi, double c, double dv, double dv_other, int dimension)
{
    BondStiffness s;
    s.dimension = dimension;
    const double r = norm(xi);
    const double scale = c / (r * r * r) * dv * dv_other;
    for (int a = 0; a < dimension; ++a) {
        for (int b = 0; b < dimension; ++b) {
            const double k = scale * (xi[static_cast<std::size_t>(a)] * xi[static_cast<std::size_t>(b)]);
            const auto at = [](int row, int col) { return static_cast<std::size_t>(row * 6 + col); };
            s.block[at(a, b)] = -k;
            s.block[at(a + dimension, b + dimension)] = -k;
            s.block[at(a, b + dimension)] = k;
            s.block[at(a + dimension, b)] = k;
        }
    }
    return s;
}

std::vector<double> adr_mass(const NodeSet& nodes, const FamilyGraph& graph, std::span<const std::uint8_t> broken,
                             const MaterialParams& material, double dt, double safety_factor)
{
    const int d = nodes.dimension;
    const auto ud = static_cast<std::size_t>(d);
    const std::size_t n = nodes.size();
    std::vector<double> mass(n * ud, 0.0);
    const double scale = 0.25 * dt * dt * safety_factor;
    for (std::size_t i = 0; i < n; ++i) {
        std::array<double, 9> diag{};
        std::array<double, 3> offdiag{};
        for (std::size_t b = graph.begin(i); b < graph.end(i); ++b) {
            if (!broken.empty() && broken[b]) continue;
            const auto j = graph.neighbors[b];
            const double c = material.bond_constant(0.5 * (nodes.horizon[i] + nodes.horizon[j]));
            const auto s = bond_stiffness(graph.xi[b], c, nodes.cell_measure[i], nodes.cell_measure[j], d);
            for (int a = 0; a < d; ++a) {
                for (int e = 0; e < d; ++e) {
                    diag[static_cast<std::size_t>(a * 3 + e)] += s(a, e);
                    offdiag[static_cast<std::size_t>(a)] += std::abs(s(a, e + d));
                }
            }
        }
        for (std::size_t a = 0; a < ud; ++a) {
            double row = offdiag[a];
            for (std::size_t e = 0; e < ud; ++e) row += std::abs(diag[a * 3 + e]);
            mass[i * ud + a] = scale * row;
        }
    }
    std::vector<double> positive;
    for (double m : mass)
        if (m > 0.0) positive.push_back(m);
    if (positive.size() < mass.size()) {
        double fill = 1.0;
        if (!positive.empty()) {
            auto mid = positive.begin() + static_cast<std::ptrdiff_t>(positive.size() / 2);
            std::nth_element(positive.begin(), mid, positive.end());
            fill = *mid;
        }
        std::size_t count = 0;
        for (double& m : mass) {
            if (m > 0.0) continue;
            m = fill;
            ++count;
        }
        warn("IsolatedNode: " + std::to_string(count / ud) + " node(s) with no stiffness get the median ADR mass");
    }
    return mass;
}

std::vector<double> adr_mass_envelope(const ForceModel& model, std::span<const std::uint8_t> broken, double dt,
                                      double safety_factor)
{
    auto mass = adr_mass(model.nodes(), model.graph(), broken, model.material(), dt, safety_factor);
    if (model.model() == Model::Lbbpd) return mass;
    const auto rows = model.tangent_row_abs_sums(broken);
    const double scale = 0.25 * dt * dt * safety_factor;
    for (std::size_t k = 0; k < mass.size(); ++k) mass[k] = std::max(mass[k], scale * rows[k]);
    return mass;
}

std::vector<double> assemble_lbbpd_stiffness(const NodeSet& nodes, const FamilyGraph& graph,
                                             const MaterialParams& material)
{
    const auto d = static_cast<std::size_t>(nodes.dimension);
    const std::size_t n = nodes.size() * d;
    std::vector<double> k(n * n, 0.0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t b = graph.begin(i); b < graph.end(i); ++b) {
            const std::size_t j = graph.neighbors[b];
            if (j < i) continue;
            const double c = material.bond_constant(0.5 * (nodes.horizon[i] + nodes.horizon[j]));
            const auto s =
                bond_stiffness(graph.xi[b], c, nodes.cell_measure[i], nodes.cell_measure[j], nodes.dimension);
            const std::size_t base[2] = {i * d, j * d};
            for (std::size_t r = 0; r < 2 * d; ++r)
                for (std::size_t c2 = 0; c2 < 2 * d; ++c2)
                    k[(base[r / d] + r % d) * n + base[c2 / d] + c2 % d] +=
                        s(static_cast<int>(r), static_cast<int>(c2));
        }
    }
    return k;
}

AdrState make_adr_state(std::vector<double> mass, std::vector<double> u0, std::vector<std::uint8_t> free, double dt)
{
    if (mass.size() != u0.size() || free.size() != u0.size())
        throw Error(ErrorKind::Validation, "ADR vectors must have equal length");
    if (!(dt > 0.0)) throw Error(ErrorKind::Validation, "ADR time step must be > 0");
    for (double m : mass)
        if (!(m > 0.0)) throw Error(ErrorKind::Validation, "ADR mass must be positive");
    AdrState s;
    s.dt = dt;
    s.mass = std::move(mass);
    s.u = std::move(u0);
    s.free = std::move(free);
    const std::size_t n = s.u.size();
    s.v_half.assign(n, 0.0);
    s.force.assign(n, 0.0);
    s.force_prev.assign(n, 0.0);
    s.k_local.assign(n, 0.0);
    return s;
}

void adr_step(AdrState& adr, std::span<const double> force)
{
    const std::size_t n = adr.size();
    const double dt = adr.dt;
    adr.force_prev.swap(adr.force);
    std::copy(force.begin(), force.end(), adr.force.begin());

    if (adr.iteration == 0) {
        adr.damping = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            adr.v_half[k] = adr.free[k] ? 0.5 * dt * adr.force[k] / adr.mass[k] : 0.0;
    } else {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (!adr.free[k]) continue;
            const double v = adr.v_half[k];
            const double df = adr.force[k] - adr.force_prev[k];
            double kl = 0.0;
            if (v != 0.0) {
                kl = -df / (adr.mass[k] * dt * v);
                if (!std::isfinite(kl)) kl = 0.0;
            }
            adr.k_local[k] = kl;
            num += adr.u[k] * kl * adr.u[k];
            den += adr.u[k] * adr.u[k];
        }
        double c = 0.0;
        if (den > 0.0) {
            if (num >= 0.0)
                c = 2.0 * std::sqrt(num / den);
            else
                ++adr.negative_radicand;
        }
        const double limit = 2.0 / dt * (1.0 - 1e-9);
        adr.damping = std::min(c, limit);
        const double cdt = adr.damping * dt;
        for (std::size_t k = 0; k < n; ++k) {
            if (!adr.free[k]) continue;
            adr.v_half[k] = ((2.0 - cdt) * adr.v_half[k] + 2.0 * dt * adr.force[k] / adr.mass[k]) / (2.0 + cdt);
        }
    }
    for (std::size_t k = 0; k < n; ++k)
        if (adr.free[k]) adr.u[k] += adr.v_half[k] * dt;
    ++adr.iteration;
}

double adr_residual(std::span<const double> force, std::span<const std::uint8_t> free, double fallback_scale)
{
    const double free_max = max_abs(force, free, true);
    const double reaction = max_abs(force, free, false);
    const double scale = reaction > 0.0 ? reaction : fallback_scale;
    if (free_max == 0.0) return 0.0;
    return scale > 0.0 ? free_max / scale : std::numeric_limits<double>::infinity();
}

QuasiStaticReport run_quasi_static(const ForceModel& model, const NodeSet& nodes, const FamilyGraph& graph,
                                   const MaterialParams& material, MechState& state, const Constraints& constraints,
                                   const QuasiStaticOptions& options)
{
    const auto d = static_cast<std::size_t>(nodes.dimension);
    const std::size_t n = nodes.size();
    std::vector<std::uint8_t> free(n * d, 1);
    std::vector<double> u0(n * d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < d; ++a) u0[i * d + a] = state.displacement[i][a];
    for (const auto& c : constraints) {
        if (c.kind != DofConstraint::Kind::Displacement) {
            warn("velocity constraints are ignored by the quasi-static solver");
            continue;
        }
        const std::size_t k = c.node * d + static_cast<std::size_t>(c.component);
        free[k] = 0;
        u0[k] = c.value;
    }
    auto mass = options.mass == QuasiStaticOptions::Mass::Lbbpd
                    ? adr_mass(nodes, graph, state.broken, material, options.dt, options.safety_factor)
                    : adr_mass_envelope(model, state.broken, options.dt, options.safety_factor);
    AdrState adr = make_adr_state(std::move(mass), std::move(u0), std::move(free), options.dt);

    ForceField forces;
    std::vector<double> f(n * d, 0.0);
    auto evaluate = [&]() {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t a = 0; a < d; ++a) state.displacement[i][a] = adr.u[i * d + a];
        model.evaluate(state, forces);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 fi = (forces.internal_force[i] + state.body_force[i]) * nodes.cell_measure[i];
            for (std::size_t a = 0; a < d; ++a) f[i * d + a] = fi[a];
        }
    };

    QuasiStaticReport report;
    evaluate();
    // Body-force-only problems have no reactions; fall back to the initial load.
    const double initial_scale = max_abs(f, adr.free, true);
    for (;;) {
        const double r = adr_residual(f, adr.free, initial_scale);
        report.history.push_back(r);
        report.residual = r;
        report.iterations = adr.iteration;
        if (!std::isfinite(r)) throw NumericalBlowup(adr.iteration, "ADR residual is not finite");
        if (r <= options.tolerance) {
            report.converged = true;
            break;
        }
        if (adr.iteration >= options.max_iterations) {
            report.negative_radicand = adr.negative_radicand;
            throw NotConverged(std::move(report.history),
                               "ADR did not reach residual " + std::to_string(options.tolerance) + " in " +
                                   std::to_string(options.max_iterations) + " iterations (last " +
                                   std::to_string(r) + ")");
        }
        adr_step(adr, f);
        evaluate();
    }
    report.negative_radicand = adr.negative_radicand;
    for (std::size_t i = 0; i < n; ++i) state.velocity[i] = Vec3{};
    model.compute_sed(state);
    return report;
}

DynamicReport run_dynamic(const ForceModel& model, const NodeSet& nodes, const FamilyGraph& graph,
                          const MaterialParams& material, MechState& state, const Constraints& constraints,
                          const ExplicitConfig& config, const DynamicObservers& observers, KernelData* kernels,
                          const KernelOptions* kernel_options)
{
    if (!(config.dt > 0.0)) throw ValidationError({"dt must be > 0"});
    const double bound = stable_time_step(nodes, material, config.stability_safety);
    if (config.dt > bound)
        warn("time step " + std::to_string(config.dt) + " s exceeds the advisory stability bound " +
             std::to_string(bound) + " s");
    if (config.recompute_on_break && (kernels == nullptr || kernel_options == nullptr || model.kernels() != kernels))
        throw Error(ErrorKind::Validation, "recompute_on_break needs the model's mutable kernel data");

    DynamicReport report;
    ForceField forces;
    std::vector<std::size_t> touched;
    double time = 0.0;
    for (const auto& c : constraints)
        if (c.kind == DofConstraint::Kind::Velocity && c.duration > 0.0)
            state.velocity[c.node][static_cast<std::size_t>(c.component)] = c.value;

    for (std::size_t step = 0; step < config.steps; ++step) {
        model.evaluate(state, forces);
        if (model.model() == Model::Lbbpd) compute_kinematics(nodes, graph, state);
        if (observers.on_snapshot && config.cadence > 0 && step % config.cadence == 0) {
            model.compute_sed(state);
            observers.on_snapshot(step, time, state);
        }
        std::size_t newly = 0;
        if (config.failure) {
            newly = update_failure(nodes, graph, material, state, config.recompute_on_break ? &touched : nullptr);
            report.broken_pairs += newly;
            if (newly > 0 && config.recompute_on_break) {
                for (std::size_t i : touched) recompute_family(*kernels, nodes, graph, i, state.broken, *kernel_options);
                report.recomputed_families += touched.size();
            }
        }
        explicit_step(state, forces, material.density, config.dt, constraints, step, time);
        time += config.dt;
        if (observers.on_step) observers.on_step(step + 1, time, state, newly);
    }
    report.steps = config.steps;
    report.time = time;
    model.evaluate(state, forces);
    if (model.model() == Model::Lbbpd) compute_kinematics(nodes, graph, state);
    model.compute_sed(state);
    if (observers.on_snapshot && config.cadence > 0 && config.steps % config.cadence == 0)
        observers.on_snapshot(config.steps, time, state);
    return report;
}

} // namespace xpd
