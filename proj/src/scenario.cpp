#include "xpd/scenario.hpp"

#include <chrono>
#include <cstring>

#include "xpd/error.hpp"
#include "xpd/mesh.hpp"
#include "xpd/output.hpp"

namespace xpd {

namespace {

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
    void value(const T& v) { bytes(&v, sizeof v); }
    template <class T>
    void vec(const std::vector<T>& v)
    {
        value(v.size());
        if (!v.empty()) bytes(v.data(), v.size() * sizeof(T));
    }
    void text(const std::string& s)
    {
        value(s.size());
        bytes(s.data(), s.size());
    }
};

bool in_region(const Vec3& p, const Box& box, int dim)
{
    for (int c = 0; c < dim; ++c)
        if (p[c] < box.lo[c] || p[c] > box.hi[c]) return false;
    return true;
}

} // namespace

NodeSet build_nodes(const RunConfig& config)
{
    if (const auto* g = std::get_if<GridGeometry>(&config.geometry))
        return generate_uniform_grid(g->box, g->spacing, g->dimension, config.thickness, config.m_factor);
    if (const auto* h = std::get_if<HoleGeometry>(&config.geometry)) {
        if (h->dimension == 3) return generate_hole_block(h->plate, h->depth, h->layers, config.m_factor);
        return generate_hole_plate(h->plate, config.thickness, config.m_factor);
    }
    const auto& file = std::get<NodeFileGeometry>(config.geometry);
    return load_nodes(file.path, NodeFileFormat::Csv, config.m_factor, config.thickness);
}

WeightFunction weight_function(const std::string& name)
{
    if (name == "constant") return WeightFunction::constant();
    if (name == "inverse-distance") return WeightFunction::inverse_distance();
    throw ValidationError({"unknown weight function '" + name + "'"});
}

Constraints build_constraints(const RunConfig& config, const NodeSet& nodes)
{
    Constraints out;
    for (const auto& bc : config.boundary_conditions) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (!in_region(nodes.positions[i], bc.region, nodes.dimension)) continue;
            out.push_back({i, bc.component, bc.kind, bc.value, bc.duration});
            ++hits;
        }
        if (hits == 0) warn("boundary condition " + bc.name + " selects no nodes");
    }
    return out;
}

Scenario build_scenario(const RunConfig& config)
{
    validate(config);
    Scenario s;
    s.config = config;
    s.nodes = build_nodes(config);
    if (config.dimension() == 0) {
        // Node files reveal their dimension only now.
        RunConfig probe = config;
        probe.geometry = GridGeometry{s.nodes.dimension, {}, 1.0};
        auto problems = validation_problems(probe);
        std::erase_if(problems, [](const std::string& p) { return p.rfind("grid:", 0) == 0 || p.find("leaves the domain") != std::string::npos; });
        if (!problems.empty()) throw ValidationError(std::move(problems));
    }
    s.graph = build_families(s.nodes);
    if (!config.cracks.empty()) {
        std::vector<CrackSegment> cracks;
        for (const auto& c : config.cracks) cracks.push_back({c.vertices});
        s.precracked_pairs = apply_precracks(s.graph, s.nodes, cracks);
    }
    s.constraints = build_constraints(config, s.nodes);
    s.kernel_options.weight = weight_function(config.weight);
    s.kernel_options.model = config.model == Model::Osbpd ? KernelModel::Spherical : KernelModel::Corrected;
    if (s.has_kernels()) s.kernels = compute_kernels(s.nodes, s.graph, s.kernel_options);
    return s;
}

std::uint64_t pipeline_hash(const Scenario& s)
{
    Fnv1a h;
    h.value(s.nodes.dimension);
    h.value(s.nodes.thickness);
    h.vec(s.nodes.positions);
    h.vec(s.nodes.cell_measure);
    h.vec(s.nodes.horizon);
    h.vec(s.graph.offsets);
    h.vec(s.graph.neighbors);
    h.vec(s.graph.xi);
    h.vec(s.graph.length);
    h.vec(s.graph.broken);
    for (const auto& c : s.constraints) {
        h.value(c.node);
        h.value(c.component);
        h.value(c.kind);
        h.value(c.value);
        h.value(c.duration);
    }
    const auto& m = s.config.material;
    h.value(m.youngs_modulus);
    h.value(m.poisson_ratio);
    h.value(m.density);
    h.value(m.fracture_energy);
    h.value(m.regime);
    h.value(m.critical_stretch.value_or(-1.0));
    const auto& sv = s.config.solver;
    h.value(sv.type);
    h.value(sv.adr.tolerance);
    h.value(sv.adr.max_iterations);
    h.value(sv.adr.dt);
    h.value(sv.adr.safety_factor);
    h.value(sv.adr.mass);
    h.value(sv.dt);
    h.value(sv.steps);
    h.value(sv.failure);
    h.value(sv.recompute_on_break);
    h.text(s.kernel_options.weight.name);
    return h.h;
}

RunOutputs run_scenario(Scenario& s, const RunHooks& hooks)
{
    const auto start = std::chrono::steady_clock::now();
    const RunConfig& cfg = s.config;
    RunOutputs out;
    out.state = make_state(s.nodes, s.graph);
    compute_damage(s.nodes, s.graph, out.state);
    const ForceModel model(s.nodes, s.graph, s.has_kernels() ? &s.kernels : nullptr, cfg.material, cfg.model);
    const bool write = hooks.write_files;
    const auto& dir = cfg.output.directory;

    std::size_t final_step = 0;
    double final_time = 0.0;
    if (cfg.solver.type == SolverType::Adr) {
        if (cfg.solver.failure) warn("bond failure is ignored by the quasi-static solver");
        out.adr = run_quasi_static(model, s.nodes, s.graph, cfg.material, out.state, s.constraints, cfg.solver.adr);
        model.update_kinematics(out.state);
        model.compute_sed(out.state);
        compute_damage(s.nodes, s.graph, out.state);
        final_step = out.adr.iterations;
        if (write && cfg.output.snapshots) {
            out.snapshots.push_back(snapshot_path(dir, cfg.name, final_step));
            write_snapshot(out.snapshots.back(), s.nodes, out.state);
        }
    } else {
        out.quasi_static = false;
        ExplicitConfig ec;
        ec.dt = cfg.solver.dt;
        ec.steps = cfg.solver.steps;
        ec.cadence = cfg.output.cadence;
        ec.failure = cfg.solver.failure;
        ec.recompute_on_break = cfg.solver.recompute_on_break;
        DynamicObservers obs = hooks.dynamic;
        auto user_snapshot = hooks.dynamic.on_snapshot;
        obs.on_snapshot = [&](std::size_t step, double time, const MechState& state) {
            if (write && cfg.output.snapshots) {
                out.snapshots.push_back(snapshot_path(dir, cfg.name, step));
                write_snapshot(out.snapshots.back(), s.nodes, state);
            }
            if (user_snapshot) user_snapshot(step, time, state);
        };
        out.dynamic = run_dynamic(model, s.nodes, s.graph, cfg.material, out.state, s.constraints, ec, obs,
                                  s.has_kernels() ? &s.kernels : nullptr, s.has_kernels() ? &s.kernel_options : nullptr);
        compute_damage(s.nodes, s.graph, out.state);
        final_step = out.dynamic.steps;
        final_time = out.dynamic.time;
        const bool final_written = ec.cadence > 0 && ec.steps % ec.cadence == 0;
        if (write && cfg.output.snapshots && !final_written) {
            out.snapshots.push_back(snapshot_path(dir, cfg.name, final_step));
            write_snapshot(out.snapshots.back(), s.nodes, out.state);
        }
    }

    if (write) {
        const ProbeMeta meta{cfg.name, to_string(cfg.model), final_step, final_time};
        for (const auto& probe : cfg.probes) {
            out.probes.push_back(dir / (cfg.name + "_" + probe.name + ".csv"));
            write_probe(out.probes.back(), probe, s.nodes, out.state, meta);
        }
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

} // namespace xpd
