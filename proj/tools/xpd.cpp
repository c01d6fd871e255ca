// Command-line front end: run, kernels, probe, check.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <random>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "xpd/config.hpp"
#include "xpd/error.hpp"
#include "xpd/mesh.hpp"
#include "xpd/output.hpp"
#include "xpd/scenario.hpp"

using namespace xpd;

namespace {

constexpr int kUsage = 2;
constexpr int kCheckFailed = 14;

int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::EmptyDomain: return 3;
    case ErrorKind::Parse: return 4;
    case ErrorKind::InvalidMeasure: return 5;
    case ErrorKind::EmptyFamily: return 6;
    case ErrorKind::SingularSystem: return 7;
    case ErrorKind::DegenerateBond: return 8;
    case ErrorKind::NumericalBlowup: return 9;
    case ErrorKind::NotConverged: return 10;
    case ErrorKind::Validation: return 11;
    case ErrorKind::UnknownPreset: return 12;
    case ErrorKind::Io: return 13;
    }
    return 1;
}

void apply_thread_override()
{
    const char* env = std::getenv("XPD_THREADS");
    if (env == nullptr || *env == '\0') return;
    const int n = std::atoi(env);
    if (n < 1) {
        warn(std::string("ignoring XPD_THREADS=") + env);
        return;
    }
#ifdef _OPENMP
    omp_set_num_threads(n);
#endif
}

struct Source {
    std::string config_path;
    std::string preset_name;
    std::string scale = "desk";
    std::string model;
    std::string out_dir;
};

void add_source_options(CLI::App* cmd, Source& src, bool with_overrides)
{
    cmd->add_option("config", src.config_path, "Run configuration file");
    cmd->add_option("--preset", src.preset_name, "Built-in scenario instead of a config file");
    cmd->add_option("--scale", src.scale, "Preset resolution")->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--model", src.model, "Override the material model")
        ->check(CLI::IsMember({"xosbpd", "osbpd", "lbbpd"}));
    if (with_overrides) cmd->add_option("--out", src.out_dir, "Override the output directory");
}

/// Returns false on a usage problem (already reported).
bool resolve(const Source& src, CLI::App* cmd, RunConfig& cfg)
{
    if (src.config_path.empty() == src.preset_name.empty()) {
        std::cerr << "error: give exactly one of <config> or --preset\n\n" << cmd->help();
        return false;
    }
    if (!src.config_path.empty() && cmd->count("--scale") > 0) {
        std::cerr << "error: --scale applies to --preset only; set [run] scale in the config\n\n" << cmd->help();
        return false;
    }
    cfg = src.preset_name.empty() ? load_config(src.config_path) : preset(src.preset_name, *parse_scale(src.scale));
    if (!src.model.empty()) cfg.model = *parse_model(src.model);
    if (!src.out_dir.empty()) cfg.output.directory = src.out_dir;
    validate(cfg);
    return true;
}

void describe(const Scenario& s)
{
    std::cout << "nodes " << s.nodes.size() << ", bonds " << s.graph.num_bonds() / 2 << " pairs";
    if (s.precracked_pairs) std::cout << ", pre-cracked " << s.precracked_pairs;
    std::cout << ", constraints " << s.constraints.size() << "\n";
    if (s.has_kernels())
        std::cout << "kernels " << to_string(s.config.model) << ": hydro fallback " << s.kernels.count_hydro_fallback()
                  << ", singular " << s.kernels.count_singular() << ", negative omega_d " << s.kernels.negative_omega_d
                  << "\n";
}

int cmd_run(const Source& src, CLI::App* cmd)
{
    RunConfig cfg;
    if (!resolve(src, cmd, cfg)) return kUsage;
    auto s = build_scenario(cfg);
    std::cout << "run " << cfg.name << " (" << to_string(cfg.scale) << ", " << to_string(cfg.model) << ")\n";
    describe(s);
    const auto out = run_scenario(s);
    if (out.quasi_static)
        std::cout << "adr converged in " << out.adr.iterations << " iterations, residual " << out.adr.residual << "\n";
    else
        std::cout << "dynamic " << out.dynamic.steps << " steps to t = " << out.dynamic.time << " s, broken pairs "
                  << out.dynamic.broken_pairs << "\n";
    for (const auto& p : out.snapshots) std::cout << "wrote " << p.string() << "\n";
    for (const auto& p : out.probes) std::cout << "wrote " << p.string() << "\n";
    std::cout << "elapsed " << out.seconds << " s\n";
    return 0;
}

int cmd_kernels(const Source& src, CLI::App* cmd)
{
    RunConfig cfg;
    if (!resolve(src, cmd, cfg)) return kUsage;
    if (cfg.model == Model::Lbbpd) cfg.model = Model::Xosbpd;
    auto s = build_scenario(cfg);
    describe(s);
    double worst = 0.0;
    std::size_t worst_node = 0;
    std::size_t clean = 0;
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
        if (s.kernels.singular_fallback[i]) continue;
        const double r = family_residuals(s.kernels, s.nodes, s.graph, i, s.graph.broken).max_abs();
        if (r <= 1e-9) ++clean;
        if (r > worst) {
            worst = r;
            worst_node = i;
        }
    }
    const std::size_t solved = s.nodes.size() - s.kernels.count_singular();
    std::cout << "constraint residuals: " << clean << " of " << solved << " solved families at or below 1e-9\n";
    std::cout << "largest residual " << worst << " at node " << worst_node << "\n";
    return 0;
}

int cmd_probe(const Source& src, const std::string& state_file, CLI::App* cmd)
{
    RunConfig cfg;
    if (!resolve(src, cmd, cfg)) return kUsage;
    const NodeSet nodes = build_nodes(cfg);
    const auto snap = read_snapshot(state_file);
    if (snap.points.size() != nodes.size())
        throw ValidationError({"state file has " + std::to_string(snap.points.size()) + " nodes, the config " +
                               std::to_string(nodes.size())});
    MechState state;
    const std::size_t n = nodes.size();
    state.displacement = snap.displacement.empty() ? std::vector<Vec3>(n) : snap.displacement;
    state.damage = snap.damage.empty() ? std::vector<double>(n, 0.0) : snap.damage;
    state.dilatation = snap.dilatation.empty() ? std::vector<double>(n, 0.0) : snap.dilatation;
    state.sed = snap.sed.empty() ? std::vector<double>(n, 0.0) : snap.sed;
    const ProbeMeta meta{cfg.name, to_string(cfg.model), 0, 0.0};
    for (const auto& probe : cfg.probes) {
        const auto path = cfg.output.directory / (cfg.name + "_" + probe.name + ".csv");
        write_probe(path, probe, nodes, state, meta);
        std::cout << "wrote " << path.string() << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------- check

struct Checker {
    int failed = 0;
    void report(const std::string& name, bool ok, const std::string& detail)
    {
        std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
        if (!ok) ++failed;
    }
};

std::string num(double v)
{
    std::ostringstream s;
    s.precision(3);
    s << v;
    return s.str();
}

void check_corners(Checker& c)
{
    const NodeSet nodes = generate_uniform_grid({{0, 0, 0}, {1, 0.6, 0}}, 0.05, 2);
    const FamilyGraph graph = build_families(nodes);
    const KernelData k = compute_kernels(nodes, graph, {});
    double worst = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        worst = std::max(worst, family_residuals(k, nodes, graph, i, graph.broken).max_abs());
    c.report("kernel constraints", worst <= 1e-9, "max residual " + num(worst));
    c.report("corner fallback", k.count_hydro_fallback() == 4,
             std::to_string(k.count_hydro_fallback()) + " flagged families on a rectangle");
}

void check_collinear(Checker& c)
{
    Family fam;
    fam.dimension = 2;
    fam.horizon = 3.0;
    for (double x : {-3.0, -2.0, -1.0, 1.0, 2.0, 3.0}) fam.add({x, 0, 0}, 1.0);
    bool singular = false;
    try {
        solve_hydro_multipliers(fam, WeightFunction::constant());
    } catch (const SingularSystem&) {
        singular = true;
    }
    c.report("collinear family", singular, singular ? "SingularSystem raised" : "no error raised");
}

void check_affine_and_momentum(Checker& c)
{
    const auto xf = symmetric_graded_faces(0.0, 1.0, 14, 1.15);
    const auto yf = symmetric_graded_faces(0.0, 0.5, 10, 1.15);
    const NodeSet nodes = generate_rectilinear_grid(xf, yf, {}, 2);
    const FamilyGraph graph = build_families(nodes);
    const KernelData k = compute_kernels(nodes, graph, {});
    MaterialParams mat;
    mat.youngs_modulus = 70e9;
    mat.poisson_ratio = 0.33;
    mat.regime = Regime::PlaneStress;

    auto st = make_state(nodes, graph);
    const double exx = 1e-6;
    const double eyy = -4e-7;
    const double exy = 3e-7;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Vec3& x = nodes.positions[i];
        st.displacement[i] = {exx * x.x + exy * x.y, exy * x.x + eyy * x.y, 0.0};
    }
    compute_kinematics(nodes, graph, st);
    compute_dilatation(nodes, graph, k, st);
    double worst = 0.0;
    for (double th : st.dilatation) worst = std::max(worst, std::abs(th - (exx + eyy)) / std::abs(exx + eyy));
    c.report("affine dilatation", worst <= 1e-3, "max relative error " + num(worst));

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1e-5, 1e-5);
    for (auto& d : st.displacement) d = {u(rng), u(rng), 0.0};
    const ForceModel model(nodes, graph, &k, mat, Model::Xosbpd);
    ForceField f;
    model.evaluate(st, f);
    Vec3 total;
    double scale = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Vec3 fi = f.internal_force[i] * nodes.cell_measure[i];
        total += fi;
        scale = std::max(scale, norm(fi));
    }
    const double rel = scale > 0.0 ? norm(total) / scale : 0.0;
    c.report("linear momentum", rel <= 1e-10, "relative net force " + num(rel));
}

void check_presets(Checker& c)
{
    for (const auto& name : preset_names())
        for (Scale scale : {Scale::Desk, Scale::Paper}) {
            const auto cfg = preset(name, scale);
            const auto text = serialize(cfg);
            const bool ok = serialize(parse_config(text)) == text;
            c.report("config round-trip " + name + "/" + to_string(scale), ok, ok ? "stable" : "text changed");
        }
}

int cmd_check()
{
    Checker c;
    check_corners(c);
    check_collinear(c);
    check_affine_and_momentum(c);
    check_presets(c);
    return c.failed == 0 ? 0 : kCheckFailed;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Peridynamic solver with corrected state-based kernels"};
    app.require_subcommand(1);

    Source run_src;
    auto* run = app.add_subcommand("run", "Solve a scenario and write snapshots and probes");
    add_source_options(run, run_src, true);

    Source kern_src;
    auto* kernels = app.add_subcommand("kernels", "Compute kernels and report constraint residuals");
    add_source_options(kernels, kern_src, false);

    Source probe_src;
    std::string state_file;
    auto* probe = app.add_subcommand("probe", "Re-sample the config's probes from a snapshot");
    add_source_options(probe, probe_src, true);
    probe->add_option("--state", state_file, "Snapshot written by run")->required();

    auto* check = app.add_subcommand("check", "Run the invariant suite on small built-in cases");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    apply_thread_override();
    try {
        if (*run) return cmd_run(run_src, run);
        if (*kernels) return cmd_kernels(kern_src, kernels);
        if (*probe) return cmd_probe(probe_src, state_file, probe);
        if (*check) return cmd_check();
    } catch (const ValidationError& e) {
        std::cerr << "error [validation]:\n";
        for (const auto& p : e.problems()) std::cerr << "  " << p << "\n";
        return exit_code(e.kind());
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kUsage;
}
