#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "xpd/discretization.hpp"
#include "xpd/mechanics.hpp"
#include "xpd/mesh.hpp"
#include "xpd/solver.hpp"

namespace xpd {

enum class Scale { Desk, Paper };

const char* to_string(Scale scale);
std::optional<Scale> parse_scale(const std::string& text);

struct GridGeometry {
    int dimension = 2;
    Box box;
    double spacing = 0.0;
};

struct NodeFileGeometry {
    std::filesystem::path path;
};

struct HoleGeometry {
    int dimension = 2;
    HolePlateSpec plate;
    /// 3-D only: extrusion depth and slab count.
    double depth = 0.0;
    int layers = 0;
};

using GeometrySource = std::variant<GridGeometry, NodeFileGeometry, HoleGeometry>;

int geometry_dimension(const GeometrySource& geometry);

/// Nodes inside an axis-aligned box (inclusive) receive the prescribed value.
struct BoundaryCondition {
    std::string name;
    Box region;
    int component = 0;
    DofConstraint::Kind kind = DofConstraint::Kind::Displacement;
    double value = 0.0;
    double duration = std::numeric_limits<double>::infinity();
};

struct CrackDefinition {
    std::string name;
    std::vector<Vec3> vertices;
};

enum class ProbeKind { HoleEdgeArc, Point, Line };

const char* to_string(ProbeKind kind);

enum class Quantity { Displacement, Dilatation, Sed, Damage };

const char* to_string(Quantity quantity);
std::optional<Quantity> parse_quantity(const std::string& text);

struct ProbeDefinition {
    std::string name;
    ProbeKind kind = ProbeKind::HoleEdgeArc;
    /// Arc: centre, radius and `samples` angles starting at beta = 0.
    Vec3 center;
    double radius = 0.0;
    /// Point: `point`. Line: `samples` points from `from` to `to` inclusive.
    Vec3 point;
    Vec3 from;
    Vec3 to;
    int samples = 1;
    std::vector<Quantity> quantities{Quantity::Displacement};
};

enum class SolverType { Adr, Dynamic };

const char* to_string(SolverType type);

struct SolverSettings {
    SolverType type = SolverType::Adr;
    QuasiStaticOptions adr;
    double dt = 0.0;
    std::size_t steps = 0;
    bool failure = true;
    bool recompute_on_break = false;
};

struct OutputPlan {
    std::filesystem::path directory = "out";
    /// Snapshot every `cadence` steps in dynamic runs; 0 writes only the final state.
    std::size_t cadence = 0;
    bool snapshots = true;
};

struct RunConfig {
    std::string name = "run";
    /// Preset the file started from, kept for provenance only.
    std::string preset;
    Scale scale = Scale::Desk;
    GeometrySource geometry = GridGeometry{};
    double thickness = 1.0;
    double m_factor = kDefaultHorizonFactor;
    std::string weight = "constant";
    MaterialParams material;
    Model model = Model::Xosbpd;
    SolverSettings solver;
    OutputPlan output;
    std::vector<BoundaryCondition> boundary_conditions;
    std::vector<CrackDefinition> cracks;
    std::vector<ProbeDefinition> probes;

    int dimension() const { return geometry_dimension(geometry); }
};

/// Built-in scenarios: plate2d, block3d, kalthoff. Throws Error(UnknownPreset).
RunConfig preset(const std::string& name, Scale scale = Scale::Desk);
std::vector<std::string> preset_names();

/// Parses the sectioned key = value format. Relative node-file paths resolve
/// against `base_dir`. Throws ParseError for malformed lines and
/// ValidationError listing every semantic problem.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(serialize(c)) reproduces c.
std::string serialize(const RunConfig& config);

/// Collects every violated invariant; empty when the config is usable.
std::vector<std::string> validation_problems(const RunConfig& config);
void validate(const RunConfig& config);

} // namespace xpd
