#include "xpd/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "xpd/error.hpp"

namespace xpd {

const char* to_string(Scale scale) { return scale == Scale::Desk ? "desk" : "paper"; }

std::optional<Scale> parse_scale(const std::string& text)
{
    if (text == "desk") return Scale::Desk;
    if (text == "paper") return Scale::Paper;
    return std::nullopt;
}

const char* to_string(ProbeKind kind)
{
    switch (kind) {
    case ProbeKind::HoleEdgeArc: return "hole-edge-arc";
    case ProbeKind::Point: return "point";
    case ProbeKind::Line: return "line";
    }
    return "?";
}

const char* to_string(Quantity quantity)
{
    switch (quantity) {
    case Quantity::Displacement: return "u";
    case Quantity::Dilatation: return "theta";
    case Quantity::Sed: return "sed";
    case Quantity::Damage: return "damage";
    }
    return "?";
}

std::optional<Quantity> parse_quantity(const std::string& text)
{
    if (text == "u") return Quantity::Displacement;
    if (text == "theta") return Quantity::Dilatation;
    if (text == "sed") return Quantity::Sed;
    if (text == "damage") return Quantity::Damage;
    return std::nullopt;
}

const char* to_string(SolverType type) { return type == SolverType::Adr ? "adr" : "dynamic"; }

int geometry_dimension(const GeometrySource& geometry)
{
    if (const auto* g = std::get_if<GridGeometry>(&geometry)) return g->dimension;
    if (const auto* h = std::get_if<HoleGeometry>(&geometry)) return h->dimension;
    return 0; // node files: known after loading
}

namespace {

// ---------------------------------------------------------------- formatting

std::string fmt(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string fmt_vec(const Vec3& v, int dim)
{
    std::string out = fmt(v.x) + " " + fmt(v.y);
    if (dim == 3) out += " " + fmt(v.z);
    return out;
}

const char* component_name(int c) { return c == 0 ? "x" : c == 1 ? "y" : "z"; }

// ------------------------------------------------------------------- parsing

struct Entry {
    std::string key;
    std::string value;
    std::size_t line = 0;
    bool used = false;
};

struct Section {
    std::string type;
    std::string name;
    std::size_t line = 0;
    std::vector<Entry> entries;
};

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s)
{
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string tok; in >> tok;) out.push_back(tok);
    return out;
}

bool named_section(const std::string& type) { return type == "bc" || type == "crack" || type == "probe"; }

std::vector<Section> tokenize(const std::string& text)
{
    std::vector<Section> sections;
    std::istringstream in(text);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ParseError(line, "unterminated section header");
            const auto parts = split_ws(s.substr(1, s.size() - 2));
            if (parts.empty() || parts.size() > 2) throw ParseError(line, "section header needs a type and at most one name");
            Section sec{parts[0], parts.size() == 2 ? parts[1] : "", line, {}};
            if (named_section(sec.type) && sec.name.empty())
                throw ParseError(line, "[" + sec.type + "] sections need a name");
            if (!named_section(sec.type) && !sec.name.empty())
                throw ParseError(line, "[" + sec.type + "] sections take no name");
            sections.push_back(std::move(sec));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ParseError(line, "expected 'key = value'");
        if (sections.empty()) throw ParseError(line, "key outside of any section");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (key.empty()) throw ParseError(line, "empty key");
        sections.back().entries.push_back({key, value, line, false});
    }
    return sections;
}

/// Typed accessors over one section; every failure lands in `problems`.
class Reader {
public:
    Reader(Section& section, std::vector<std::string>& problems) : sec_(section), problems_(problems) {}

    Entry* find(const std::string& key)
    {
        Entry* hit = nullptr;
        for (auto& e : sec_.entries) {
            if (e.key != key) continue;
            if (hit) problem(e, "duplicate key '" + key + "'");
            hit = &e;
            e.used = true;
        }
        return hit;
    }

    void real(const std::string& key, double& out)
    {
        if (auto* e = find(key)) {
            if (auto v = to_double(e->value)) out = *v;
            else problem(*e, key + ": expected a number, got '" + e->value + "'");
        }
    }

    void opt_real(const std::string& key, std::optional<double>& out)
    {
        if (auto* e = find(key)) {
            if (e->value == "none") out.reset();
            else if (auto v = to_double(e->value)) out = *v;
            else problem(*e, key + ": expected a number or 'none', got '" + e->value + "'");
        }
    }

    template <typename Int>
    void integer(const std::string& key, Int& out)
    {
        if (auto* e = find(key)) {
            Int v{};
            const auto* end = e->value.data() + e->value.size();
            auto res = std::from_chars(e->value.data(), end, v);
            if (res.ec != std::errc() || res.ptr != end) problem(*e, key + ": expected an integer, got '" + e->value + "'");
            else out = v;
        }
    }

    void boolean(const std::string& key, bool& out)
    {
        if (auto* e = find(key)) {
            if (e->value == "true") out = true;
            else if (e->value == "false") out = false;
            else problem(*e, key + ": expected true or false, got '" + e->value + "'");
        }
    }

    void text(const std::string& key, std::string& out)
    {
        if (auto* e = find(key)) out = e->value;
    }

    void point(const std::string& key, Vec3& out, int dim)
    {
        if (auto* e = find(key)) {
            auto vals = numbers(*e);
            if (!vals) return;
            if (static_cast<int>(vals->size()) != dim) {
                problem(*e, key + ": expected " + std::to_string(dim) + " coordinates");
                return;
            }
            out = {(*vals)[0], (*vals)[1], dim == 3 ? (*vals)[2] : 0.0};
        }
    }

    std::optional<std::vector<double>> numbers(Entry& e)
    {
        std::vector<double> out;
        for (const auto& tok : split_ws(e.value)) {
            auto v = to_double(tok);
            if (!v) {
                problem(e, e.key + ": '" + tok + "' is not a number");
                return std::nullopt;
            }
            out.push_back(*v);
        }
        return out;
    }

    template <typename Enum, typename ParseFn>
    void choice(const std::string& key, Enum& out, ParseFn parse, const char* allowed)
    {
        if (auto* e = find(key)) {
            if (auto v = parse(e->value)) out = *v;
            else problem(*e, key + ": expected one of " + std::string(allowed) + ", got '" + e->value + "'");
        }
    }

    void finish()
    {
        for (const auto& e : sec_.entries)
            if (!e.used) problem(e, "unknown key '" + e.key + "' in " + label());
    }

    void problem(const Entry& e, const std::string& what)
    {
        problems_.push_back("line " + std::to_string(e.line) + ": " + what);
    }

    std::string label() const { return "[" + sec_.type + (sec_.name.empty() ? "" : " " + sec_.name) + "]"; }

    static std::optional<double> to_double(const std::string& s)
    {
        double v = 0.0;
        const auto* end = s.data() + s.size();
        auto res = std::from_chars(s.data(), end, v);
        if (res.ec != std::errc() || res.ptr != end) return std::nullopt;
        return v;
    }

private:
    Section& sec_;
    std::vector<std::string>& problems_;
};

std::optional<int> parse_component(const std::string& s)
{
    if (s == "x") return 0;
    if (s == "y") return 1;
    if (s == "z") return 2;
    return std::nullopt;
}

std::optional<DofConstraint::Kind> parse_bc_kind(const std::string& s)
{
    if (s == "displacement") return DofConstraint::Kind::Displacement;
    if (s == "velocity") return DofConstraint::Kind::Velocity;
    return std::nullopt;
}

std::optional<ProbeKind> parse_probe_kind(const std::string& s)
{
    if (s == "hole-edge-arc") return ProbeKind::HoleEdgeArc;
    if (s == "point") return ProbeKind::Point;
    if (s == "line") return ProbeKind::Line;
    return std::nullopt;
}

std::optional<SolverType> parse_solver_type(const std::string& s)
{
    if (s == "adr") return SolverType::Adr;
    if (s == "dynamic") return SolverType::Dynamic;
    return std::nullopt;
}

std::optional<QuasiStaticOptions::Mass> parse_mass(const std::string& s)
{
    if (s == "envelope") return QuasiStaticOptions::Mass::Envelope;
    if (s == "lbbpd") return QuasiStaticOptions::Mass::Lbbpd;
    return std::nullopt;
}

std::optional<int> parse_dimension(const std::string& s)
{
    if (s == "2") return 2;
    if (s == "3") return 3;
    return std::nullopt;
}

template <typename T>
T& find_or_add(std::vector<T>& items, const std::string& name)
{
    for (auto& item : items)
        if (item.name == name) return item;
    items.push_back({});
    items.back().name = name;
    return items.back();
}

void read_bands(Reader& r, HolePlateSpec& plate)
{
    Entry* e = r.find("bands");
    if (!e) return;
    plate.bands.clear();
    for (const auto& tok : split_ws(e->value)) {
        if (tok == "none") continue;
        HoleBand band;
        char c1 = 0;
        char c2 = 0;
        std::istringstream in(tok);
        if (!(in >> band.outer_radius >> c1 >> band.sector_cells >> c2 >> band.rings) || c1 != ':' || c2 != ':') {
            r.problem(*e, "bands: expected radius:sector_cells:rings, got '" + tok + "'");
            return;
        }
        plate.bands.push_back(band);
    }
}

bool is_geometry(const std::string& type) { return type == "grid" || type == "nodes" || type == "hole-plate"; }

RunConfig apply(std::vector<Section>& sections, const std::filesystem::path& base_dir)
{
    std::vector<std::string> problems;
    RunConfig cfg;

    // [run] first: a preset supplies the defaults everything else overrides.
    std::map<std::string, std::size_t> seen;
    for (auto& sec : sections) {
        const std::string key = sec.type + " " + sec.name;
        if (seen.count(key))
            problems.push_back("line " + std::to_string(sec.line) + ": duplicate section [" + sec.type +
                               (sec.name.empty() ? "" : " " + sec.name) + "]");
        seen[key] = sec.line;
    }
    for (auto& sec : sections) {
        if (sec.type != "run") continue;
        Reader r(sec, problems);
        std::string preset_name;
        Scale scale = Scale::Desk;
        r.text("preset", preset_name);
        r.choice("scale", scale, parse_scale, "desk, paper");
        if (!preset_name.empty()) {
            try {
                cfg = preset(preset_name, scale);
            } catch (const Error& e) {
                problems.push_back("line " + std::to_string(sec.line) + ": " + e.what());
            }
        }
        cfg.scale = scale;
        cfg.preset = preset_name;
        r.text("origin", cfg.preset); // provenance only
        r.text("name", cfg.name);
    }

    std::size_t geometry_sections = 0;
    for (const auto& sec : sections)
        if (is_geometry(sec.type)) ++geometry_sections;
    if (geometry_sections > 1) problems.emplace_back("exactly one geometry source ([grid], [nodes] or [hole-plate]) is allowed");

    for (auto& sec : sections) {
        Reader r(sec, problems);
        const int dim_hint = cfg.dimension() == 3 ? 3 : 2;
        if (sec.type == "run") {
            for (const char* key : {"preset", "scale", "name", "origin"}) r.find(key);
        } else if (sec.type == "grid") {
            GridGeometry g;
            if (auto* old = std::get_if<GridGeometry>(&cfg.geometry)) g = *old;
            r.choice("dimension", g.dimension, parse_dimension, "2, 3");
            r.point("min", g.box.lo, g.dimension);
            r.point("max", g.box.hi, g.dimension);
            r.real("spacing", g.spacing);
            cfg.geometry = g;
        } else if (sec.type == "nodes") {
            NodeFileGeometry n;
            std::string file;
            r.text("file", file);
            if (file.empty()) problems.push_back("line " + std::to_string(sec.line) + ": [nodes] needs file");
            n.path = file;
            if (!file.empty() && n.path.is_relative() && !base_dir.empty()) n.path = base_dir / n.path;
            cfg.geometry = n;
        } else if (sec.type == "hole-plate") {
            HoleGeometry h;
            if (auto* old = std::get_if<HoleGeometry>(&cfg.geometry)) h = *old;
            r.choice("dimension", h.dimension, parse_dimension, "2, 3");
            r.real("width", h.plate.width);
            r.real("height", h.plate.height);
            r.real("hole_radius", h.plate.hole_radius);
            r.integer("sector_cells", h.plate.sector_cells);
            r.integer("rings", h.plate.rings);
            r.real("strip_width", h.plate.strip_width);
            r.real("first_ring", h.plate.first_ring);
            read_bands(r, h.plate);
            r.real("depth", h.depth);
            r.integer("layers", h.layers);
            cfg.geometry = h;
        } else if (sec.type == "discretization") {
            r.real("thickness", cfg.thickness);
            r.real("m_factor", cfg.m_factor);
            r.text("weight", cfg.weight);
        } else if (sec.type == "material") {
            auto& m = cfg.material;
            r.real("youngs_modulus", m.youngs_modulus);
            r.real("poisson_ratio", m.poisson_ratio);
            r.real("density", m.density);
            r.real("fracture_energy", m.fracture_energy);
            r.choice("regime", m.regime, parse_regime, "3d, plane-stress, plane-strain");
            r.opt_real("critical_stretch", m.critical_stretch);
        } else if (sec.type == "model") {
            r.choice("type", cfg.model, parse_model, "xosbpd, osbpd, lbbpd");
        } else if (sec.type == "solver") {
            auto& s = cfg.solver;
            r.choice("type", s.type, parse_solver_type, "adr, dynamic");
            r.real("tolerance", s.adr.tolerance);
            r.integer("max_iterations", s.adr.max_iterations);
            r.real("safety_factor", s.adr.safety_factor);
            r.choice("mass", s.adr.mass, parse_mass, "envelope, lbbpd");
            r.real("pseudo_dt", s.adr.dt);
            r.real("dt", s.dt);
            r.integer("steps", s.steps);
            r.boolean("failure", s.failure);
            r.boolean("recompute_on_break", s.recompute_on_break);
        } else if (sec.type == "output") {
            std::string dir = cfg.output.directory.string();
            r.text("directory", dir);
            cfg.output.directory = dir;
            r.integer("cadence", cfg.output.cadence);
            r.boolean("snapshots", cfg.output.snapshots);
        } else if (sec.type == "bc") {
            auto& bc = find_or_add(cfg.boundary_conditions, sec.name);
            r.point("min", bc.region.lo, dim_hint);
            r.point("max", bc.region.hi, dim_hint);
            r.choice("component", bc.component, parse_component, "x, y, z");
            r.choice("kind", bc.kind, parse_bc_kind, "displacement, velocity");
            r.real("value", bc.value);
            r.real("duration", bc.duration);
        } else if (sec.type == "crack") {
            auto& crack = find_or_add(cfg.cracks, sec.name);
            if (Entry* e = r.find("vertices")) {
                if (auto vals = r.numbers(*e)) {
                    if (vals->size() % static_cast<std::size_t>(dim_hint) != 0) {
                        r.problem(*e, "vertices: coordinate count is not a multiple of the dimension");
                    } else {
                        crack.vertices.clear();
                        for (std::size_t k = 0; k < vals->size(); k += static_cast<std::size_t>(dim_hint))
                            crack.vertices.push_back({(*vals)[k], (*vals)[k + 1], dim_hint == 3 ? (*vals)[k + 2] : 0.0});
                    }
                }
            }
        } else if (sec.type == "probe") {
            auto& p = find_or_add(cfg.probes, sec.name);
            r.choice("kind", p.kind, parse_probe_kind, "hole-edge-arc, point, line");
            r.point("center", p.center, dim_hint);
            r.real("radius", p.radius);
            r.point("point", p.point, dim_hint);
            r.point("from", p.from, dim_hint);
            r.point("to", p.to, dim_hint);
            r.integer("samples", p.samples);
            if (Entry* e = r.find("quantities")) {
                p.quantities.clear();
                for (const auto& tok : split_ws(e->value)) {
                    if (auto q = parse_quantity(tok)) p.quantities.push_back(*q);
                    else r.problem(*e, "quantities: unknown quantity '" + tok + "' (u, theta, sed, damage)");
                }
            }
        } else {
            problems.push_back("line " + std::to_string(sec.line) + ": unknown section [" + sec.type + "]");
            continue;
        }
        r.finish();
    }

    auto semantic = validation_problems(cfg);
    problems.insert(problems.end(), semantic.begin(), semantic.end());
    if (!problems.empty()) throw ValidationError(std::move(problems));
    return cfg;
}

Vec3 box_lo_of(const RunConfig& cfg, bool& known, Vec3& hi)
{
    known = true;
    if (const auto* g = std::get_if<GridGeometry>(&cfg.geometry)) {
        hi = g->box.hi;
        return g->box.lo;
    }
    if (const auto* h = std::get_if<HoleGeometry>(&cfg.geometry)) {
        const double dz = h->dimension == 3 ? 0.5 * h->depth : 0.0;
        hi = {0.5 * h->plate.width, 0.5 * h->plate.height, dz};
        return {-0.5 * h->plate.width, -0.5 * h->plate.height, -dz};
    }
    known = false;
    return {};
}

bool inside(const Vec3& p, const Vec3& lo, const Vec3& hi, int dim)
{
    for (int c = 0; c < dim; ++c)
        if (p[c] < lo[c] || p[c] > hi[c]) return false;
    return true;
}

} // namespace

std::vector<std::string> validation_problems(const RunConfig& cfg)
{
    std::vector<std::string> out;
    const int dim = cfg.dimension();

    if (const auto* g = std::get_if<GridGeometry>(&cfg.geometry)) {
        if (!(g->spacing > 0.0)) out.emplace_back("grid: spacing must be > 0");
        for (int c = 0; c < g->dimension; ++c)
            if (!(g->box.hi[c] > g->box.lo[c])) out.emplace_back(std::string("grid: max must exceed min along ") + component_name(c));
    } else if (const auto* h = std::get_if<HoleGeometry>(&cfg.geometry)) {
        if (h->dimension == 3 && !(h->depth > 0.0 && h->layers > 0))
            out.emplace_back("hole-plate: 3-D needs depth > 0 and layers > 0");
        if (h->plate.sector_cells < 1 || h->plate.rings < 1) out.emplace_back("hole-plate: sector_cells and rings must be >= 1");
        if (!(h->plate.hole_radius > 0.0) ||
            h->plate.hole_radius >= 0.5 * std::min(h->plate.width - 2.0 * h->plate.strip_width, h->plate.height))
            out.emplace_back("hole-plate: hole_radius must be positive and fit inside the plate");
    } else if (const auto* n = std::get_if<NodeFileGeometry>(&cfg.geometry)) {
        if (n->path.empty()) out.emplace_back("nodes: file is required");
    }

    if (!(cfg.m_factor > 0.0)) out.emplace_back("discretization: m_factor must be > 0");
    if (!(cfg.thickness > 0.0)) out.emplace_back("discretization: thickness must be > 0");
    if (cfg.weight != "constant" && cfg.weight != "inverse-distance")
        out.push_back("discretization: weight must be constant or inverse-distance, got '" + cfg.weight + "'");

    try {
        cfg.material.validate();
    } catch (const ValidationError& e) {
        for (const auto& p : e.problems()) out.push_back("material: " + p);
    }
    if (dim == 3 && cfg.material.regime != Regime::ThreeD) out.emplace_back("material: 3-D geometry needs regime = 3d");
    if (dim == 2 && cfg.material.regime == Regime::ThreeD)
        out.emplace_back("material: 2-D geometry needs regime = plane-stress or plane-strain");

    const auto& s = cfg.solver;
    if (s.type == SolverType::Adr) {
        if (!(s.adr.tolerance > 0.0)) out.emplace_back("solver: tolerance must be > 0");
        if (s.adr.max_iterations == 0) out.emplace_back("solver: max_iterations must be > 0");
        if (!(s.adr.safety_factor >= 1.0)) out.emplace_back("solver: safety_factor must be >= 1");
        if (!(s.adr.dt > 0.0)) out.emplace_back("solver: pseudo_dt must be > 0");
    } else {
        if (!(s.dt > 0.0)) out.emplace_back("solver: dynamic runs need dt > 0");
        if (s.steps == 0) out.emplace_back("solver: dynamic runs need steps > 0");
        if (s.failure && !cfg.material.critical_stretch &&
            !(cfg.material.regime == Regime::PlaneStrain && cfg.material.fracture_energy > 0.0))
            out.emplace_back("solver: failure needs material.critical_stretch, or plane strain with fracture_energy > 0");
    }

    Vec3 hi;
    bool known = false;
    const Vec3 lo = box_lo_of(cfg, known, hi);
    const int d = dim == 0 ? 3 : dim;
    const double slack = known ? 1e-9 * std::max(1.0, norm(hi - lo)) : 0.0;
    const Vec3 lo_s = lo - Vec3{slack, slack, slack};
    const Vec3 hi_s = hi + Vec3{slack, slack, slack};

    for (const auto& bc : cfg.boundary_conditions) {
        if (dim != 0 && bc.component >= dim) out.push_back("bc " + bc.name + ": component beyond the problem dimension");
        for (int c = 0; c < d; ++c)
            if (bc.region.hi[c] < bc.region.lo[c]) out.push_back("bc " + bc.name + ": max below min");
        if (!std::isfinite(bc.value)) out.push_back("bc " + bc.name + ": value must be finite");
        if (!(bc.duration > 0.0)) out.push_back("bc " + bc.name + ": duration must be > 0");
        if (bc.kind == DofConstraint::Kind::Velocity && s.type == SolverType::Adr)
            out.push_back("bc " + bc.name + ": velocity conditions need the dynamic solver");
    }
    for (const auto& crack : cfg.cracks) {
        const std::size_t need = dim == 3 ? 3 : 2;
        if (dim == 2 && crack.vertices.size() != 2) out.push_back("crack " + crack.name + ": 2-D cracks need exactly 2 vertices");
        else if (crack.vertices.size() < need) out.push_back("crack " + crack.name + ": too few vertices");
    }
    for (const auto& p : cfg.probes) {
        if (p.quantities.empty()) out.push_back("probe " + p.name + ": no quantities");
        if (p.kind == ProbeKind::HoleEdgeArc) {
            if (!(p.radius > 0.0)) out.push_back("probe " + p.name + ": radius must be > 0");
            if (p.samples < 1) out.push_back("probe " + p.name + ": samples must be >= 1");
            if (known) {
                const Vec3 r{p.radius, p.radius, 0.0};
                if (!inside(p.center - r, lo_s, hi_s, d) || !inside(p.center + r, lo_s, hi_s, d))
                    out.push_back("probe " + p.name + ": arc leaves the domain");
            }
        } else if (p.kind == ProbeKind::Point) {
            if (known && !inside(p.point, lo_s, hi_s, d)) out.push_back("probe " + p.name + ": point outside the domain");
        } else {
            if (p.samples < 2) out.push_back("probe " + p.name + ": line probes need samples >= 2");
            if (known && (!inside(p.from, lo_s, hi_s, d) || !inside(p.to, lo_s, hi_s, d)))
                out.push_back("probe " + p.name + ": line leaves the domain");
        }
    }
    if (s.failure && s.type == SolverType::Adr) {
        // Warned, not rejected: ADR simply ignores bond failure.
    }
    return out;
}

void validate(const RunConfig& config)
{
    auto problems = validation_problems(config);
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir)
{
    auto sections = tokenize(text);
    return apply(sections, base_dir);
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.parent_path());
}

std::string serialize(const RunConfig& cfg)
{
    std::ostringstream out;
    const int dim = cfg.dimension() == 3 ? 3 : 2;
    out << "[run]\n";
    out << "name = " << cfg.name << "\n";
    if (!cfg.preset.empty()) out << "origin = " << cfg.preset << "\n";
    out << "scale = " << to_string(cfg.scale) << "\n";

    if (const auto* g = std::get_if<GridGeometry>(&cfg.geometry)) {
        out << "\n[grid]\n";
        out << "dimension = " << g->dimension << "\n";
        out << "min = " << fmt_vec(g->box.lo, g->dimension) << "\n";
        out << "max = " << fmt_vec(g->box.hi, g->dimension) << "\n";
        out << "spacing = " << fmt(g->spacing) << "\n";
    } else if (const auto* n = std::get_if<NodeFileGeometry>(&cfg.geometry)) {
        out << "\n[nodes]\n";
        out << "file = " << n->path.string() << "\n";
    } else if (const auto* h = std::get_if<HoleGeometry>(&cfg.geometry)) {
        out << "\n[hole-plate]\n";
        out << "dimension = " << h->dimension << "\n";
        out << "width = " << fmt(h->plate.width) << "\n";
        out << "height = " << fmt(h->plate.height) << "\n";
        out << "hole_radius = " << fmt(h->plate.hole_radius) << "\n";
        out << "sector_cells = " << h->plate.sector_cells << "\n";
        out << "rings = " << h->plate.rings << "\n";
        out << "strip_width = " << fmt(h->plate.strip_width) << "\n";
        out << "first_ring = " << fmt(h->plate.first_ring) << "\n";
        out << "bands =";
        if (h->plate.bands.empty()) out << " none";
        for (const auto& b : h->plate.bands) out << " " << fmt(b.outer_radius) << ":" << b.sector_cells << ":" << b.rings;
        out << "\n";
        out << "depth = " << fmt(h->depth) << "\n";
        out << "layers = " << h->layers << "\n";
    }

    out << "\n[discretization]\n";
    out << "thickness = " << fmt(cfg.thickness) << "\n";
    out << "m_factor = " << fmt(cfg.m_factor) << "\n";
    out << "weight = " << cfg.weight << "\n";

    const auto& m = cfg.material;
    out << "\n[material]\n";
    out << "youngs_modulus = " << fmt(m.youngs_modulus) << "\n";
    out << "poisson_ratio = " << fmt(m.poisson_ratio) << "\n";
    out << "density = " << fmt(m.density) << "\n";
    out << "fracture_energy = " << fmt(m.fracture_energy) << "\n";
    out << "regime = " << to_string(m.regime) << "\n";
    out << "critical_stretch = " << (m.critical_stretch ? fmt(*m.critical_stretch) : std::string("none")) << "\n";

    out << "\n[model]\n";
    out << "type = " << to_string(cfg.model) << "\n";

    const auto& s = cfg.solver;
    out << "\n[solver]\n";
    out << "type = " << to_string(s.type) << "\n";
    out << "tolerance = " << fmt(s.adr.tolerance) << "\n";
    out << "max_iterations = " << s.adr.max_iterations << "\n";
    out << "safety_factor = " << fmt(s.adr.safety_factor) << "\n";
    out << "mass = " << (s.adr.mass == QuasiStaticOptions::Mass::Envelope ? "envelope" : "lbbpd") << "\n";
    out << "pseudo_dt = " << fmt(s.adr.dt) << "\n";
    out << "dt = " << fmt(s.dt) << "\n";
    out << "steps = " << s.steps << "\n";
    out << "failure = " << (s.failure ? "true" : "false") << "\n";
    out << "recompute_on_break = " << (s.recompute_on_break ? "true" : "false") << "\n";

    out << "\n[output]\n";
    out << "directory = " << cfg.output.directory.string() << "\n";
    out << "cadence = " << cfg.output.cadence << "\n";
    out << "snapshots = " << (cfg.output.snapshots ? "true" : "false") << "\n";

    for (const auto& bc : cfg.boundary_conditions) {
        out << "\n[bc " << bc.name << "]\n";
        out << "min = " << fmt_vec(bc.region.lo, dim) << "\n";
        out << "max = " << fmt_vec(bc.region.hi, dim) << "\n";
        out << "component = " << component_name(bc.component) << "\n";
        out << "kind = " << (bc.kind == DofConstraint::Kind::Displacement ? "displacement" : "velocity") << "\n";
        out << "value = " << fmt(bc.value) << "\n";
        out << "duration = " << fmt(bc.duration) << "\n";
    }
    for (const auto& crack : cfg.cracks) {
        out << "\n[crack " << crack.name << "]\n";
        out << "vertices =";
        for (const auto& v : crack.vertices) out << " " << fmt_vec(v, dim);
        out << "\n";
    }
    for (const auto& p : cfg.probes) {
        out << "\n[probe " << p.name << "]\n";
        out << "kind = " << to_string(p.kind) << "\n";
        switch (p.kind) {
        case ProbeKind::HoleEdgeArc:
            out << "center = " << fmt_vec(p.center, dim) << "\n";
            out << "radius = " << fmt(p.radius) << "\n";
            out << "samples = " << p.samples << "\n";
            break;
        case ProbeKind::Point:
            out << "point = " << fmt_vec(p.point, dim) << "\n";
            break;
        case ProbeKind::Line:
            out << "from = " << fmt_vec(p.from, dim) << "\n";
            out << "to = " << fmt_vec(p.to, dim) << "\n";
            out << "samples = " << p.samples << "\n";
            break;
        }
        out << "quantities =";
        for (auto q : p.quantities) out << " " << to_string(q);
        out << "\n";
    }
    return out.str();
}

} // namespace xpd

namespace xpd {

namespace {

constexpr double kPlateStrain = 5e-4;

HolePlateSpec plate_spec(int sector_cells, int rings, double strip)
{
    HolePlateSpec p;
    p.width = 1.0;
    p.height = 1.0;
    p.hole_radius = 0.1;
    p.sector_cells = sector_cells;
    p.rings = rings;
    p.strip_width = strip;
    return p;
}

/// Opposite grips pulled apart along x; one strip node per side pinned in y
/// (and z) on the symmetry planes.
void add_grips(RunConfig& cfg, const HolePlateSpec& p, double half_depth)
{
    const double a = 0.5 * p.width - p.strip_width;
    const double w = 0.5 * p.width;
    const double b = 0.5 * p.height;
    const double eps = 1e-9;
    auto bc = [&](std::string name, Vec3 lo, Vec3 hi, int comp, double value) {
        BoundaryCondition c;
        c.name = std::move(name);
        c.region = {lo, hi};
        c.component = comp;
        c.value = value;
        cfg.boundary_conditions.push_back(c);
    };
    bc("grip-left", {-w, -b, -half_depth}, {-a, b, half_depth}, 0, -kPlateStrain);
    bc("grip-right", {a, -b, -half_depth}, {w, b, half_depth}, 0, kPlateStrain);
    bc("pin-left-y", {-w, -eps, -half_depth}, {-a, eps, half_depth}, 1, 0.0);
    bc("pin-right-y", {a, -eps, -half_depth}, {w, eps, half_depth}, 1, 0.0);
    if (half_depth > 0.0) {
        bc("pin-left-z", {-w, -b, -eps}, {-a, b, eps}, 2, 0.0);
        bc("pin-right-z", {a, -b, -eps}, {w, b, eps}, 2, 0.0);
    }
}

ProbeDefinition hole_probe(int samples)
{
    ProbeDefinition probe;
    probe.name = "hole-edge";
    probe.kind = ProbeKind::HoleEdgeArc;
    probe.radius = 0.1;
    probe.samples = samples;
    probe.quantities = {Quantity::Displacement, Quantity::Dilatation};
    return probe;
}

RunConfig plate2d(Scale scale)
{
    RunConfig cfg;
    cfg.name = "plate2d";
    cfg.preset = "plate2d";
    cfg.scale = scale;
    HoleGeometry g;
    g.dimension = 2;
    g.plate = scale == Scale::Desk ? plate_spec(39, 19, 0.04) : plate_spec(60, 32, 0.04);
    cfg.geometry = g;
    cfg.material.youngs_modulus = 70e9;
    cfg.material.poisson_ratio = 0.33;
    cfg.material.density = 2700.0;
    cfg.material.regime = Regime::PlaneStress;
    cfg.solver.type = SolverType::Adr;
    cfg.solver.failure = false;
    cfg.output.directory = "out/plate2d";
    add_grips(cfg, g.plate, 0.0);
    // One sample per first-ring node.
    cfg.probes.push_back(hole_probe(4 * g.plate.sector_cells));
    return cfg;
}

RunConfig block3d(Scale scale)
{
    RunConfig cfg;
    cfg.name = "block3d";
    cfg.preset = "block3d";
    cfg.scale = scale;
    HoleGeometry g;
    g.dimension = 3;
    g.depth = 0.3;
    if (scale == Scale::Desk) {
        g.plate = plate_spec(17, 13, 0.04);
        g.layers = 11;
    } else {
        g.plate = plate_spec(46, 34, 0.04);
        g.layers = 27;
    }
    cfg.geometry = g;
    cfg.material.youngs_modulus = 70e9;
    cfg.material.poisson_ratio = 0.33;
    cfg.material.density = 2700.0;
    cfg.material.regime = Regime::ThreeD;
    cfg.solver.type = SolverType::Adr;
    cfg.solver.failure = false;
    cfg.output.directory = "out/block3d";
    add_grips(cfg, g.plate, 0.5 * g.depth);
    cfg.probes.push_back(hole_probe(4 * g.plate.sector_cells));
    return cfg;
}

RunConfig kalthoff(Scale scale)
{
    const bool desk = scale == Scale::Desk;
    const double h = desk ? 2.5e-3 : 1.25e-3;
    RunConfig cfg;
    cfg.name = "kalthoff";
    cfg.preset = "kalthoff";
    cfg.scale = scale;
    GridGeometry g;
    g.dimension = 2;
    g.box = {{0.0, 0.0, 0.0}, {0.1, 0.2, 0.0}};
    g.spacing = h;
    cfg.geometry = g;
    cfg.material.youngs_modulus = 190e9;
    cfg.material.poisson_ratio = 0.25;
    cfg.material.density = 8000.0;
    // 222,170 leaves every bond intact within the run window.
    cfg.material.fracture_energy = 22170.0;
    cfg.material.regime = Regime::PlaneStrain;
    cfg.solver.type = SolverType::Dynamic;
    cfg.solver.dt = desk ? 160e-9 : 80e-9;
    cfg.solver.steps = desk ? 750 : 1500;
    cfg.solver.failure = true;
    cfg.output.directory = "out/kalthoff";
    cfg.output.cadence = desk ? 150 : 300; // 24 us
    cfg.cracks.push_back({"lower", {{0.0, 0.075, 0.0}, {0.05, 0.075, 0.0}}});
    cfg.cracks.push_back({"upper", {{0.0, 0.125, 0.0}, {0.05, 0.125, 0.0}}});
    BoundaryCondition impact;
    impact.name = "impact";
    impact.region = {{0.0, 0.075, 0.0}, {h, 0.125, 0.0}};
    impact.component = 0;
    impact.kind = DofConstraint::Kind::Velocity;
    impact.value = 16.5;
    cfg.boundary_conditions.push_back(impact);
    ProbeDefinition line;
    line.name = "centerline";
    line.kind = ProbeKind::Line;
    line.from = {0.5 * h, 0.1, 0.0};
    line.to = {0.1 - 0.5 * h, 0.1, 0.0};
    line.samples = desk ? 40 : 80;
    line.quantities = {Quantity::Displacement, Quantity::Damage};
    cfg.probes.push_back(line);
    return cfg;
}

} // namespace

std::vector<std::string> preset_names() { return {"plate2d", "block3d", "kalthoff"}; }

RunConfig preset(const std::string& name, Scale scale)
{
    if (name == "plate2d") return plate2d(scale);
    if (name == "block3d") return block3d(scale);
    if (name == "kalthoff") return kalthoff(scale);
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw Error(ErrorKind::UnknownPreset, "unknown preset '" + name + "' (known: " + known + ")");
}

} // namespace xpd
