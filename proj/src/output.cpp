#include "xpd/output.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "xpd/error.hpp"

namespace xpd {

std::filesystem::path snapshot_path(const std::filesystem::path& directory, const std::string& name, std::size_t step)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%06zu.vtk", step);
    return directory / (name + buf);
}

std::string format_real(double value)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", value);
    return buf;
}

namespace {

std::ofstream open_for_write(const std::filesystem::path& path)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw Error(ErrorKind::Io, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    return out;
}

void check_written(std::ofstream& out, const std::filesystem::path& path)
{
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

void write_scalars(std::ostream& out, const char* name, const std::vector<double>& values, std::size_t n)
{
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (std::size_t i = 0; i < n; ++i) out << format_real(i < values.size() ? values[i] : 0.0) << "\n";
}

class Tokens {
public:
    Tokens(std::istream& in, std::filesystem::path path) : in_(in), path_(std::move(path)) {}

    std::string word()
    {
        std::string w;
        if (!(in_ >> w)) fail("unexpected end of file");
        return w;
    }
    void expect(const std::string& w)
    {
        const auto got = word();
        if (got != w) fail("expected '" + w + "', got '" + got + "'");
    }
    double real()
    {
        const auto w = word();
        double v = 0.0;
        auto res = std::from_chars(w.data(), w.data() + w.size(), v);
        if (res.ec != std::errc() || res.ptr != w.data() + w.size()) fail("bad number '" + w + "'");
        return v;
    }
    std::size_t count()
    {
        const auto w = word();
        std::size_t v = 0;
        auto res = std::from_chars(w.data(), w.data() + w.size(), v);
        if (res.ec != std::errc() || res.ptr != w.data() + w.size()) fail("bad count '" + w + "'");
        return v;
    }
    void skip_line()
    {
        std::string ignored;
        std::getline(in_, ignored);
    }
    [[noreturn]] void fail(const std::string& what) { throw Error(ErrorKind::Parse, path_.string() + ": " + what); }

private:
    std::istream& in_;
    std::filesystem::path path_;
};

} // namespace

void write_snapshot(const std::filesystem::path& path, const NodeSet& nodes, const MechState& state)
{
    auto out = open_for_write(path);
    const std::size_t n = nodes.size();
    out << "# vtk DataFile Version 3.0\nxpd snapshot\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << n << " double\n";
    for (const auto& p : nodes.positions) out << format_real(p.x) << " " << format_real(p.y) << " " << format_real(p.z) << "\n";
    out << "CELLS " << n << " " << 2 * n << "\n";
    for (std::size_t i = 0; i < n; ++i) out << "1 " << i << "\n";
    out << "CELL_TYPES " << n << "\n";
    for (std::size_t i = 0; i < n; ++i) out << "1\n";
    out << "POINT_DATA " << n << "\n";
    out << "VECTORS displacement double\n";
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 u = i < state.displacement.size() ? state.displacement[i] : Vec3{};
        out << format_real(u.x) << " " << format_real(u.y) << " " << format_real(u.z) << "\n";
    }
    write_scalars(out, "damage", state.damage, n);
    write_scalars(out, "dilatation", state.dilatation, n);
    write_scalars(out, "sed", state.sed, n);
    check_written(out, path);
}

SnapshotData read_snapshot(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line.rfind("# vtk DataFile", 0) != 0) throw Error(ErrorKind::Parse, path.string() + ": not a legacy VTK file");
    std::getline(in, line); // title
    Tokens tok(in, path);
    tok.expect("ASCII");
    tok.expect("DATASET");
    tok.expect("UNSTRUCTURED_GRID");
    tok.expect("POINTS");
    const std::size_t n = tok.count();
    tok.word();
    SnapshotData data;
    data.points.resize(n);
    for (auto& p : data.points) p = {tok.real(), tok.real(), tok.real()};
    tok.expect("CELLS");
    if (tok.count() != n || tok.count() != 2 * n) tok.fail("CELLS must list one vertex per point");
    for (std::size_t i = 0; i < 2 * n; ++i) tok.count();
    tok.expect("CELL_TYPES");
    if (tok.count() != n) tok.fail("CELL_TYPES count mismatch");
    for (std::size_t i = 0; i < n; ++i)
        if (tok.count() != 1) tok.fail("only VERTEX cells are supported");
    tok.expect("POINT_DATA");
    if (tok.count() != n) tok.fail("POINT_DATA count mismatch");
    for (;;) {
        std::string kind;
        if (!(in >> kind)) break;
        const std::string name = tok.word();
        tok.word(); // type
        if (kind == "VECTORS") {
            if (name != "displacement") tok.fail("unexpected vector field '" + name + "'");
            data.displacement.resize(n);
            for (auto& u : data.displacement) u = {tok.real(), tok.real(), tok.real()};
        } else if (kind == "SCALARS") {
            tok.skip_line();
            tok.expect("LOOKUP_TABLE");
            tok.word();
            std::vector<double>* dst = name == "damage"       ? &data.damage
                                       : name == "dilatation" ? &data.dilatation
                                       : name == "sed"        ? &data.sed
                                                              : nullptr;
            if (dst == nullptr) tok.fail("unexpected scalar field '" + name + "'");
            dst->resize(n);
            for (auto& v : *dst) v = tok.real();
        } else {
            tok.fail("unexpected section '" + kind + "'");
        }
    }
    return data;
}

std::vector<ProbeSample> sample_probe(const ProbeDefinition& probe, const NodeSet& nodes)
{
    std::vector<ProbeSample> samples;
    const int count = probe.kind == ProbeKind::Point ? 1 : probe.samples;
    for (int k = 0; k < count; ++k) {
        ProbeSample s;
        switch (probe.kind) {
        case ProbeKind::HoleEdgeArc: {
            const double beta = 360.0 * k / count;
            const double rad = beta * std::numbers::pi / 180.0;
            s.coordinate = beta;
            s.target = probe.center + Vec3{probe.radius * std::cos(rad), probe.radius * std::sin(rad), 0.0};
            break;
        }
        case ProbeKind::Point:
            s.target = probe.point;
            break;
        case ProbeKind::Line: {
            const double t = count > 1 ? static_cast<double>(k) / (count - 1) : 0.0;
            s.target = probe.from + (probe.to - probe.from) * t;
            s.coordinate = norm(s.target - probe.from);
            break;
        }
        }
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const double d = norm(nodes.positions[i] - s.target);
            if (d < best) {
                best = d;
                arg = i;
            }
        }
        if (nodes.size() > 0 && best <= nodes.char_length[arg]) s.node = arg;
        samples.push_back(s);
    }
    return samples;
}

void write_probe(const std::filesystem::path& path, const ProbeDefinition& probe, const NodeSet& nodes,
                 const MechState& state, const ProbeMeta& meta)
{
    const int dim = nodes.dimension;
    const auto samples = sample_probe(probe, nodes);
    auto out = open_for_write(path);
    out << "# run: " << meta.run << "\n";
    out << "# model: " << meta.model << "\n";
    out << "# step: " << meta.step << "\n";
    out << "# time: " << format_real(meta.time) << "\n";
    out << "# probe: " << probe.name << " (" << to_string(probe.kind) << ")\n";

    std::vector<std::string> header{probe.kind == ProbeKind::HoleEdgeArc ? "beta_deg" : "s", "node", "x", "y"};
    if (dim == 3) header.emplace_back("z");
    const char* axes[] = {"x", "y", "z"};
    for (auto q : probe.quantities) {
        if (q == Quantity::Displacement)
            for (int c = 0; c < dim; ++c) header.push_back(std::string("u") + axes[c]);
        else
            header.emplace_back(to_string(q));
    }
    for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
    out << "\n";

    std::size_t missing = 0;
    for (const auto& s : samples) {
        out << format_real(s.coordinate);
        if (!s.node) {
            ++missing;
            for (std::size_t k = 1; k < header.size(); ++k) out << ",";
            out << "\n";
            continue;
        }
        const std::size_t i = *s.node;
        const Vec3& x = nodes.positions[i];
        out << "," << i << "," << format_real(x.x) << "," << format_real(x.y);
        if (dim == 3) out << "," << format_real(x.z);
        for (auto q : probe.quantities) {
            switch (q) {
            case Quantity::Displacement:
                for (int c = 0; c < dim; ++c) out << "," << format_real(state.displacement[i][c]);
                break;
            case Quantity::Dilatation: out << "," << format_real(state.dilatation[i]); break;
            case Quantity::Sed: out << "," << format_real(state.sed[i]); break;
            case Quantity::Damage: out << "," << format_real(state.damage[i]); break;
            }
        }
        out << "\n";
    }
    check_written(out, path);
    if (missing > 0)
        warn("probe " + probe.name + ": " + std::to_string(missing) + " of " + std::to_string(samples.size()) +
             " samples have no node within one grid spacing");
}

} // namespace xpd
