#include "xpd/discretization.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>

#include "xpd/error.hpp"

namespace xpd {

double NodeSet::max_horizon() const
{
    double m = 0.0;
    for (double d : horizon) m = std::max(m, d);
    return m;
}

NodeSet make_node_set(int dimension, std::vector<Vec3> positions, std::vector<double> measures,
                      double thickness, double m_factor)
{
    if (dimension != 2 && dimension != 3)
        throw Error(ErrorKind::Validation, "dimension must be 2 or 3");
    if (positions.size() != measures.size())
        throw Error(ErrorKind::Validation, "positions and measures differ in length");
    if (positions.empty()) throw Error(ErrorKind::EmptyDomain, "node set is empty");
    if (!(thickness > 0.0)) throw Error(ErrorKind::Validation, "thickness must be positive");
    for (std::size_t i = 0; i < measures.size(); ++i) {
        if (!(measures[i] > 0.0) || !std::isfinite(measures[i]))
            throw Error(ErrorKind::InvalidMeasure, "node " + std::to_string(i) + " has non-positive measure");
    }
    NodeSet nodes;
    nodes.dimension = dimension;
    nodes.thickness = thickness;
    nodes.positions = std::move(positions);
    if (dimension == 2)
        for (auto& p : nodes.positions) p.z = 0.0;
    nodes.cell_measure = std::move(measures);
    nodes.char_length.resize(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i)
        nodes.char_length[i] = dimension == 2 ? std::sqrt(nodes.cell_measure[i]) : std::cbrt(nodes.cell_measure[i]);
    set_horizon_factor(nodes, m_factor);
    return nodes;
}

void set_horizon_factor(NodeSet& nodes, double m_factor)
{
    if (!(m_factor > 0.0)) throw Error(ErrorKind::Validation, "horizon factor must be positive");
    nodes.horizon.resize(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) nodes.horizon[i] = m_factor * nodes.char_length[i];
}

NodeSet generate_uniform_grid(const Box& box, double spacing, int dimension, double thickness, double m_factor)
{
    if (!(spacing > 0.0)) throw Error(ErrorKind::Validation, "grid spacing must be positive");
    std::array<std::vector<double>, 3> faces;
    for (int k = 0; k < dimension; ++k) {
        const double extent = box.hi[k] - box.lo[k];
        // Tolerate round-off when extent is an exact multiple of the spacing.
        const auto cells = static_cast<long>(std::floor(extent / spacing + 1e-9));
        if (extent <= 0.0 || cells <= 0)
            throw Error(ErrorKind::EmptyDomain, "box holds no full grid cell along axis " + std::to_string(k));
        faces[k].resize(static_cast<std::size_t>(cells) + 1);
        for (long c = 0; c <= cells; ++c) faces[k][static_cast<std::size_t>(c)] = box.lo[k] + static_cast<double>(c) * spacing;
    }
    if (dimension == 2) faces[2] = {0.0, 1.0};
    return generate_rectilinear_grid(faces[0], faces[1], faces[2], dimension, thickness, m_factor);
}

NodeSet generate_rectilinear_grid(std::span<const double> x_faces, std::span<const double> y_faces,
                                  std::span<const double> z_faces, int dimension, double thickness,
                                  double m_factor)
{
    if (x_faces.size() < 2 || y_faces.size() < 2 || (dimension == 3 && z_faces.size() < 2))
        throw Error(ErrorKind::EmptyDomain, "grid needs at least one cell per axis");
    const std::size_t nz = dimension == 3 ? z_faces.size() - 1 : 1;
    std::vector<Vec3> pos;
    std::vector<double> measure;
    pos.reserve((x_faces.size() - 1) * (y_faces.size() - 1) * nz);
    for (std::size_t k = 0; k < nz; ++k) {
        for (std::size_t j = 0; j + 1 < y_faces.size(); ++j) {
            for (std::size_t i = 0; i + 1 < x_faces.size(); ++i) {
                const double dx = x_faces[i + 1] - x_faces[i];
                const double dy = y_faces[j + 1] - y_faces[j];
                Vec3 p{0.5 * (x_faces[i] + x_faces[i + 1]), 0.5 * (y_faces[j] + y_faces[j + 1]), 0.0};
                double m = dx * dy;
                if (dimension == 3) {
                    p.z = 0.5 * (z_faces[k] + z_faces[k + 1]);
                    m *= z_faces[k + 1] - z_faces[k];
                }
                pos.push_back(p);
                measure.push_back(m);
            }
        }
    }
    return make_node_set(dimension, std::move(pos), std::move(measure), thickness, m_factor);
}

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

bool parse_double(std::string_view s, double& out)
{
    s = trim(s);
    if (s.empty()) return false;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc{} && ptr == end && std::isfinite(out);
}

} // namespace

NodeSet load_nodes(const std::filesystem::path& path, NodeFileFormat format, double m_factor, double thickness)
{
    if (format != NodeFileFormat::Csv) throw Error(ErrorKind::Validation, "unsupported node file format");
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open node file " + path.string());

    int dimension = 0;
    std::vector<Vec3> pos;
    std::vector<double> measure;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = line;
        if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = trim(view);
        if (view.empty()) continue;

        std::vector<std::string_view> cols;
        std::size_t start = 0;
        while (true) {
            const auto comma = view.find(',', start);
            cols.push_back(view.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (cols.size() != 4 && cols.size() != 5)
            throw ParseError(line_no, "expected 4 (2-D) or 5 (3-D) comma-separated columns, got " +
                                          std::to_string(cols.size()));
        const int dim = cols.size() == 4 ? 2 : 3;
        if (dimension == 0) dimension = dim;
        if (dim != dimension) throw ParseError(line_no, "column count changes dimension mid-file");

        long long id = 0;
        const auto id_text = trim(cols[0]);
        auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
        if (ec != std::errc{} || ptr != id_text.data() + id_text.size())
            throw ParseError(line_no, "malformed id '" + std::string(id_text) + "'");

        Vec3 p;
        for (int k = 0; k < dim; ++k) {
            if (!parse_double(cols[static_cast<std::size_t>(k) + 1], p[k]))
                throw ParseError(line_no, "malformed coordinate '" + std::string(trim(cols[static_cast<std::size_t>(k) + 1])) + "'");
        }
        double m = 0.0;
        if (!parse_double(cols.back(), m))
            throw ParseError(line_no, "malformed measure '" + std::string(trim(cols.back())) + "'");
        if (!(m > 0.0))
            throw Error(ErrorKind::InvalidMeasure, "line " + std::to_string(line_no) + ": non-positive measure");
        pos.push_back(p);
        measure.push_back(m);
    }
    if (pos.empty()) throw Error(ErrorKind::EmptyDomain, "node file " + path.string() + " has no records");
    return make_node_set(dimension, std::move(pos), std::move(measure), thickness, m_factor);
}

void save_nodes(const std::filesystem::path& path, const NodeSet& nodes)
{
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write node file " + path.string());
    out << std::setprecision(9);
    out << "# id,x,y" << (nodes.dimension == 3 ? ",z" : "") << ",measure\n";
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& p = nodes.positions[i];
        out << i << ',' << p.x << ',' << p.y;
        if (nodes.dimension == 3) out << ',' << p.z;
        out << ',' << nodes.cell_measure[i] << '\n';
    }
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

namespace {

FamilyGraph assemble(std::vector<std::vector<std::uint32_t>> lists, const NodeSet& nodes)
{
    FamilyGraph g;
    const std::size_t n = nodes.size();
    g.offsets.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::sort(lists[i].begin(), lists[i].end());
        g.offsets[i + 1] = g.offsets[i] + lists[i].size();
        if (lists[i].empty()) g.isolated.push_back(i);
    }
    const std::size_t nb = g.offsets[n];
    g.neighbors.resize(nb);
    g.xi.resize(nb);
    g.length.resize(nb);
    g.reverse.resize(nb);
    g.broken.assign(nb, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(lists[i].begin(), lists[i].end(), g.neighbors.begin() + static_cast<std::ptrdiff_t>(g.offsets[i]));
        for (std::size_t b = g.offsets[i]; b < g.offsets[i + 1]; ++b) {
            const auto j = g.neighbors[b];
            g.xi[b] = nodes.positions[j] - nodes.positions[i];
            g.length[b] = norm(g.xi[b]);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t b = g.offsets[i]; b < g.offsets[i + 1]; ++b) {
            const auto j = g.neighbors[b];
            const auto first = g.neighbors.begin() + static_cast<std::ptrdiff_t>(g.offsets[j]);
            const auto last = g.neighbors.begin() + static_cast<std::ptrdiff_t>(g.offsets[j + 1]);
            const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(i));
            g.reverse[b] = static_cast<std::size_t>(it - g.neighbors.begin());
        }
    }
    for (auto i : g.isolated) warn("IsolatedNode: node " + std::to_string(i) + " has an empty family");
    return g;
}

bool in_family(const NodeSet& nodes, std::size_t i, std::size_t j)
{
    if (i == j) return false;
    const Vec3 d = nodes.positions[j] - nodes.positions[i];
    const double r2 = dot(d, d);
    if (r2 <= 0.0) return false;
    const double reach = std::max(nodes.horizon[i], nodes.horizon[j]);
    return r2 <= reach * reach;
}

} // namespace

FamilyGraph build_families(const NodeSet& nodes)
{
    const std::size_t n = nodes.size();
    if (nodes.horizon.size() != n) throw Error(ErrorKind::Validation, "horizons are not set");
    double cell = nodes.max_horizon();
    Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
    Vec3 hi = -lo;
    for (const auto& p : nodes.positions) {
        for (int k = 0; k < 3; ++k) {
            lo[k] = std::min(lo[k], p[k]);
            hi[k] = std::max(hi[k], p[k]);
        }
    }
    std::array<long, 3> dims{};
    auto compute_dims = [&] {
        long total = 1;
        for (int k = 0; k < 3; ++k) {
            dims[static_cast<std::size_t>(k)] = static_cast<long>(std::floor((hi[k] - lo[k]) / cell)) + 1;
            total *= dims[static_cast<std::size_t>(k)];
        }
        return total;
    };
    // Coarsen bins rather than allocate an absurd grid for sparse clouds.
    while (compute_dims() > 16L * 1024 * 1024) cell *= 2.0;

    auto bin_of = [&](const Vec3& p) {
        std::array<long, 3> c{};
        for (int k = 0; k < 3; ++k)
            c[static_cast<std::size_t>(k)] = std::min(dims[static_cast<std::size_t>(k)] - 1,
                                                      static_cast<long>(std::floor((p[k] - lo[k]) / cell)));
        return c;
    };
    auto flat = [&](const std::array<long, 3>& c) {
        return static_cast<std::size_t>((c[2] * dims[1] + c[1]) * dims[0] + c[0]);
    };

    const std::size_t nbins = static_cast<std::size_t>(dims[0] * dims[1] * dims[2]);
    std::vector<std::size_t> bin_start(nbins + 1, 0);
    std::vector<std::size_t> node_bin(n);
    for (std::size_t i = 0; i < n; ++i) {
        node_bin[i] = flat(bin_of(nodes.positions[i]));
        ++bin_start[node_bin[i] + 1];
    }
    for (std::size_t b = 0; b < nbins; ++b) bin_start[b + 1] += bin_start[b];
    std::vector<std::uint32_t> bin_nodes(n);
    {
        std::vector<std::size_t> fill(bin_start.begin(), bin_start.end() - 1);
        for (std::size_t i = 0; i < n; ++i) bin_nodes[fill[node_bin[i]]++] = static_cast<std::uint32_t>(i);
    }

    std::vector<std::vector<std::uint32_t>> lists(n);
#pragma omp parallel for schedule(dynamic, 256)
    for (long ii = 0; ii < static_cast<long>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const auto c = bin_of(nodes.positions[i]);
        for (long dz = -1; dz <= 1; ++dz) {
            for (long dy = -1; dy <= 1; ++dy) {
                for (long dx = -1; dx <= 1; ++dx) {
                    const std::array<long, 3> q{c[0] + dx, c[1] + dy, c[2] + dz};
                    if (q[0] < 0 || q[1] < 0 || q[2] < 0 || q[0] >= dims[0] || q[1] >= dims[1] || q[2] >= dims[2])
                        continue;
                    const auto b = flat(q);
                    for (std::size_t s = bin_start[b]; s < bin_start[b + 1]; ++s) {
                        const auto j = bin_nodes[s];
                        if (in_family(nodes, i, j)) lists[i].push_back(j);
                    }
                }
            }
        }
    }
    return assemble(std::move(lists), nodes);
}

FamilyGraph build_families_brute_force(const NodeSet& nodes)
{
    std::vector<std::vector<std::uint32_t>> lists(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i)
        for (std::size_t j = 0; j < nodes.size(); ++j)
            if (in_family(nodes, i, j)) lists[i].push_back(static_cast<std::uint32_t>(j));
    return assemble(std::move(lists), nodes);
}

namespace {

double cross2(const Vec3& o, const Vec3& a, const Vec3& b)
{
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

} // namespace

bool segments_properly_intersect(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1, double rel_tol)
{
    const double lp = std::hypot(p1.x - p0.x, p1.y - p0.y);
    const double lq = std::hypot(q1.x - q0.x, q1.y - q0.y);
    if (lp <= 0.0 || lq <= 0.0) return false;
    const double tol = rel_tol * lp;
    // Signed distances of bond ends to the crack line and of crack ends to the bond line.
    const double d0 = cross2(q0, q1, p0) / lq;
    const double d1 = cross2(q0, q1, p1) / lq;
    const double e0 = cross2(p0, p1, q0) / lp;
    const double e1 = cross2(p0, p1, q1) / lp;
    auto strictly_opposite = [tol](double a, double b) {
        return (a > tol && b < -tol) || (a < -tol && b > tol);
    };
    return strictly_opposite(d0, d1) && strictly_opposite(e0, e1);
}

bool segment_crosses_polygon(const Vec3& p0, const Vec3& p1, std::span<const Vec3> polygon, double rel_tol)
{
    if (polygon.size() < 3) return false;
    Vec3 normal;
    for (std::size_t k = 0; k < polygon.size(); ++k) {
        const Vec3& a = polygon[k];
        const Vec3& b = polygon[(k + 1) % polygon.size()];
        normal.x += (a.y - b.y) * (a.z + b.z);
        normal.y += (a.z - b.z) * (a.x + b.x);
        normal.z += (a.x - b.x) * (a.y + b.y);
    }
    const double nn = norm(normal);
    if (nn <= 0.0) return false;
    normal *= 1.0 / nn;
    const double lp = norm(p1 - p0);
    const double tol = rel_tol * lp;
    const double s0 = dot(normal, p0 - polygon[0]);
    const double s1 = dot(normal, p1 - polygon[0]);
    if (!((s0 > tol && s1 < -tol) || (s0 < -tol && s1 > tol))) return false;
    const Vec3 x = p0 + (p1 - p0) * (s0 / (s0 - s1));

    // Project onto the dominant plane and run a strict crossing-number test.
    int drop = 0;
    if (std::abs(normal.y) > std::abs(normal[drop])) drop = 1;
    if (std::abs(normal.z) > std::abs(normal[drop])) drop = 2;
    const int u = (drop + 1) % 3;
    const int v = (drop + 2) % 3;
    bool inside = false;
    for (std::size_t k = 0; k < polygon.size(); ++k) {
        const Vec3& a = polygon[k];
        const Vec3& b = polygon[(k + 1) % polygon.size()];
        const Vec3 ab = b - a;
        const double lab = norm(ab);
        // Touching an edge of the crack surface does not cut the bond.
        const Vec3 ax = x - a;
        double t = lab > 0.0 ? dot(ax, ab) / (lab * lab) : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        if (norm(ax - ab * t) <= tol) return false;
        if ((a[v] > x[v]) != (b[v] > x[v])) {
            const double cross_u = a[u] + (x[v] - a[v]) * (b[u] - a[u]) / (b[v] - a[v]);
            if (x[u] < cross_u) inside = !inside;
        }
    }
    return inside;
}

bool bond_crosses(const Vec3& p0, const Vec3& p1, const CrackSegment& crack)
{
    if (crack.vertices.size() == 2)
        return segments_properly_intersect(p0, p1, crack.vertices[0], crack.vertices[1]);
    return segment_crosses_polygon(p0, p1, crack.vertices);
}

std::size_t apply_precracks(FamilyGraph& graph, const NodeSet& nodes, std::span<const CrackSegment> cracks)
{
    std::vector<std::string> problems;
    for (std::size_t c = 0; c < cracks.size(); ++c) {
        const auto& v = cracks[c].vertices;
        if (nodes.dimension == 2) {
            if (v.size() != 2 || std::hypot(v[1].x - v[0].x, v[1].y - v[0].y) <= 0.0)
                problems.push_back("crack " + std::to_string(c) + " must be a segment of positive length");
        } else {
            double area2 = 0.0;
            for (std::size_t k = 1; k + 1 < v.size(); ++k) area2 += norm(cross(v[k] - v[0], v[k + 1] - v[0]));
            if (v.size() < 3 || area2 <= 0.0)
                problems.push_back("crack " + std::to_string(c) + " must be a polygon of positive area");
        }
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));

    std::size_t count = 0;
    for (std::size_t i = 0; i < graph.num_nodes(); ++i) {
        for (std::size_t b = graph.begin(i); b < graph.end(i); ++b) {
            const auto j = graph.neighbors[b];
            if (j < i || graph.broken[b]) continue;
            for (const auto& crack : cracks) {
                if (bond_crosses(nodes.positions[i], nodes.positions[j], crack)) {
                    graph.broken[b] = 1;
                    graph.broken[graph.reverse[b]] = 1;
                    ++count;
                    break;
                }
            }
        }
    }
    return count;
}

} // namespace xpd
