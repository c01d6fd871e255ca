#include "xpd/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "xpd/error.hpp"

namespace xpd {

namespace {

/// Ring faces s_0 = 0 .. s_N = 1 growing geometrically, with s_1 = first.
std::vector<double> ring_faces(int rings, double first)
{
    const double n = rings;
    auto first_of = [n](double q) { return std::abs(q - 1.0) < 1e-12 ? 1.0 / n : (q - 1.0) / (std::pow(q, n) - 1.0); };
    double lo = 0.5;
    double hi = 2.0;
    // first_of is decreasing in q.
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (first_of(mid) > first ? lo : hi) = mid;
    }
    const double q = 0.5 * (lo + hi);
    std::vector<double> s(static_cast<std::size_t>(rings) + 1);
    double acc = 0.0;
    double h = first_of(q);
    for (int k = 0; k <= rings; ++k) {
        s[static_cast<std::size_t>(k)] = acc;
        acc += h;
        h *= q;
    }
    for (auto& v : s) v /= s.back();
    return s;
}

double polygon_area(const std::array<Vec3, 4>& c)
{
    double a = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        const auto& p = c[k];
        const auto& q = c[(k + 1) % 4];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * a;
}

Vec3 polygon_centroid(const std::array<Vec3, 4>& c)
{
    double a = 0.0;
    Vec3 g;
    for (std::size_t k = 0; k < 4; ++k) {
        const auto& p = c[k];
        const auto& q = c[(k + 1) % 4];
        const double w = p.x * q.y - q.x * p.y;
        a += w;
        g.x += (p.x + q.x) * w;
        g.y += (p.y + q.y) * w;
    }
    g *= 1.0 / (3.0 * a);
    return g;
}

void validate(const HolePlateSpec& spec)
{
    std::vector<std::string> problems;
    if (!(spec.width > 0.0 && spec.height > 0.0)) problems.emplace_back("plate extents must be positive");
    if (spec.sector_cells < 1) problems.emplace_back("sector_cells must be >= 1");
    if (spec.rings < 1) problems.emplace_back("rings must be >= 1");
    if (spec.strip_width < 0.0) problems.emplace_back("strip_width must be >= 0");
    const double a = 0.5 * spec.width - spec.strip_width;
    const double b = 0.5 * spec.height;
    if (!(spec.hole_radius > 0.0) || spec.hole_radius >= std::min(a, b))
        problems.emplace_back("hole radius must be positive and fit inside the plate");
    double r = spec.hole_radius;
    for (const auto& band : spec.bands) {
        if (!(band.outer_radius > r) || band.outer_radius >= std::min(a, b))
            problems.emplace_back("band radii must increase and stay inside the plate");
        if (band.sector_cells < 1 || band.rings < 1) problems.emplace_back("band cell counts must be >= 1");
        r = band.outer_radius;
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

} // namespace

std::vector<QuadCell> hole_plate_quads(const HolePlateSpec& spec)
{
    validate(spec);
    const double a = 0.5 * spec.width - spec.strip_width;
    const double b = 0.5 * spec.height;
    const double pi = std::numbers::pi;
    std::vector<QuadCell> cells;

    auto angle = [pi](int sector, double t) { return sector * 0.5 * pi - 0.25 * pi + 0.5 * pi * t; };
    auto first_size = [&](double radius, int ns, bool innermost) {
        const double arc = 2.0 * pi * radius / (4.0 * ns);
        return innermost && spec.first_ring > 0.0 ? spec.first_ring : arc;
    };

    double r_in = spec.hole_radius;
    for (std::size_t band = 0; band < spec.bands.size(); ++band) {
        const auto& hb = spec.bands[band];
        const double r_out = hb.outer_radius;
        const int ns = hb.sector_cells;
        const auto s = ring_faces(hb.rings, std::min(1.0, first_size(r_in, ns, band == 0) / (r_out - r_in)));
        auto point = [&](int sector, double t, double g) -> Vec3 {
            const double phi = angle(sector, t);
            const double r = r_in + (r_out - r_in) * g;
            return {r * std::cos(phi), r * std::sin(phi), 0.0};
        };
        for (int k = 0; k < hb.rings; ++k) {
            const double g0 = s[static_cast<std::size_t>(k)];
            const double g1 = s[static_cast<std::size_t>(k) + 1];
            for (int sector = 0; sector < 4; ++sector) {
                for (int l = 0; l < ns; ++l) {
                    const double t0 = static_cast<double>(l) / ns;
                    const double t1 = static_cast<double>(l + 1) / ns;
                    cells.push_back({{point(sector, t0, g0), point(sector, t0, g1), point(sector, t1, g1),
                                      point(sector, t1, g0)}});
                }
            }
        }
        r_in = r_out;
    }

    const int ns = spec.sector_cells;
    const auto s = ring_faces(spec.rings, std::min(1.0, first_size(r_in, ns, spec.bands.empty()) / (std::min(a, b) - r_in)));

    auto boundary = [&](int sector, double t) -> Vec3 {
        switch (sector) {
        case 0: return {a, -b + 2.0 * b * t, 0.0};
        case 1: return {a - 2.0 * a * t, b, 0.0};
        case 2: return {-a, b - 2.0 * b * t, 0.0};
        default: return {-a + 2.0 * a * t, -b, 0.0};
        }
    };
    auto point = [&](int sector, double t, double g) -> Vec3 {
        const double phi = angle(sector, t);
        const Vec3 c{r_in * std::cos(phi), r_in * std::sin(phi), 0.0};
        return c * (1.0 - g) + boundary(sector, t) * g;
    };

    cells.reserve(cells.size() + static_cast<std::size_t>(4 * ns * spec.rings));
    for (int k = 0; k < spec.rings; ++k) {
        const double g0 = s[static_cast<std::size_t>(k)];
        const double g1 = s[static_cast<std::size_t>(k) + 1];
        for (int sector = 0; sector < 4; ++sector) {
            for (int l = 0; l < ns; ++l) {
                const double t0 = static_cast<double>(l) / ns;
                const double t1 = static_cast<double>(l + 1) / ns;
                // Counter-clockwise: outward first, then along the arc.
                cells.push_back({{point(sector, t0, g0), point(sector, t0, g1), point(sector, t1, g1),
                                  point(sector, t1, g0)}});
            }
        }
    }
    return cells;
}

NodeSet generate_hole_plate(const HolePlateSpec& spec, double thickness, double m_factor)
{
    const auto quads = hole_plate_quads(spec);
    std::vector<Vec3> pos;
    std::vector<double> area;
    pos.reserve(quads.size());
    for (const auto& q : quads) {
        pos.push_back(polygon_centroid(q.corners));
        area.push_back(polygon_area(q.corners));
    }
    if (spec.strip_width > 0.0) {
        const double a = 0.5 * spec.width - spec.strip_width;
        int ny = std::max(1, static_cast<int>(std::lround(spec.height / spec.strip_width)));
        if (ny % 2 == 0) ++ny; // keeps a strip node on y = 0
        const double dy = spec.height / ny;
        for (int side = 0; side < 2; ++side) {
            const double xc = (side == 0 ? -1.0 : 1.0) * (a + 0.5 * spec.strip_width);
            for (int j = 0; j < ny; ++j) {
                pos.push_back({xc, -0.5 * spec.height + (j + 0.5) * dy, 0.0});
                area.push_back(spec.strip_width * dy);
            }
        }
    }
    return make_node_set(2, std::move(pos), std::move(area), thickness, m_factor);
}

NodeSet generate_hole_block(const HolePlateSpec& spec, double depth, int layers, double m_factor)
{
    if (!(depth > 0.0) || layers < 1) throw Error(ErrorKind::Validation, "block depth and layer count must be positive");
    const NodeSet plate = generate_hole_plate(spec, 1.0, m_factor);
    const double dz = depth / layers;
    std::vector<Vec3> pos;
    std::vector<double> vol;
    pos.reserve(plate.size() * static_cast<std::size_t>(layers));
    for (int k = 0; k < layers; ++k) {
        const double z = -0.5 * depth + (k + 0.5) * dz;
        for (std::size_t i = 0; i < plate.size(); ++i) {
            pos.push_back({plate.positions[i].x, plate.positions[i].y, z});
            vol.push_back(plate.cell_measure[i] * dz);
        }
    }
    return make_node_set(3, std::move(pos), std::move(vol), 1.0, m_factor);
}

std::vector<double> geometric_faces(double lo, double hi, int cells, double growth)
{
    if (cells < 1 || !(hi > lo) || !(growth > 0.0)) throw Error(ErrorKind::Validation, "bad graded-face request");
    std::vector<double> sizes(static_cast<std::size_t>(cells));
    double h = 1.0;
    double total = 0.0;
    for (auto& s : sizes) {
        s = h;
        total += h;
        h *= growth;
    }
    std::vector<double> faces{lo};
    for (double s : sizes) faces.push_back(faces.back() + (hi - lo) * s / total);
    faces.back() = hi;
    return faces;
}

std::vector<double> symmetric_graded_faces(double lo, double hi, int cells, double growth)
{
    if (cells < 1 || !(hi > lo) || !(growth > 0.0)) throw Error(ErrorKind::Validation, "bad graded-face request");
    std::vector<double> sizes(static_cast<std::size_t>(cells));
    const double centre = 0.5 * (cells - 1);
    double total = 0.0;
    for (int i = 0; i < cells; ++i) {
        sizes[static_cast<std::size_t>(i)] = std::pow(growth, std::abs(i - centre));
        total += sizes[static_cast<std::size_t>(i)];
    }
    std::vector<double> faces{lo};
    for (double s : sizes) faces.push_back(faces.back() + (hi - lo) * s / total);
    faces.back() = hi;
    return faces;
}

} // namespace xpd
