#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "xpd/vec.hpp"

namespace xpd {

constexpr double kDefaultHorizonFactor = 3.01;

/// Particle cloud. In 2-D `cell_measure` holds areas and quadrature sums run
/// over area (per unit thickness); `thickness` converts to volume when needed.
struct NodeSet {
    int dimension = 2;
    double thickness = 1.0;
    std::vector<Vec3> positions;
    std::vector<double> cell_measure;
    std::vector<double> char_length;
    std::vector<double> horizon;

    std::size_t size() const { return positions.size(); }
    double volume(std::size_t i) const
    {
        return dimension == 2 ? cell_measure[i] * thickness : cell_measure[i];
    }
    double max_horizon() const;
};

/// Validates measures and fills char_length = measure^(1/d), horizon = m_factor * char_length.
NodeSet make_node_set(int dimension, std::vector<Vec3> positions, std::vector<double> measures,
                      double thickness = 1.0, double m_factor = kDefaultHorizonFactor);

/// Recomputes every horizon as m_factor * char_length.
void set_horizon_factor(NodeSet& nodes, double m_factor);

struct Box {
    Vec3 lo;
    Vec3 hi;
};

/// Cell-centred uniform grid. Throws EmptyDomain when no full cell fits.
NodeSet generate_uniform_grid(const Box& box, double spacing, int dimension, double thickness = 1.0,
                              double m_factor = kDefaultHorizonFactor);

/// Tensor-product grid from explicit cell-face coordinates per axis (z ignored in 2-D).
NodeSet generate_rectilinear_grid(std::span<const double> x_faces, std::span<const double> y_faces,
                                  std::span<const double> z_faces, int dimension, double thickness = 1.0,
                                  double m_factor = kDefaultHorizonFactor);

enum class NodeFileFormat { Csv };

/// Reads `id,x,y[,z],measure` records. Dimension is inferred from the column count.
NodeSet load_nodes(const std::filesystem::path& path, NodeFileFormat format = NodeFileFormat::Csv,
                   double m_factor = kDefaultHorizonFactor, double thickness = 1.0);

/// Writes the same record layout load_nodes reads (9 significant digits).
void save_nodes(const std::filesystem::path& path, const NodeSet& nodes);

/// Symmetric bond adjacency in CSR form. Bond b of node i is stored at
/// offsets[i] <= b < offsets[i+1]; `reverse[b]` is the slot of the same pair
/// seen from the neighbour.
struct FamilyGraph {
    std::vector<std::size_t> offsets{0};
    std::vector<std::uint32_t> neighbors;
    std::vector<Vec3> xi;
    std::vector<double> length;
    std::vector<std::size_t> reverse;
    /// Pre-existing cracks only; run-time failure lives in MechState.
    std::vector<std::uint8_t> broken;
    std::vector<std::size_t> isolated;

    std::size_t num_nodes() const { return offsets.size() - 1; }
    std::size_t num_bonds() const { return neighbors.size(); }
    std::size_t begin(std::size_t i) const { return offsets[i]; }
    std::size_t end(std::size_t i) const { return offsets[i + 1]; }
    std::size_t family_size(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
};

/// Union-rule families: j joins i iff |x_j - x_i| <= max(delta_i, delta_j).
/// Uses a uniform bin grid with cell size max(delta).
FamilyGraph build_families(const NodeSet& nodes);

/// O(n^2) reference used by tests.
FamilyGraph build_families_brute_force(const NodeSet& nodes);

/// Pre-existing crack: 2 vertices in 2-D, a planar polygon (>= 3 vertices) in 3-D.
struct CrackSegment {
    std::vector<Vec3> vertices;
};

/// Strict segment/segment intersection; touching within tol * |p1 - p0| does not count.
bool segments_properly_intersect(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1,
                                 double rel_tol = 1e-12);

/// Strict segment/planar-polygon intersection for 3-D cracks.
bool segment_crosses_polygon(const Vec3& p0, const Vec3& p1, std::span<const Vec3> polygon,
                             double rel_tol = 1e-12);

bool bond_crosses(const Vec3& p0, const Vec3& p1, const CrackSegment& crack);

/// Marks every bond crossing a crack as broken (both directions). Returns the
/// number of newly broken bond pairs. Throws Validation on degenerate cracks.
std::size_t apply_precracks(FamilyGraph& graph, const NodeSet& nodes, std::span<const CrackSegment> cracks);

} // namespace xpd
