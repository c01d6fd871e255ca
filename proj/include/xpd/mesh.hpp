#pragma once

#include <array>
#include <vector>

#include "xpd/discretization.hpp"

namespace xpd {

/// Polar annulus around the hole with its own angular resolution. Bands are
/// listed inside out; the mapped zone starts at the last band's outer radius.
/// Band interfaces need not conform.
struct HoleBand {
    double outer_radius = 0.0;
    int sector_cells = 0;
    int rings = 0;
};

/// Square-ish plate with a centred circular hole, meshed as mapped quads whose
/// centroids become nodes. The x-ends optionally carry a uniform strip of
/// square cells that serves as the loaded layer.
struct HolePlateSpec {
    double width = 1.0;
    double height = 1.0;
    double hole_radius = 0.1;
    /// Cells per quarter sector along the hole; odd keeps a node on each axis.
    int sector_cells = 25;
    int rings = 30;
    /// Thickness of the loaded strip at x = +-width/2 (0 disables it).
    double strip_width = 0.025;
    /// Radial size of the first ring; <= 0 matches the hole arc spacing.
    double first_ring = 0.0;
    std::vector<HoleBand> bands;
};

/// Quad cells of the mapped mesh (without strips), used by tests and the reference tooling.
struct QuadCell {
    std::array<Vec3, 4> corners;
};
std::vector<QuadCell> hole_plate_quads(const HolePlateSpec& spec);

NodeSet generate_hole_plate(const HolePlateSpec& spec, double thickness = 1.0,
                            double m_factor = kDefaultHorizonFactor);

/// Extrudes the plate along z in `layers` equal slabs centred on z = 0.
NodeSet generate_hole_block(const HolePlateSpec& spec, double depth, int layers,
                            double m_factor = kDefaultHorizonFactor);

/// Faces lo..hi in `cells` cells growing geometrically by `growth` from the centre outward.
std::vector<double> symmetric_graded_faces(double lo, double hi, int cells, double growth);

/// Faces lo..hi with sizes growing geometrically by `growth` from lo.
std::vector<double> geometric_faces(double lo, double hi, int cells, double growth);

} // namespace xpd
