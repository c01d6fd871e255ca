#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xpd/config.hpp"
#include "xpd/discretization.hpp"
#include "xpd/mechanics.hpp"

namespace xpd {

/// <dir>/<name>_<step, zero-padded to 6>.vtk
std::filesystem::path snapshot_path(const std::filesystem::path& directory, const std::string& name, std::size_t step);

/// Legacy ASCII VTK point cloud: POINTS, one VERTEX cell per node and point
/// data for displacement, damage, dilatation and SED at 9 significant digits.
void write_snapshot(const std::filesystem::path& path, const NodeSet& nodes, const MechState& state);

struct SnapshotData {
    std::vector<Vec3> points;
    std::vector<Vec3> displacement;
    std::vector<double> damage;
    std::vector<double> dilatation;
    std::vector<double> sed;
};

/// Reads files written by write_snapshot. Throws ParseError on anything else.
SnapshotData read_snapshot(const std::filesystem::path& path);

/// Formats like the writers: 9 significant digits.
std::string format_real(double value);

struct ProbeSample {
    /// Angle in degrees for arcs, distance from `from` for lines, 0 for points.
    double coordinate = 0.0;
    Vec3 target;
    /// Nearest node, empty when none lies within its own grid spacing.
    std::optional<std::size_t> node;
};

std::vector<ProbeSample> sample_probe(const ProbeDefinition& probe, const NodeSet& nodes);

struct ProbeMeta {
    std::string run;
    std::string model;
    std::size_t step = 0;
    double time = 0.0;
};

/// CSV with '#' metadata lines and a header row; empty fields plus a warning
/// for samples that found no node.
void write_probe(const std::filesystem::path& path, const ProbeDefinition& probe, const NodeSet& nodes,
                 const MechState& state, const ProbeMeta& meta);

} // namespace xpd
