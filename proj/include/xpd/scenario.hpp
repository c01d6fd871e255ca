#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "xpd/config.hpp"
#include "xpd/kernel.hpp"
#include "xpd/mechanics.hpp"
#include "xpd/solver.hpp"

namespace xpd {

/// Everything a run needs, assembled from a validated config.
struct Scenario {
    RunConfig config;
    NodeSet nodes;
    FamilyGraph graph;
    std::size_t precracked_pairs = 0;
    KernelOptions kernel_options;
    /// Empty for the bond-based model.
    KernelData kernels;
    Constraints constraints;
    bool has_kernels() const { return config.model != Model::Lbbpd; }
};

NodeSet build_nodes(const RunConfig& config);
WeightFunction weight_function(const std::string& name);

/// Nodes inside each region (inclusive, first `dimension` axes) receive the condition.
Constraints build_constraints(const RunConfig& config, const NodeSet& nodes);

/// Validates, discretizes, applies pre-cracks, resolves constraints and
/// computes kernels for the configured model.
Scenario build_scenario(const RunConfig& config);

/// Hash of every pipeline input except the kernel data and model choice:
/// nodes, bonds, pre-cracks, constraints, material and solver settings.
std::uint64_t pipeline_hash(const Scenario& scenario);

struct RunOutputs {
    MechState state;
    bool quasi_static = true;
    QuasiStaticReport adr;
    DynamicReport dynamic;
    std::vector<std::filesystem::path> snapshots;
    std::vector<std::filesystem::path> probes;
    double seconds = 0.0;
};

struct RunHooks {
    /// Forwarded to the explicit solver after the built-in snapshot writer.
    DynamicObservers dynamic;
    /// Skip every file write (tests).
    bool write_files = true;
};

/// Solves the scenario and writes snapshots and probe tables to the output directory.
RunOutputs run_scenario(Scenario& scenario, const RunHooks& hooks = {});

} // namespace xpd
