#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rfim/disorder.hpp"
#include "rfim/lattice.hpp"
#include "rfim/maxflow.hpp"

namespace rfim {

// Spin values on the vertex boundary of a region. A value of 0 marks a free
// (uncoupled) boundary site; uniform and mixed-annulus shorthands cover the
// cases used by the observables.
class BoundaryCondition {
public:
    static BoundaryCondition uniform(const Region& region, const CouplingSpec& coupling,
                                     int spin);
    static BoundaryCondition free(const Region& region, const CouplingSpec& coupling);
    // Classification by membership: boundary sites lying in
    // ball(0, inner_radius) get s_inner, all others s_outer.
    static BoundaryCondition mixed_annulus(const Region& annulus, const CouplingSpec& coupling,
                                           int s_outer, int s_inner, int inner_radius);
    // Arbitrary assignment: fn is evaluated on every vertex-boundary site and
    // must return -1, 0 or +1.
    static BoundaryCondition build(const Region& region, const CouplingSpec& coupling,
                                   const std::function<int(const Site&)>& fn);

    const std::vector<Site>& sites() const { return sites_; }
    const std::vector<std::int8_t>& spins() const { return spins_; }
    int spin_at(const Site& s) const;  // throws if s is not a boundary site

private:
    std::vector<Site> sites_;  // row-major, exactly the vertex boundary
    std::vector<std::int8_t> spins_;
};

struct SpinConfig {
    Region region;
    std::vector<std::int8_t> spins;  // one per site, region order, each +-1

    int at(const Site& s) const;
    // One row per y (top row = largest y), '+'/'-' per site, '.' for holes.
    std::string to_text_grid() const;
};

struct GroundStateResult {
    SpinConfig config;
    double energy = 0.0;
    bool unique_within_tol = true;
};

// H = - sum_{pairs in region} J s s - sum_{edge boundary} J s tau
//     - sum_v (h + eps eta_v) s_v, each unordered internal pair counted once.
double hamiltonian_energy(const SpinConfig& config, const BoundaryCondition& bc,
                          const CouplingSpec& coupling, const FieldSample& field,
                          const DisorderParams& params);

// Exact minimizer via the min-cut reduction. Requires ferromagnetic
// couplings; degenerate (near-tied) instances are flagged and resolved by
// the fixed convention that vertices unreachable from the source get -1.
GroundStateResult minimize(const Region& region, const BoundaryCondition& bc,
                           const CouplingSpec& coupling, const FieldSample& field,
                           const DisorderParams& params);

// Reusable solver for one (region, coupling): builds the flow topology once
// and re-solves for different local fields. local_field[i] must hold the
// full effective field at site i (h + eps eta + boundary coupling terms).
class MinCutSolver {
public:
    MinCutSolver(const Region& region, const CouplingSpec& coupling);

    const Region& region() const { return region_; }

    // Returns spins (+1 for source-side vertices, -1 otherwise).
    std::vector<std::int8_t> solve(const std::vector<double>& local_field) const;
    bool last_degenerate() const { return degenerate_; }

    // Effective field assembled from the model inputs.
    std::vector<double> assemble_field(const BoundaryCondition& bc, const FieldSample& field,
                                       const DisorderParams& params) const;

    // Energy of an arbitrary config under the assembled field, including the
    // internal pair terms (used for cross-checks against hamiltonian_energy).
    double config_energy(const std::vector<std::int8_t>& spins,
                         const std::vector<double>& local_field) const;

private:
    Region region_;
    CouplingSpec coupling_;
    std::vector<std::pair<int, int>> pairs_;  // internal coupled pairs, i < j order
    std::vector<double> pair_strength_;
    mutable MaxFlow flow_;
    mutable std::vector<double> source_cap_;
    mutable std::vector<double> sink_cap_;
    mutable bool degenerate_ = false;
};

struct FourEnergies {
    double pp = 0.0;  // + outer, + inner
    double mm = 0.0;
    double pm = 0.0;  // + outer, - inner
    double mp = 0.0;
};

// Number of sites in ball(0,ell) where the +/- ground states on ball(0,3ell)
// differ, and the sites themselves.
std::vector<Site> disagreement_set(int ell, const FieldSample& field,
                                   const DisorderParams& params, const CouplingSpec& coupling);
int disagreement_count(int ell, const FieldSample& field, const DisorderParams& params,
                       const CouplingSpec& coupling);

// Coupling-weighted count of edges crossing the boundary of ball(0,2ell)
// whose endpoints both disagree between the +/- annulus ground states.
double separating_edge_strength(int ell, const FieldSample& field, const DisorderParams& params,
                                const CouplingSpec& coupling);

FourEnergies four_energies(int ell, const FieldSample& field, const DisorderParams& params,
                           const CouplingSpec& coupling);

// -(E^{++} + E^{--} - E^{+-} - E^{-+}) over the annulus.
double surface_tension_T0(int ell, const FieldSample& field, const DisorderParams& params,
                          const CouplingSpec& coupling);
double surface_tension_T0(const FourEnergies& energies);

// -(E^+ - E^-) over ball(0,3ell).
double boundary_energy_gap(int ell, const FieldSample& field, const DisorderParams& params,
                           const CouplingSpec& coupling);

// Per-site shift thresholds: for v in ball(0,ell), the t at which the ground
// state on ball(0,3ell) under +/- boundary conditions flips at v when a
// uniform field t is added inside ball(0,ell). first = threshold under +,
// second = under - boundary conditions; first <= second.
std::vector<std::pair<double, double>> flip_thresholds(int ell, const FieldSample& field,
                                                       const DisorderParams& params,
                                                       const CouplingSpec& coupling,
                                                       double tolerance = 1e-8);

struct AvalancheStep {
    double h = 0.0;
    std::vector<int> cluster_sizes;  // descending
};

// Ground states under minus boundary conditions along an increasing h grid;
// reports connected clusters of newly flipped sites per step.
std::vector<AvalancheStep> avalanche_scan(const Region& region, const FieldSample& field,
                                          const CouplingSpec& coupling,
                                          const DisorderParams& params,
                                          const std::vector<double>& h_grid);

}  // namespace rfim
