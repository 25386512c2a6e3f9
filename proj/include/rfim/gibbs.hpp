#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rfim/disorder.hpp"
#include "rfim/groundstate.hpp"
#include "rfim/lattice.hpp"

namespace rfim {

struct ExactGibbsResult {
    double log_partition = 0.0;
    std::vector<double> magnetization;  // <sigma_v>, region order
};

// Exact finite-temperature state by summation over all 2^n configurations
// (Gray-code walk, log-sum-exp stabilized). Budget: |region| <= 22.
ExactGibbsResult exact_gibbs(const Region& region, const BoundaryCondition& bc,
                             const CouplingSpec& coupling, const FieldSample& field,
                             const DisorderParams& params);

// Same, with the spins at clamp_sites held fixed at clamp_spins; the budget
// applies to the number of free sites.
ExactGibbsResult exact_gibbs_clamped(const Region& region, const BoundaryCondition& bc,
                                     const CouplingSpec& coupling, const FieldSample& field,
                                     const DisorderParams& params,
                                     const std::vector<Site>& clamp_sites,
                                     const std::vector<std::int8_t>& clamp_spins);

// Exact state by row-to-row transfer for nearest-neighbor couplings; handles
// regions whose widest row has at most 20 sites. Cross-checked against
// exact_gibbs in the test suite.
ExactGibbsResult transfer_gibbs(const Region& region, const BoundaryCondition& bc,
                                const CouplingSpec& coupling, const FieldSample& field,
                                const DisorderParams& params);

// Exact engine dispatcher: enumeration within its budget, transfer beyond.
ExactGibbsResult exact_engine(const Region& region, const BoundaryCondition& bc,
                              const CouplingSpec& coupling, const FieldSample& field,
                              const DisorderParams& params);

// Thermal pair expectation <sigma_u sigma_v> from the transfer engine.
double transfer_pair_expectation(const Region& region, const BoundaryCondition& bc,
                                 const CouplingSpec& coupling, const FieldSample& field,
                                 const DisorderParams& params, const Site& u, const Site& v);

struct MagnetizationField {
    std::vector<double> estimates;  // region order, each in [-1,1]
    std::vector<double> std_error;
    int sweeps = 0;
    int burn_in = 0;
};

struct CoupledChains {
    MagnetizationField plus;
    MagnetizationField minus;
    bool ordered = true;  // plus >= minus held at every recorded sweep
};

// Two heat-bath chains under +/- boundary conditions, started all-plus /
// all-minus, driven by identical uniforms keyed by (chain_seed, sweep, site).
// Heat-bath updates are monotone, so the plus chain dominates the minus
// chain pathwise. burn_in < 0 selects plateau detection capped at
// 10 |region| sweeps. Standard errors are batch means over 20 batches.
CoupledChains coupled_heat_bath(const Region& region, const CouplingSpec& coupling,
                                const FieldSample& field, const DisorderParams& params,
                                int sweeps, int burn_in, std::uint64_t chain_seed);

struct ChainObservables {
    MagnetizationField sites;
    std::vector<double> pair_mean;  // time average of sigma_a sigma_b per requested pair
};

// One heat-bath chain under a uniform boundary condition, started from the
// boundary spin everywhere. Tracks per-site means plus the requested pair
// products.
ChainObservables heat_bath_single(const Region& region, const CouplingSpec& coupling,
                                  const FieldSample& field, const DisorderParams& params,
                                  int bc_spin, int sweeps, int burn_in,
                                  std::uint64_t chain_seed,
                                  const std::vector<std::pair<Site, Site>>& pairs = {});

struct GibbsEngine {
    enum class Kind { Exact, Mcmc } kind = Kind::Exact;
    int sweeps = 20000;
    int burn_in = -1;  // auto
    std::uint64_t chain_seed = 1;

    static GibbsEngine exact() { return GibbsEngine{Kind::Exact, 0, 0, 0}; }
    static GibbsEngine mcmc(int sweeps, int burn_in, std::uint64_t chain_seed) {
        return GibbsEngine{Kind::Mcmc, sweeps, burn_in, chain_seed};
    }
};

struct EngineValue {
    double value = 0.0;
    double std_error = 0.0;  // zero for the exact engine
};

// (1/2) sum over ball(0,ell) of [<sigma_v>^{ball(0,3ell),+} - <...>^-].
EngineValue disagreement_posT(int ell, const FieldSample& field, const DisorderParams& params,
                              const CouplingSpec& coupling, const GibbsEngine& engine);

// Vertex-counting separating strength over the annulus states. For the
// nearest-neighbor coupling this is (J/2) sum over the boundary ring of
// ball(0,2ell); finite-range couplings weight each vertex by its crossing
// strength divided by 4.
EngineValue separating_vertex_strength_posT(int ell, const FieldSample& field,
                                            const DisorderParams& params,
                                            const CouplingSpec& coupling,
                                            const GibbsEngine& engine);

// T [log Z^{++} + log Z^{--} - log Z^{+-} - log Z^{-+}] over the annulus.
double surface_tension_posT_exact(int ell, const FieldSample& field,
                                  const DisorderParams& params, const CouplingSpec& coupling);

// Both sides of the restricted-partition-function identity
// Z^{++}_tau Z^{--}_tau = Z^{+-}_tau Z^{-+}_tau at ell = 1, in log form.
// tau assigns spins to the boundary ring of ball(0,2).
std::pair<double, double> cross_ratio_check(const std::vector<std::int8_t>& tau,
                                            const FieldSample& field,
                                            const DisorderParams& params,
                                            const CouplingSpec& coupling);

struct IntegralResult {
    double value = 0.0;
    double std_error = 0.0;  // propagated MC error; zero for the exact engine
    double achieved_rel_tol = 0.0;
    bool converged = true;
    int evaluations = 0;
};

// 2 eps int D_ell(eta^{(t)}) dt by adaptive trapezoid refinement over the
// forcing-bounded support. Exact engine refines until successive estimates
// differ by less than rel_tol; the MCMC engine stops at the combined
// statistical error.
IntegralResult surface_tension_posT_integral(int ell, const FieldSample& field,
                                             const DisorderParams& params,
                                             const CouplingSpec& coupling,
                                             const GibbsEngine& engine,
                                             double rel_tol = 1e-4);

}  // namespace rfim
