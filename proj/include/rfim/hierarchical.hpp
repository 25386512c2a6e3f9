#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rfim/disorder.hpp"
#include "rfim/lattice.hpp"

namespace rfim {

// True iff eps |sum of eta over block| exceeds the total coupling strength
// crossing the block boundary (J |edge boundary| for the nearest-neighbor
// case).
bool large_field_event(const Region& block, const FieldSample& field,
                       const DisorderParams& params, const CouplingSpec& coupling);

struct CurdlingState {
    Region window;
    int max_level = 0;
    std::vector<int> first_event_level;  // n(x); max_level + 1 marks capped sites
    std::vector<int> separation_level;   // k(x)
    std::vector<std::int8_t> tau;
    double capped_fraction = 0.0;
    bool cap_warning = false;  // capped on more than 1% of sites

    bool capped(std::size_t i) const { return first_event_level[i] > max_level; }
    // One row per y (top first): digit = n(x), '*' = capped.
    std::string levels_text_grid() const;
    // '+'/'-' overlay of tau in the same layout.
    std::string tau_text_grid() const;
};

// Hierarchical spin assignment on a square window of side 3^max_level whose
// corner is aligned to the level-max_level block partition. Requires h = 0.
// n(x) is the first level at which the block containing x shows a large-field
// event; k(x) the first level whose early-event sites cut x off from the
// window boundary. Sites with k = n take the sign of their block field; the
// rest are filled by exact minimization inside each enclosed pocket, with
// window_bc supplying spins outside the window.
CurdlingState curdle(const Region& window, const FieldSample& field,
                     const DisorderParams& params, const CouplingSpec& coupling, int max_level,
                     int window_bc = +1);

// Fraction of window sites where tau matches the exact ground state computed
// on the whole window under the same boundary condition.
double curdle_match_fraction(const CurdlingState& state, const FieldSample& field,
                             const DisorderParams& params, const CouplingSpec& coupling,
                             int window_bc);

struct MandelbrotResult {
    double crossing_probability = 0.0;
    double crossing_se = 0.0;
    double survive_fraction_mean = 0.0;
    double survive_fraction_se = 0.0;
    std::vector<int> decay_distance;
    std::vector<double> decay_probability;  // center cluster reaches distance d
    std::vector<double> decay_se;
    int samples = 0;
};

// Hierarchical block removal at density p on a side-3^levels grid: at each
// level every surviving block is removed independently with probability p.
// Retention draws are keyed by (seed, sample, level, block), so runs with a
// common seed are coupled monotonically across a p grid.
MandelbrotResult mandelbrot_percolation(double p, int levels, int samples, std::uint64_t seed);

struct HighDisorderReport {
    double exceptional_prob = 0.0;  // P(|h + eps eta| <= 2 d J), closed form
    double threshold = 0.0;         // site-percolation critical density
    bool exponential_regime = false;
};

// p_c(2) for site percolation; literature value, not derived here.
inline constexpr double kSitePercolationThreshold2D = 0.592746;

HighDisorderReport high_disorder_check(const DisorderParams& params,
                                       const CouplingSpec& coupling);

struct ConnectivitySeries {
    std::vector<int> distances;
    std::vector<double> probability;  // P(0 connected that far through open sites)
    std::vector<double> std_error;
    double open_fraction = 0.0;  // empirical rate of |h + eps eta| <= total coupling
    int replicas = 0;
};

// Marks sites with |h + eps eta_v| below the forcing bound as open and
// measures how far the origin's open cluster reaches, over fresh disorder.
ConnectivitySeries exceptional_percolation(int window_radius, const DisorderParams& params,
                                           const CouplingSpec& coupling, int replicas,
                                           std::uint64_t seed, int threads = 1);

struct BlockDensityReport {
    double block_event_prob = 0.0;  // a 2 ell block contains an ell-sensitive site
    double block_event_se = 0.0;
    double union_bound = 0.0;    // (2 ell)^2 m_hat(ell)
    double surface_bound = 0.0;  // |vertex boundary of ball(0,ell)| m_hat(ell)
    double m_hat = 0.0;
    double implied_prefactor = 0.0;  // block_event_prob * ell
    int replicas = 0;
};

BlockDensityReport block_density(int ell, const DisorderParams& params,
                                 const CouplingSpec& coupling, int replicas,
                                 std::uint64_t seed, int threads = 1);

}  // namespace rfim
