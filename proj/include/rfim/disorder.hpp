#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rfim/lattice.hpp"

namespace rfim {

// Model parameters (J lives in CouplingSpec). epsilon = 0 is allowed so the
// pure-Ising sanity cases are expressible; operations that divide by epsilon
// require epsilon > 0 and say so.
struct DisorderParams {
    double h = 0.0;
    double epsilon = 1.0;
    double temperature = 0.0;

    void validate() const;
};

// Philox 4x32-10 counter-based generator (Salmon et al., SC'11).
// Pure function of (key, counter); used for all randomness in the project
// so that values are reproducible and independent of evaluation order.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// 64-bit word keyed by (seed, a, b, stream).
std::uint64_t keyed_u64(std::uint64_t seed, std::uint32_t a, std::uint32_t b,
                        std::uint32_t stream);

// Uniform in (0,1), endpoints excluded.
double keyed_uniform(std::uint64_t seed, std::uint32_t a, std::uint32_t b,
                     std::uint32_t stream);

// Standard normal via inverse CDF of a keyed uniform.
double keyed_normal(std::uint64_t seed, std::uint32_t a, std::uint32_t b,
                    std::uint32_t stream);

// Derived seed for replica / sub-experiment streams.
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index);

// Inverse of the standard normal CDF (Wichura's AS 241, double precision).
double normal_icdf(double p);

// Gaussian density and two-sided tail.
double phi(double s);
double chi(double t);

// 2^-10 * chi(50 J / epsilon); requires epsilon > 0.
double gamma_exponent(double j, double epsilon);

// One quenched realization over a region. Values are a pure function of
// (seed, site coordinates): overlapping regions with the same seed agree
// sitewise.
struct FieldSample {
    Region region;
    std::vector<double> values;  // one per region site, region order
    std::uint64_t seed = 0;

    double at(const Site& s) const;
    double max_abs() const;
};

FieldSample sample_field(const Region& region, std::uint64_t seed);

// Copy of `field` with +t added on `inner` sites. inner must be contained
// in field.region.
FieldSample shift_field(const FieldSample& field, const Region& inner, double t);

// (1 / sqrt(|inner|)) * sum of field over inner.
double hat_eta(const FieldSample& field, const Region& inner);

}  // namespace rfim
