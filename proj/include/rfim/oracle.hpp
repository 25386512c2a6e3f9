#pragma once

#include <cstdint>
#include <vector>

#include "rfim/disorder.hpp"
#include "rfim/groundstate.hpp"
#include "rfim/lattice.hpp"

namespace rfim::oracle {

// Exhaustive-enumeration reference for small instances. Kept deliberately
// separate from the min-cut path: it evaluates the Hamiltonian with its own
// code and visits all 2^n configurations via a Gray-code walk.

struct EnumerationResult {
    std::vector<std::int8_t> spins;  // region order
    double energy = 0.0;             // recomputed directly for the minimizer
    double second_energy = 0.0;      // lowest energy over all other configurations
};

// Direct Hamiltonian evaluation (no shared code with the production path).
double direct_energy(const Region& region, const std::vector<std::int8_t>& spins,
                     const BoundaryCondition& bc, const CouplingSpec& coupling,
                     const FieldSample& field, const DisorderParams& params);

// Requires |region| <= 26.
EnumerationResult ground_state(const Region& region, const BoundaryCondition& bc,
                               const CouplingSpec& coupling, const FieldSample& field,
                               const DisorderParams& params);

}  // namespace rfim::oracle
