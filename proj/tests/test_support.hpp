#pragma once

// Deterministic random instances for the test suites. Everything is keyed
// through the project's counter-based generator so test runs are identical
// across platforms and orderings.

#include <cstdint>
#include <utility>
#include <vector>

#include "rfim/disorder.hpp"
#include "rfim/groundstate.hpp"
#include "rfim/lattice.hpp"

namespace test_support {

inline std::uint32_t pick(std::uint64_t seed, std::uint32_t a, std::uint32_t b,
                          std::uint32_t n) {
    return static_cast<std::uint32_t>(rfim::keyed_u64(seed, a, b, 0x7E57u) % n);
}

// connected region of n sites grown from the origin
inline rfim::Region random_connected_region(std::uint64_t seed, int n) {
    std::vector<rfim::Site> sites = {{0, 0}};
    auto contains = [&](const rfim::Site& s) {
        for (const auto& t : sites)
            if (t == s) return true;
        return false;
    };
    std::uint32_t step = 0;
    while (static_cast<int>(sites.size()) < n) {
        const auto& base = sites[pick(seed, step, 0, static_cast<std::uint32_t>(sites.size()))];
        static const int dx[4] = {1, -1, 0, 0};
        static const int dy[4] = {0, 0, 1, -1};
        int dir = static_cast<int>(pick(seed, step, 1, 4));
        rfim::Site next{base.x + dx[dir], base.y + dy[dir]};
        if (!contains(next)) sites.push_back(next);
        ++step;
    }
    return rfim::Region::custom(std::move(sites));
}

inline rfim::BoundaryCondition random_bc(const rfim::Region& region,
                                         const rfim::CouplingSpec& coupling,
                                         std::uint64_t seed) {
    return rfim::BoundaryCondition::build(region, coupling, [&](const rfim::Site& s) {
        return rfim::keyed_uniform(seed, static_cast<std::uint32_t>(s.x),
                                   static_cast<std::uint32_t>(s.y), 0xBC) < 0.5
                   ? -1
                   : 1;
    });
}

// tau_minus <= tau_plus pointwise, not identical in general
inline std::pair<rfim::BoundaryCondition, rfim::BoundaryCondition> comparable_bc_pair(
    const rfim::Region& region, const rfim::CouplingSpec& coupling, std::uint64_t seed) {
    auto draw = [&](const rfim::Site& s, std::uint32_t stream) {
        return rfim::keyed_uniform(seed, static_cast<std::uint32_t>(s.x),
                                   static_cast<std::uint32_t>(s.y), stream) < 0.5
                   ? -1
                   : 1;
    };
    auto plus = rfim::BoundaryCondition::build(region, coupling, [&](const rfim::Site& s) {
        return std::max(draw(s, 0xB1), draw(s, 0xB2));
    });
    auto minus = rfim::BoundaryCondition::build(region, coupling, [&](const rfim::Site& s) {
        return std::min(draw(s, 0xB1), draw(s, 0xB2));
    });
    return {minus, plus};
}

}  // namespace test_support
