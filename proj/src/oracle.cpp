#include "rfim/oracle.hpp"

#include <bit>
#include <limits>
#include <stdexcept>

namespace rfim::oracle {

double direct_energy(const Region& region, const std::vector<std::int8_t>& spins,
                     const BoundaryCondition& bc, const CouplingSpec& coupling,
                     const FieldSample& field, const DisorderParams& params) {
    double energy = 0.0;
    for (std::size_t i = 0; i < region.size(); ++i) {
        const Site u = region.site(i);
        for (const auto& [off, j] : coupling.offsets()) {
            const Site v{u.x + off.x, u.y + off.y};
            auto iv = region.index_of(v);
            if (iv >= 0) {
                if (iv > static_cast<std::ptrdiff_t>(i))
                    energy -= j * spins[i] * spins[static_cast<std::size_t>(iv)];
            } else {
                energy -= j * spins[i] * bc.spin_at(v);
            }
        }
        energy -= (params.h + params.epsilon * field.at(u)) * spins[i];
    }
    return energy;
}

EnumerationResult ground_state(const Region& region, const BoundaryCondition& bc,
                               const CouplingSpec& coupling, const FieldSample& field,
                               const DisorderParams& params) {
    const std::size_t n = region.size();
    if (n == 0 || n > 26) throw std::invalid_argument("oracle handles 1..26 sites");

    // per-site effective field and neighbor lists
    std::vector<double> theta(n);
    std::vector<std::vector<std::pair<int, double>>> neighbors(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Site u = region.site(i);
        theta[i] = params.h + params.epsilon * field.at(u);
        for (const auto& [off, j] : coupling.offsets()) {
            const Site v{u.x + off.x, u.y + off.y};
            auto iv = region.index_of(v);
            if (iv >= 0)
                neighbors[i].push_back({static_cast<int>(iv), j});
            else
                theta[i] += j * bc.spin_at(v);
        }
    }

    std::vector<std::int8_t> spins(n, -1);
    double energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& [iv, j] : neighbors[i])
            if (iv > static_cast<int>(i)) energy -= j * spins[i] * spins[static_cast<std::size_t>(iv)];
        energy -= theta[i] * spins[i];
    }

    double best = energy;
    double second = std::numeric_limits<double>::infinity();
    std::vector<std::int8_t> best_spins = spins;

    // Gray-code walk: configuration k and k+1 differ at bit ctz(k+1)
    const std::uint64_t total = std::uint64_t{1} << n;
    for (std::uint64_t k = 1; k < total; ++k) {
        const unsigned b = static_cast<unsigned>(std::countr_zero(k));
        double local = theta[b];
        for (const auto& [iv, j] : neighbors[b]) local += j * spins[static_cast<std::size_t>(iv)];
        energy += 2.0 * spins[b] * local;
        spins[b] = static_cast<std::int8_t>(-spins[b]);
        if (energy < best) {
            second = best;
            best = energy;
            best_spins = spins;
        } else if (energy < second) {
            second = energy;
        }
    }

    EnumerationResult result;
    result.spins = best_spins;
    result.energy = direct_energy(region, best_spins, bc, coupling, field, params);
    result.second_energy = second;
    return result;
}

}  // namespace rfim::oracle
