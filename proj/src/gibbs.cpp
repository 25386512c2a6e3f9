#include "rfim/gibbs.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rfim {

namespace {

// ---------------------------------------------------------------------------
// Exact enumeration engine
// ---------------------------------------------------------------------------

// Reduced system over the free sites: clamped spins and boundary spins are
// folded into per-site effective fields and a constant energy offset.
struct EnumSystem {
    std::vector<int> free_index;    // region index of each free site
    std::vector<double> theta;      // effective field per free site
    std::vector<std::vector<std::pair<int, double>>> neighbors;  // free-free
    double const_energy = 0.0;
};

EnumSystem build_enum_system(const Region& region, const BoundaryCondition& bc,
                             const CouplingSpec& coupling, const FieldSample& field,
                             const DisorderParams& params,
                             const std::vector<Site>& clamp_sites,
                             const std::vector<std::int8_t>& clamp_spins) {
    if (clamp_sites.size() != clamp_spins.size())
        throw std::invalid_argument("clamp sites/spins size mismatch");
    if (!field.region.contains_region(region))
        throw std::domain_error("field does not cover region");

    std::vector<std::int8_t> clamp(region.size(), 0);  // 0 = free
    for (std::size_t k = 0; k < clamp_sites.size(); ++k) {
        auto i = region.index_of(clamp_sites[k]);
        if (i < 0) throw std::domain_error("clamp site not in region");
        if (clamp_spins[k] != 1 && clamp_spins[k] != -1)
            throw std::invalid_argument("clamp spins must be +-1");
        clamp[static_cast<std::size_t>(i)] = clamp_spins[k];
    }

    EnumSystem sys;
    std::vector<int> free_slot(region.size(), -1);
    for (std::size_t i = 0; i < region.size(); ++i) {
        if (clamp[i] == 0) {
            free_slot[i] = static_cast<int>(sys.free_index.size());
            sys.free_index.push_back(static_cast<int>(i));
        }
    }
    sys.theta.assign(sys.free_index.size(), 0.0);
    sys.neighbors.resize(sys.free_index.size());

    for (std::size_t i = 0; i < region.size(); ++i) {
        const Site u = region.site(i);
        const double site_field =
            params.h + params.epsilon * field.values[static_cast<std::size_t>(field.region.index_of(u))];
        if (clamp[i] == 0)
            sys.theta[static_cast<std::size_t>(free_slot[i])] += site_field;
        else
            sys.const_energy -= site_field * clamp[i];

        for (const auto& [off, j] : coupling.offsets()) {
            const Site v{u.x + off.x, u.y + off.y};
            auto iv = region.index_of(v);
            if (iv < 0) {
                const double tau = bc.spin_at(v);
                if (clamp[i] == 0)
                    sys.theta[static_cast<std::size_t>(free_slot[i])] += j * tau;
                else
                    sys.const_energy -= j * tau * clamp[i];
                continue;
            }
            const auto jv = static_cast<std::size_t>(iv);
            if (!SiteOrder{}(u, v)) continue;  // count internal pairs once
            if (clamp[i] == 0 && clamp[jv] == 0) {
                sys.neighbors[static_cast<std::size_t>(free_slot[i])].push_back(
                    {free_slot[jv], j});
                sys.neighbors[static_cast<std::size_t>(free_slot[jv])].push_back(
                    {free_slot[i], j});
            } else if (clamp[i] == 0) {
                sys.theta[static_cast<std::size_t>(free_slot[i])] += j * clamp[jv];
            } else if (clamp[jv] == 0) {
                sys.theta[static_cast<std::size_t>(free_slot[jv])] += j * clamp[i];
            } else {
                sys.const_energy -= j * clamp[i] * clamp[jv];
            }
        }
    }
    return sys;
}

double enum_energy(const EnumSystem& sys, const std::vector<std::int8_t>& spins) {
    double energy = 0.0;
    for (std::size_t i = 0; i < sys.theta.size(); ++i) {
        for (const auto& [k, j] : sys.neighbors[i])
            if (k > static_cast<int>(i)) energy -= j * spins[i] * spins[static_cast<std::size_t>(k)];
        energy -= sys.theta[i] * spins[i];
    }
    return energy;
}

// Gray-code pass over all configurations of the reduced system, reporting
// the partition function relative to the minimal energy and per-site
// magnetization sums.
struct EnumAccumulation {
    double min_energy = 0.0;
    double z_rel = 0.0;                // sum of exp(-(E - min)/T)
    std::vector<double> spin_weight;   // sum of w * sigma_v
};

EnumAccumulation enumerate_gibbs(const EnumSystem& sys, double temperature) {
    const std::size_t n = sys.theta.size();
    const std::uint64_t total = std::uint64_t{1} << n;

    std::vector<std::int8_t> spins(n, -1);
    double energy = enum_energy(sys, spins);
    double min_energy = energy;
    for (std::uint64_t k = 1; k < total; ++k) {
        const unsigned b = static_cast<unsigned>(std::countr_zero(k));
        double local = sys.theta[b];
        for (const auto& [iv, j] : sys.neighbors[b]) local += j * spins[static_cast<std::size_t>(iv)];
        energy += 2.0 * spins[b] * local;
        spins[b] = static_cast<std::int8_t>(-spins[b]);
        min_energy = std::min(min_energy, energy);
    }

    EnumAccumulation acc;
    acc.min_energy = min_energy;
    acc.spin_weight.assign(n, 0.0);

    // second pass: identical walk; per-site sums via segment bookkeeping
    // (sigma_v is piecewise constant along the walk, so each flip settles
    // the finished segment with the cumulative weight)
    std::fill(spins.begin(), spins.end(), static_cast<std::int8_t>(-1));
    energy = enum_energy(sys, spins);
    const double beta = 1.0 / temperature;
    double cumulative = std::exp(-(energy - min_energy) * beta);
    std::vector<double> last_cumulative(n, 0.0);
    for (std::uint64_t k = 1; k < total; ++k) {
        const unsigned b = static_cast<unsigned>(std::countr_zero(k));
        double local = sys.theta[b];
        for (const auto& [iv, j] : sys.neighbors[b]) local += j * spins[static_cast<std::size_t>(iv)];
        energy += 2.0 * spins[b] * local;
        acc.spin_weight[b] += spins[b] * (cumulative - last_cumulative[b]);
        last_cumulative[b] = cumulative;
        spins[b] = static_cast<std::int8_t>(-spins[b]);
        cumulative += std::exp(-(energy - min_energy) * beta);
    }
    for (std::size_t v = 0; v < n; ++v)
        acc.spin_weight[v] += spins[v] * (cumulative - last_cumulative[v]);
    acc.z_rel = cumulative;
    return acc;
}

constexpr std::size_t kEnumBudget = 22;

// ---------------------------------------------------------------------------
// Row-transfer engine (nearest-neighbor couplings)
// ---------------------------------------------------------------------------

constexpr int kMaxRowWidth = 20;

struct TransferRow {
    int y = 0;
    std::vector<int> region_index;  // x ascending
    std::vector<int> xs;
};

// apply v' = M v along one bit: m[row][col] with spin(bit=0) = -1
void apply_2x2(std::vector<double>& v, unsigned bit, double m00, double m01, double m10,
               double m11) {
    const std::size_t stride = std::size_t{1} << bit;
    for (std::size_t base = 0; base < v.size(); base += 2 * stride) {
        for (std::size_t i = base; i < base + stride; ++i) {
            const double lo = v[i];
            const double hi = v[i + stride];
            v[i] = m00 * lo + m01 * hi;
            v[i + stride] = m10 * lo + m11 * hi;
        }
    }
}

std::vector<double> contract_bit(const std::vector<double>& v, unsigned bit) {
    const std::size_t stride = std::size_t{1} << bit;
    std::vector<double> out(v.size() / 2);
    std::size_t w = 0;
    for (std::size_t base = 0; base < v.size(); base += 2 * stride)
        for (std::size_t i = base; i < base + stride; ++i) out[w++] = v[i] + v[i + stride];
    return out;
}

std::vector<double> expand_bit(const std::vector<double>& v, unsigned bit) {
    const std::size_t stride = std::size_t{1} << bit;
    std::vector<double> out(v.size() * 2);
    std::size_t r = 0;
    for (std::size_t base = 0; base < out.size(); base += 2 * stride) {
        for (std::size_t i = base; i < base + stride; ++i) {
            out[i] = v[r];
            out[i + stride] = v[r];
            ++r;
        }
    }
    return out;
}

double rescale(std::vector<double>& v) {
    double peak = 0.0;
    for (double x : v) peak = std::max(peak, std::fabs(x));
    if (peak <= 0.0) throw std::runtime_error("transfer engine: vanishing row vector");
    for (double& x : v) x /= peak;
    return std::log(peak);
}

class TransferEngine {
public:
    TransferEngine(const Region& region, const BoundaryCondition& bc,
                   const CouplingSpec& coupling, const FieldSample& field,
                   const DisorderParams& params)
        : region_(region), beta_(1.0 / params.temperature) {
        if (!(params.temperature > 0.0))
            throw std::domain_error("transfer engine requires T > 0");
        if (coupling.range() != 1)
            throw std::domain_error("transfer engine requires nearest-neighbor couplings");
        jx_ = coupling.strength(1, 0);
        jy_ = coupling.strength(0, 1);

        // group region sites into rows (region order is row-major)
        for (std::size_t i = 0; i < region.size(); ++i) {
            const Site s = region.site(i);
            if (rows_.empty() || rows_.back().y != s.y) rows_.push_back({s.y, {}, {}});
            rows_.back().region_index.push_back(static_cast<int>(i));
            rows_.back().xs.push_back(s.x);
        }
        for (const auto& row : rows_) {
            if (row.xs.size() > kMaxRowWidth)
                throw std::domain_error("transfer engine: row width exceeds budget");
        }

        theta_.resize(region.size());
        for (std::size_t i = 0; i < region.size(); ++i) {
            const Site u = region.site(i);
            double t = params.h +
                       params.epsilon *
                           field.values[static_cast<std::size_t>(field.region.index_of(u))];
            for (const auto& [off, j] : coupling.offsets()) {
                const Site v{u.x + off.x, u.y + off.y};
                if (!region.contains(v)) t += j * bc.spin_at(v);
            }
            theta_[i] = t;
        }
        run_forward_backward();
    }

    double log_partition() const { return log_partition_; }

    std::vector<double> magnetizations() const {
        std::vector<double> mag(region_.size(), 0.0);
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            const auto& row = rows_[r];
            std::vector<double> joint(forward_[r].size());
            double norm = 0.0;
            for (std::size_t s = 0; s < joint.size(); ++s) {
                joint[s] = forward_[r][s] * backward_[r][s];
                norm += joint[s];
            }
            for (std::size_t b = 0; b < row.region_index.size(); ++b) {
                double sum = 0.0;
                for (std::size_t s = 0; s < joint.size(); ++s)
                    sum += ((s >> b) & 1u) ? joint[s] : -joint[s];
                mag[static_cast<std::size_t>(row.region_index[b])] = sum / norm;
            }
        }
        return mag;
    }

    double pair_expectation(const Site& a, const Site& b) const {
        auto ia = region_.index_of(a);
        auto ib = region_.index_of(b);
        if (ia < 0 || ib < 0) throw std::domain_error("pair site not in region");
        auto locate = [&](int region_index) {
            for (std::size_t r = 0; r < rows_.size(); ++r) {
                const auto& idx = rows_[r].region_index;
                for (std::size_t k = 0; k < idx.size(); ++k)
                    if (idx[k] == region_index) return std::pair<std::size_t, unsigned>{r, static_cast<unsigned>(k)};
            }
            throw std::logic_error("row lookup failed");
        };
        if (ia == ib) return 1.0;
        auto [ra, bita] = locate(static_cast<int>(ia));
        auto [rb, bitb] = locate(static_cast<int>(ib));
        if (ra > rb) {
            std::swap(ra, rb);
            std::swap(bita, bitb);
        }

        auto signed_copy = [](const std::vector<double>& v, unsigned bit) {
            std::vector<double> out = v;
            apply_2x2(out, bit, -1.0, 0.0, 0.0, 1.0);
            return out;
        };

        if (ra == rb) {
            std::vector<double> g = signed_copy(forward_[ra], bita);
            if (bita != bitb) apply_2x2(g, bitb, -1.0, 0.0, 0.0, 1.0);
            double num = 0.0, den = 0.0;
            for (std::size_t s = 0; s < g.size(); ++s) {
                num += g[s] * backward_[ra][s];
                den += forward_[ra][s] * backward_[ra][s];
            }
            return num / den;
        }

        std::vector<double> g = signed_copy(forward_[ra], bita);
        double g_scale = forward_scale_[ra];
        for (std::size_t r = ra + 1; r <= rb; ++r) {
            g = forward_step(std::move(g), r - 1, r);
            g_scale += rescale(g);
        }
        apply_2x2(g, bitb, -1.0, 0.0, 0.0, 1.0);
        double num = 0.0, den = 0.0;
        for (std::size_t s = 0; s < g.size(); ++s) {
            num += g[s] * backward_[rb][s];
            den += forward_[rb][s] * backward_[rb][s];
        }
        return std::exp(g_scale - forward_scale_[rb]) * num / den;
    }

private:
    // weight factors of row r alone: fields and horizontal bonds
    void apply_row_diagonal(std::vector<double>& v, std::size_t r) const {
        const auto& row = rows_[r];
        for (std::size_t b = 0; b < row.region_index.size(); ++b) {
            const double t = theta_[static_cast<std::size_t>(row.region_index[b])];
            apply_2x2(v, static_cast<unsigned>(b), std::exp(-beta_ * t), 0.0, 0.0,
                      std::exp(beta_ * t));
        }
        if (jx_ == 0.0) return;
        const double c = std::exp(beta_ * jx_), d = std::exp(-beta_ * jx_);
        for (std::size_t b = 0; b + 1 < row.xs.size(); ++b) {
            if (row.xs[b + 1] != row.xs[b] + 1) continue;
            const std::size_t lo = std::size_t{1} << b;
            const std::size_t hi = std::size_t{1} << (b + 1);
            for (std::size_t s = 0; s < v.size(); ++s) {
                const bool sa = s & lo, sb = s & hi;
                v[s] *= (sa == sb) ? c : d;
            }
        }
    }

    // transfer a vector over row `from`'s canonical layout to row `to`'s,
    // applying vertical bonds and row `to`'s diagonal factors
    std::vector<double> forward_step(std::vector<double> v, std::size_t from,
                                     std::size_t to) const {
        const auto& old_row = rows_[from];
        const auto& new_row = rows_[to];
        const bool adjacent = (new_row.y == old_row.y + 1) && jy_ != 0.0;

        // contract columns absent from the new row (descending keeps bits valid)
        std::vector<int> xs;  // live axes, x per bit
        xs.reserve(old_row.xs.size());
        for (int x : old_row.xs) xs.push_back(x);
        for (int b = static_cast<int>(xs.size()) - 1; b >= 0; --b) {
            const bool shared = adjacent && std::binary_search(new_row.xs.begin(),
                                                               new_row.xs.end(), xs[static_cast<std::size_t>(b)]);
            if (!shared) {
                v = contract_bit(v, static_cast<unsigned>(b));
                xs.erase(xs.begin() + b);
            }
        }
        // shared columns: vertical bond converts the axis to the new row's spin
        const double c = std::exp(beta_ * jy_), d = std::exp(-beta_ * jy_);
        for (std::size_t b = 0; b < xs.size(); ++b)
            apply_2x2(v, static_cast<unsigned>(b), c, d, d, c);
        // expand columns new to this row, keeping x ascending
        for (std::size_t k = 0; k < new_row.xs.size(); ++k) {
            if (k < xs.size() && xs[k] == new_row.xs[k]) continue;
            v = expand_bit(v, static_cast<unsigned>(k));
            xs.insert(xs.begin() + static_cast<int>(k), new_row.xs[k]);
        }
        apply_row_diagonal(v, to);
        return v;
    }

    std::vector<double> backward_step(std::vector<double> v, std::size_t from,
                                      std::size_t to) const {
        // from = row r+1 canonical, to = row r canonical
        const auto& hi_row = rows_[from];
        const auto& lo_row = rows_[to];
        const bool adjacent = (hi_row.y == lo_row.y + 1) && jy_ != 0.0;

        apply_row_diagonal(v, from);
        std::vector<int> xs = hi_row.xs;
        for (int b = static_cast<int>(xs.size()) - 1; b >= 0; --b) {
            const bool shared = adjacent && std::binary_search(lo_row.xs.begin(), lo_row.xs.end(),
                                                               xs[static_cast<std::size_t>(b)]);
            if (!shared) {
                v = contract_bit(v, static_cast<unsigned>(b));
                xs.erase(xs.begin() + b);
            }
        }
        const double c = std::exp(beta_ * jy_), d = std::exp(-beta_ * jy_);
        for (std::size_t b = 0; b < xs.size(); ++b)
            apply_2x2(v, static_cast<unsigned>(b), c, d, d, c);
        for (std::size_t k = 0; k < lo_row.xs.size(); ++k) {
            if (k < xs.size() && xs[k] == lo_row.xs[k]) continue;
            v = expand_bit(v, static_cast<unsigned>(k));
            xs.insert(xs.begin() + static_cast<int>(k), lo_row.xs[k]);
        }
        return v;
    }

    void run_forward_backward() {
        const std::size_t nrows = rows_.size();
        forward_.resize(nrows);
        backward_.resize(nrows);
        forward_scale_.resize(nrows);

        std::vector<double> v(std::size_t{1} << rows_[0].xs.size(), 1.0);
        apply_row_diagonal(v, 0);
        double scale = rescale(v);
        forward_[0] = v;
        forward_scale_[0] = scale;
        for (std::size_t r = 1; r < nrows; ++r) {
            v = forward_step(std::move(v), r - 1, r);
            scale += rescale(v);
            forward_[r] = v;
            forward_scale_[r] = scale;
        }
        double tail = 0.0;
        for (double x : forward_.back()) tail += x;
        log_partition_ = std::log(tail) + scale;

        std::vector<double> b(std::size_t{1} << rows_[nrows - 1].xs.size(), 1.0);
        backward_[nrows - 1] = b;
        for (std::size_t r = nrows - 1; r > 0; --r) {
            b = backward_step(std::move(b), r, r - 1);
            rescale(b);
            backward_[r - 1] = b;
        }
    }

    Region region_;
    double beta_;
    double jx_ = 0.0, jy_ = 0.0;
    std::vector<TransferRow> rows_;
    std::vector<double> theta_;
    std::vector<std::vector<double>> forward_;
    std::vector<std::vector<double>> backward_;
    std::vector<double> forward_scale_;
    double log_partition_ = 0.0;
};

}  // namespace

ExactGibbsResult exact_gibbs_clamped(const Region& region, const BoundaryCondition& bc,
                                     const CouplingSpec& coupling, const FieldSample& field,
                                     const DisorderParams& params,
                                     const std::vector<Site>& clamp_sites,
                                     const std::vector<std::int8_t>& clamp_spins) {
    params.validate();
    if (!(params.temperature > 0.0))
        throw std::domain_error("exact_gibbs requires T > 0 (use the ground-state module at T = 0)");
    auto sys = build_enum_system(region, bc, coupling, field, params, clamp_sites, clamp_spins);
    if (sys.free_index.size() > kEnumBudget)
        throw std::domain_error("exact_gibbs: region exceeds the enumeration budget");

    auto acc = enumerate_gibbs(sys, params.temperature);

    ExactGibbsResult result;
    result.log_partition =
        -(acc.min_energy + sys.const_energy) / params.temperature + std::log(acc.z_rel);
    result.magnetization.assign(region.size(), 0.0);
    for (std::size_t k = 0; k < clamp_sites.size(); ++k)
        result.magnetization[static_cast<std::size_t>(region.index_of(clamp_sites[k]))] =
            clamp_spins[k];
    for (std::size_t f = 0; f < sys.free_index.size(); ++f)
        result.magnetization[static_cast<std::size_t>(sys.free_index[f])] =
            acc.spin_weight[f] / acc.z_rel;
    return result;
}

ExactGibbsResult exact_gibbs(const Region& region, const BoundaryCondition& bc,
                             const CouplingSpec& coupling, const FieldSample& field,
                             const DisorderParams& params) {
    return exact_gibbs_clamped(region, bc, coupling, field, params, {}, {});
}

ExactGibbsResult transfer_gibbs(const Region& region, const BoundaryCondition& bc,
                                const CouplingSpec& coupling, const FieldSample& field,
                                const DisorderParams& params) {
    params.validate();
    TransferEngine engine(region, bc, coupling, field, params);
    ExactGibbsResult result;
    result.log_partition = engine.log_partition();
    result.magnetization = engine.magnetizations();
    return result;
}

ExactGibbsResult exact_engine(const Region& region, const BoundaryCondition& bc,
                              const CouplingSpec& coupling, const FieldSample& field,
                              const DisorderParams& params) {
    if (region.size() <= kEnumBudget)
        return exact_gibbs(region, bc, coupling, field, params);
    return transfer_gibbs(region, bc, coupling, field, params);
}

double transfer_pair_expectation(const Region& region, const BoundaryCondition& bc,
                                 const CouplingSpec& coupling, const FieldSample& field,
                                 const DisorderParams& params, const Site& u, const Site& v) {
    params.validate();
    TransferEngine engine(region, bc, coupling, field, params);
    return engine.pair_expectation(u, v);
}

CoupledChains coupled_heat_bath(const Region& region, const CouplingSpec& coupling,
                                const FieldSample& field, const DisorderParams& params,
                                int sweeps, int burn_in, std::uint64_t chain_seed) {
    params.validate();
    if (!(params.temperature > 0.0))
        throw std::domain_error("coupled_heat_bath requires T > 0");
    const int n = static_cast<int>(region.size());
    if (n == 0) throw std::invalid_argument("empty region");

    MinCutSolver assembler(region, coupling);  // reuse field assembly
    auto theta_plus = assembler.assemble_field(
        BoundaryCondition::uniform(region, coupling, +1), field, params);
    auto theta_minus = assembler.assemble_field(
        BoundaryCondition::uniform(region, coupling, -1), field, params);

    // neighbor lists
    std::vector<std::vector<std::pair<int, double>>> neighbors(region.size());
    for (std::size_t i = 0; i < region.size(); ++i) {
        const Site u = region.site(i);
        for (const auto& [off, j] : coupling.offsets()) {
            auto iv = region.index_of(Site{u.x + off.x, u.y + off.y});
            if (iv >= 0) neighbors[i].push_back({static_cast<int>(iv), j});
        }
    }

    std::vector<std::int8_t> up(region.size(), 1), down(region.size(), -1);
    const double beta = 1.0 / params.temperature;
    auto update = [&](std::vector<std::int8_t>& spins, const std::vector<double>& theta,
                      std::size_t i, double u01) {
        double local = theta[i];
        for (const auto& [iv, j] : neighbors[i]) local += j * spins[static_cast<std::size_t>(iv)];
        const double p_plus = 1.0 / (1.0 + std::exp(-2.0 * beta * local));
        spins[i] = u01 < p_plus ? 1 : -1;
    };

    auto disagreements = [&]() {
        int d = 0;
        for (std::size_t i = 0; i < region.size(); ++i)
            if (up[i] != down[i]) ++d;
        return d;
    };

    // burn-in: fixed count, or plateau detection on the disagreement count
    // over 100-sweep windows, capped at 10 |region| sweeps
    int sweep = 0;
    auto run_sweep = [&]() {
        for (std::size_t i = 0; i < region.size(); ++i) {
            const double u01 = keyed_uniform(chain_seed, static_cast<std::uint32_t>(sweep),
                                             static_cast<std::uint32_t>(i), 0xCA1Cu);
            update(up, theta_plus, i, u01);
            update(down, theta_minus, i, u01);
        }
        ++sweep;
    };

    if (burn_in >= 0) {
        for (int s = 0; s < burn_in; ++s) run_sweep();
    } else {
        const int cap = 10 * n;
        double previous_window = std::numeric_limits<double>::infinity();
        while (sweep < cap) {
            double window = 0.0;
            for (int s = 0; s < 100 && sweep < cap; ++s) {
                run_sweep();
                window += disagreements();
            }
            window /= 100.0;
            if (window >= previous_window - 0.01 * std::max(1.0, previous_window)) break;
            previous_window = window;
        }
    }
    const int actual_burn_in = sweep;

    if (sweeps <= actual_burn_in)
        throw std::invalid_argument("coupled_heat_bath: sweeps must exceed burn-in");
    const int samples = sweeps - actual_burn_in;

    const int batches = 20;
    std::vector<double> sum_up(region.size(), 0.0), sum_down(region.size(), 0.0);
    std::vector<double> batch_up(region.size() * batches, 0.0),
        batch_down(region.size() * batches, 0.0);
    std::vector<int> batch_count(batches, 0);
    bool ordered = true;
    for (int s = 0; s < samples; ++s) {
        run_sweep();
        const int batch = std::min(batches - 1, s * batches / samples);
        ++batch_count[static_cast<std::size_t>(batch)];
        for (std::size_t i = 0; i < region.size(); ++i) {
            if (up[i] < down[i]) ordered = false;
            sum_up[i] += up[i];
            sum_down[i] += down[i];
            batch_up[i * batches + static_cast<std::size_t>(batch)] += up[i];
            batch_down[i * batches + static_cast<std::size_t>(batch)] += down[i];
        }
    }

    auto finalize = [&](const std::vector<double>& sums, const std::vector<double>& batch_sums) {
        MagnetizationField out;
        out.sweeps = sweeps;
        out.burn_in = actual_burn_in;
        out.estimates.resize(region.size());
        out.std_error.resize(region.size());
        for (std::size_t i = 0; i < region.size(); ++i) {
            out.estimates[i] = sums[i] / samples;
            double mean_sq = 0.0;
            int used = 0;
            for (int b = 0; b < batches; ++b) {
                const int count = batch_count[static_cast<std::size_t>(b)];
                if (count == 0) continue;
                ++used;
                const double m = batch_sums[i * batches + static_cast<std::size_t>(b)] / count;
                const double d = m - out.estimates[i];
                mean_sq += d * d;
            }
            out.std_error[i] = used > 1 ? std::sqrt(mean_sq / (used * (used - 1.0))) : 1.0;
        }
        return out;
    };

    CoupledChains chains;
    chains.plus = finalize(sum_up, batch_up);
    chains.minus = finalize(sum_down, batch_down);
    chains.ordered = ordered;
    return chains;
}

ChainObservables heat_bath_single(const Region& region, const CouplingSpec& coupling,
                                  const FieldSample& field, const DisorderParams& params,
                                  int bc_spin, int sweeps, int burn_in,
                                  std::uint64_t chain_seed,
                                  const std::vector<std::pair<Site, Site>>& pairs) {
    params.validate();
    if (!(params.temperature > 0.0))
        throw std::domain_error("heat_bath_single requires T > 0");
    if (sweeps <= burn_in || burn_in < 0)
        throw std::invalid_argument("heat_bath_single: need 0 <= burn_in < sweeps");

    MinCutSolver assembler(region, coupling);
    auto theta = assembler.assemble_field(
        BoundaryCondition::uniform(region, coupling, bc_spin), field, params);
    std::vector<std::vector<std::pair<int, double>>> neighbors(region.size());
    for (std::size_t i = 0; i < region.size(); ++i) {
        const Site u = region.site(i);
        for (const auto& [off, j] : coupling.offsets()) {
            auto iv = region.index_of(Site{u.x + off.x, u.y + off.y});
            if (iv >= 0) neighbors[i].push_back({static_cast<int>(iv), j});
        }
    }
    std::vector<std::pair<std::size_t, std::size_t>> pair_index;
    pair_index.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
        auto ia = region.index_of(a);
        auto ib = region.index_of(b);
        if (ia < 0 || ib < 0) throw std::domain_error("pair site not in region");
        pair_index.push_back({static_cast<std::size_t>(ia), static_cast<std::size_t>(ib)});
    }

    std::vector<std::int8_t> spins(region.size(), static_cast<std::int8_t>(bc_spin));
    const double beta = 1.0 / params.temperature;
    const int samples = sweeps - burn_in;
    const int batches = 20;
    std::vector<double> sums(region.size(), 0.0);
    std::vector<double> batch_sums(region.size() * batches, 0.0);
    std::vector<int> batch_count(batches, 0);
    std::vector<double> pair_sums(pairs.size(), 0.0);

    for (int sweep = 0; sweep < sweeps; ++sweep) {
        for (std::size_t i = 0; i < region.size(); ++i) {
            double local = theta[i];
            for (const auto& [iv, j] : neighbors[i]) local += j * spins[static_cast<std::size_t>(iv)];
            const double p_plus = 1.0 / (1.0 + std::exp(-2.0 * beta * local));
            const double u01 = keyed_uniform(chain_seed, static_cast<std::uint32_t>(sweep),
                                             static_cast<std::uint32_t>(i), 0xCA1Cu);
            spins[i] = u01 < p_plus ? 1 : -1;
        }
        if (sweep < burn_in) continue;
        const int s = sweep - burn_in;
        const int batch = std::min(batches - 1, s * batches / samples);
        ++batch_count[static_cast<std::size_t>(batch)];
        for (std::size_t i = 0; i < region.size(); ++i) {
            sums[i] += spins[i];
            batch_sums[i * batches + static_cast<std::size_t>(batch)] += spins[i];
        }
        for (std::size_t p = 0; p < pair_index.size(); ++p)
            pair_sums[p] += spins[pair_index[p].first] * spins[pair_index[p].second];
    }

    ChainObservables out;
    out.sites.sweeps = sweeps;
    out.sites.burn_in = burn_in;
    out.sites.estimates.resize(region.size());
    out.sites.std_error.resize(region.size());
    for (std::size_t i = 0; i < region.size(); ++i) {
        out.sites.estimates[i] = sums[i] / samples;
        double mean_sq = 0.0;
        int used = 0;
        for (int b = 0; b < batches; ++b) {
            const int count = batch_count[static_cast<std::size_t>(b)];
            if (count == 0) continue;
            ++used;
            const double m = batch_sums[i * batches + static_cast<std::size_t>(b)] / count;
            mean_sq += (m - out.sites.estimates[i]) * (m - out.sites.estimates[i]);
        }
        out.sites.std_error[i] = used > 1 ? std::sqrt(mean_sq / (used * (used - 1.0))) : 1.0;
    }
    out.pair_mean.resize(pairs.size());
    for (std::size_t p = 0; p < pairs.size(); ++p) out.pair_mean[p] = pair_sums[p] / samples;
    return out;
}

namespace {

struct PosTStates {
    std::vector<double> plus_mag, minus_mag;
    std::vector<double> plus_err, minus_err;
};

PosTStates states_for(const Region& region, const CouplingSpec& coupling,
                      const FieldSample& field, const DisorderParams& params,
                      const GibbsEngine& engine) {
    PosTStates out;
    if (engine.kind == GibbsEngine::Kind::Exact) {
        auto plus = exact_engine(region, BoundaryCondition::uniform(region, coupling, +1),
                                 coupling, field, params);
        auto minus = exact_engine(region, BoundaryCondition::uniform(region, coupling, -1),
                                  coupling, field, params);
        out.plus_mag = std::move(plus.magnetization);
        out.minus_mag = std::move(minus.magnetization);
        out.plus_err.assign(region.size(), 0.0);
        out.minus_err.assign(region.size(), 0.0);
    } else {
        auto chains = coupled_heat_bath(region, coupling, field, params, engine.sweeps,
                                        engine.burn_in, engine.chain_seed);
        out.plus_mag = std::move(chains.plus.estimates);
        out.minus_mag = std::move(chains.minus.estimates);
        out.plus_err = std::move(chains.plus.std_error);
        out.minus_err = std::move(chains.minus.std_error);
    }
    return out;
}

}  // namespace

EngineValue disagreement_posT(int ell, const FieldSample& field, const DisorderParams& params,
                              const CouplingSpec& coupling, const GibbsEngine& engine) {
    if (ell < 1) throw std::invalid_argument("ell must be >= 1");
    Region ball = Region::ball({0, 0}, 3 * ell);
    auto states = states_for(ball, coupling, field, params, engine);
    EngineValue result;
    double var = 0.0;
    for (std::size_t i = 0; i < ball.size(); ++i) {
        if (graph_distance(ball.site(i), {0, 0}) > ell) continue;
        result.value += 0.5 * (states.plus_mag[i] - states.minus_mag[i]);
        var += 0.25 * (states.plus_err[i] * states.plus_err[i] +
                       states.minus_err[i] * states.minus_err[i]);
    }
    result.std_error = std::sqrt(var);
    return result;
}

EngineValue separating_vertex_strength_posT(int ell, const FieldSample& field,
                                            const DisorderParams& params,
                                            const CouplingSpec& coupling,
                                            const GibbsEngine& engine) {
    if (ell < 1) throw std::invalid_argument("ell must be >= 1");
    Region annulus = Region::annulus(ell);
    auto states = states_for(annulus, coupling, field, params, engine);

    Region mid = Region::ball({0, 0}, 2 * ell);
    auto ring = vertex_boundary(mid, coupling);
    const bool isotropic_nn =
        coupling.range() == 1 && coupling.strength(1, 0) == coupling.strength(0, 1);

    EngineValue result;
    double var = 0.0;
    for (const Site& v : ring) {
        auto iv = annulus.index_of(v);
        if (iv < 0) continue;
        const auto i = static_cast<std::size_t>(iv);
        double weight;
        if (isotropic_nn) {
            weight = 0.5 * coupling.strength(1, 0);
        } else {
            double crossing = 0.0;  // total strength of edges from v into ball(0,2ell)
            for (const auto& [off, j] : coupling.offsets())
                if (mid.contains(Site{v.x + off.x, v.y + off.y})) crossing += j;
            weight = 0.25 * crossing;
        }
        result.value += weight * (states.plus_mag[i] - states.minus_mag[i]);
        var += weight * weight *
               (states.plus_err[i] * states.plus_err[i] + states.minus_err[i] * states.minus_err[i]);
    }
    result.std_error = std::sqrt(var);
    return result;
}

double surface_tension_posT_exact(int ell, const FieldSample& field,
                                  const DisorderParams& params, const CouplingSpec& coupling) {
    if (ell < 1) throw std::invalid_argument("ell must be >= 1");
    if (!(params.temperature > 0.0))
        throw std::domain_error("positive-temperature surface tension requires T > 0");
    Region annulus = Region::annulus(ell);
    auto log_z = [&](int s_outer, int s_inner) {
        auto bc = BoundaryCondition::mixed_annulus(annulus, coupling, s_outer, s_inner, ell);
        if (annulus.size() <= kEnumBudget)
            return exact_gibbs(annulus, bc, coupling, field, params).log_partition;
        return transfer_gibbs(annulus, bc, coupling, field, params).log_partition;
    };
    return params.temperature *
           (log_z(+1, +1) + log_z(-1, -1) - log_z(+1, -1) - log_z(-1, +1));
}

std::pair<double, double> cross_ratio_check(const std::vector<std::int8_t>& tau,
                                            const FieldSample& field,
                                            const DisorderParams& params,
                                            const CouplingSpec& coupling) {
    Region annulus = Region::annulus(1);
    auto ring = vertex_boundary(Region::ball({0, 0}, 2), coupling);
    if (tau.size() != ring.size())
        throw std::invalid_argument("tau must assign one spin per separating-ring site");

    auto log_z = [&](int s_outer, int s_inner) {
        auto bc = BoundaryCondition::mixed_annulus(annulus, coupling, s_outer, s_inner, 1);
        return exact_gibbs_clamped(annulus, bc, coupling, field, params, ring, tau)
            .log_partition;
    };
    const double lhs = log_z(+1, +1) + log_z(-1, -1);
    const double rhs = log_z(+1, -1) + log_z(-1, +1);
    return {lhs, rhs};
}

IntegralResult surface_tension_posT_integral(int ell, const FieldSample& field,
                                             const DisorderParams& params,
                                             const CouplingSpec& coupling,
                                             const GibbsEngine& engine, double rel_tol) {
    if (ell < 1) throw std::invalid_argument("ell must be >= 1");
    if (!(params.epsilon > 0.0))
        throw std::domain_error("integral representation requires epsilon > 0");
    Region inner = Region::ball({0, 0}, ell);

    // Integrand support: at T = 0 all inner spins are forced once |t| passes
    // the forcing bound; at T > 0 the disagreement decays like
    // exp(-2 eps (|t| - bound) / T) beyond it, so pad the range until the
    // tail is far below the quadrature tolerance.
    double inner_max = 0.0;
    for (const Site& s : inner.sites()) inner_max = std::max(inner_max, std::fabs(field.at(s)));
    const double t_pad = 22.5 * params.temperature / params.epsilon;
    const double t_max = (coupling.total_strength() + std::fabs(params.h)) / params.epsilon +
                         inner_max + 0.5 + t_pad;

    auto integrand = [&](double t) {
        auto shifted = shift_field(field, inner, t);
        return disagreement_posT(ell, shifted, params, coupling, engine);
    };

    // Trapezoid with interval doubling; previous nodes are reused. The
    // integrand's features have width of order max(T, 1) / eps, so the
    // initial grid resolves them rather than trusting a lucky coarse pass.
    const double feature = std::max(params.temperature, 1.0) / params.epsilon;
    int intervals = 16;
    while (intervals < 16384 && (2.0 * t_max / intervals) > 0.25 * feature) intervals *= 2;
    std::vector<EngineValue> nodes(static_cast<std::size_t>(intervals) + 1);
    for (int k = 0; k <= intervals; ++k)
        nodes[static_cast<std::size_t>(k)] = integrand(-t_max + 2.0 * t_max * k / intervals);
    auto estimate = [&]() {
        const double step = 2.0 * t_max / intervals;
        double sum = 0.5 * (nodes.front().value + nodes.back().value);
        double var = 0.25 * (nodes.front().std_error * nodes.front().std_error +
                             nodes.back().std_error * nodes.back().std_error);
        for (int k = 1; k < intervals; ++k) {
            sum += nodes[static_cast<std::size_t>(k)].value;
            var += nodes[static_cast<std::size_t>(k)].std_error *
                   nodes[static_cast<std::size_t>(k)].std_error;
        }
        return std::pair<double, double>{step * sum, step * std::sqrt(var)};
    };

    IntegralResult result;
    auto [value, mc_error] = estimate();
    int evaluations = intervals + 1;
    const int max_intervals = engine.kind == GibbsEngine::Kind::Exact ? 16384 : 2048;
    double change = std::numeric_limits<double>::infinity();
    int settled = 0;  // consecutive refinements below tolerance
    while (intervals < max_intervals) {
        std::vector<EngineValue> refined(2 * static_cast<std::size_t>(intervals) + 1);
        for (int k = 0; k <= intervals; ++k) refined[2 * static_cast<std::size_t>(k)] = nodes[static_cast<std::size_t>(k)];
        const double step = 2.0 * t_max / intervals;
        for (int k = 0; k < intervals; ++k) {
            refined[2 * static_cast<std::size_t>(k) + 1] = integrand(-t_max + step * (k + 0.5));
            ++evaluations;
        }
        nodes = std::move(refined);
        intervals *= 2;
        auto [next, next_err] = estimate();
        change = std::fabs(next - value);
        value = next;
        mc_error = next_err;
        const double goal = engine.kind == GibbsEngine::Kind::Exact
                                ? rel_tol * std::max(1.0, std::fabs(value))
                                : std::max(mc_error, rel_tol * std::fabs(value));
        settled = change <= goal ? settled + 1 : 0;
        if (settled >= 2) break;
    }

    result.value = 2.0 * params.epsilon * value;
    result.std_error = 2.0 * params.epsilon * mc_error;
    result.achieved_rel_tol = change / std::max(1.0, std::fabs(value));
    result.converged = intervals < max_intervals || change <= rel_tol * std::max(1.0, std::fabs(value));
    result.evaluations = evaluations;
    return result;
}

}  // namespace rfim
