#include "rfim/groundstate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace rfim {

namespace {

void check_spin_value(int s, bool allow_free) {
    if (s == 1 || s == -1 || (allow_free && s == 0)) return;
    throw std::invalid_argument("boundary spin must be -1 or +1");
}

}  // namespace

BoundaryCondition BoundaryCondition::uniform(const Region& region,
                                             const CouplingSpec& coupling, int spin) {
    check_spin_value(spin, false);
    return build(region, coupling, [spin](const Site&) { return spin; });
}

BoundaryCondition BoundaryCondition::free(const Region& region, const CouplingSpec& coupling) {
    return build(region, coupling, [](const Site&) { return 0; });
}

BoundaryCondition BoundaryCondition::mixed_annulus(const Region& annulus,
                                                   const CouplingSpec& coupling, int s_outer,
                                                   int s_inner, int inner_radius) {
    check_spin_value(s_outer, false);
    check_spin_value(s_inner, false);
    return build(annulus, coupling, [s_outer, s_inner, inner_radius](const Site& s) {
        return graph_distance(s, Site{0, 0}) <= inner_radius ? s_inner : s_outer;
    });
}

BoundaryCondition BoundaryCondition::build(const Region& region, const CouplingSpec& coupling,
                                           const std::function<int(const Site&)>& fn) {
    BoundaryCondition bc;
    bc.sites_ = vertex_boundary(region, coupling);
    bc.spins_.reserve(bc.sites_.size());
    for (const Site& s : bc.sites_) {
        int spin = fn(s);
        check_spin_value(spin, true);
        bc.spins_.push_back(static_cast<std::int8_t>(spin));
    }
    return bc;
}

int BoundaryCondition::spin_at(const Site& s) const {
    auto it = std::lower_bound(sites_.begin(), sites_.end(), s, SiteOrder{});
    if (it == sites_.end() || !(*it == s))
        throw std::domain_error("boundary condition does not cover site");
    return spins_[static_cast<std::size_t>(it - sites_.begin())];
}

int SpinConfig::at(const Site& s) const {
    auto i = region.index_of(s);
    if (i < 0) throw std::domain_error("site not in config region");
    return spins[static_cast<std::size_t>(i)];
}

std::string SpinConfig::to_text_grid() const {
    if (region.empty()) return "";
    int xmin = region.sites().front().x, xmax = xmin;
    int ymin = region.sites().front().y, ymax = ymin;
    for (const Site& s : region.sites()) {
        xmin = std::min(xmin, s.x);
        xmax = std::max(xmax, s.x);
        ymin = std::min(ymin, s.y);
        ymax = std::max(ymax, s.y);
    }
    std::ostringstream out;
    for (int y = ymax; y >= ymin; --y) {
        for (int x = xmin; x <= xmax; ++x) {
            auto i = region.index_of(Site{x, y});
            out << (i < 0 ? '.' : (spins[static_cast<std::size_t>(i)] > 0 ? '+' : '-'));
        }
        out << '\n';
    }
    return out.str();
}

double hamiltonian_energy(const SpinConfig& config, const BoundaryCondition& bc,
                          const CouplingSpec& coupling, const FieldSample& field,
                          const DisorderParams& params) {
    params.validate();
    const Region& region = config.region;
    if (config.spins.size() != region.size())
        throw std::domain_error("config spins do not match region");
    if (!field.region.contains_region(region))
        throw std::domain_error("field does not cover region");

    double energy = 0.0;
    for (std::size_t i = 0; i < region.size(); ++i) {
        const Site& u = region.site(i);
        const double su = config.spins[i];
        for (const auto& [off, j] : coupling.offsets()) {
            Site v{u.x + off.x, u.y + off.y};
            auto iv = region.index_of(v);
            if (iv >= 0) {
                // internal pair: visit each unordered pair once
                if (SiteOrder{}(u, v)) energy -= j * su * config.spins[static_cast<std::size_t>(iv)];
            } else {
                energy -= j * su * bc.spin_at(v);
            }
        }
        const double eta = field.values[static_cast<std::size_t>(field.region.index_of(u))];
        energy -= (params.h + params.epsilon * eta) * su;
    }
    return energy;
}

MinCutSolver::MinCutSolver(const Region& region, const CouplingSpec& coupling)
    : region_(region), coupling_(coupling), flow_(static_cast<int>(region.size())) {
    for (std::size_t i = 0; i < region_.size(); ++i) {
        const Site& u = region_.site(i);
        for (const auto& [off, j] : coupling_.offsets()) {
            if (!SiteOrder{}(Site{0, 0}, off)) continue;  // each pair once
            Site v{u.x + off.x, u.y + off.y};
            auto iv = region_.index_of(v);
            if (iv < 0) continue;
            pairs_.push_back({static_cast<int>(i), static_cast<int>(iv)});
            pair_strength_.push_back(j);
            // |s_u - s_v| pairwise cost 2J in the binary encoding
            flow_.add_edge(static_cast<int>(i), static_cast<int>(iv), 2.0 * j, 2.0 * j);
        }
    }
    source_cap_.resize(region_.size());
    sink_cap_.resize(region_.size());
}

std::vector<double> MinCutSolver::assemble_field(const BoundaryCondition& bc,
                                                 const FieldSample& field,
                                                 const DisorderParams& params) const {
    params.validate();
    if (!field.region.contains_region(region_))
        throw std::domain_error("field does not cover region");
    std::vector<double> theta(region_.size());
    for (std::size_t i = 0; i < region_.size(); ++i) {
        const Site& u = region_.site(i);
        double t = params.h +
                   params.epsilon * field.values[static_cast<std::size_t>(field.region.index_of(u))];
        for (const auto& [off, j] : coupling_.offsets()) {
            Site v{u.x + off.x, u.y + off.y};
            if (!region_.contains(v)) t += j * bc.spin_at(v);
        }
        theta[i] = t;
    }
    return theta;
}

std::vector<std::int8_t> MinCutSolver::solve(const std::vector<double>& local_field) const {
    if (local_field.size() != region_.size())
        throw std::invalid_argument("local field size mismatch");
    for (std::size_t i = 0; i < region_.size(); ++i) {
        double theta = local_field[i];
        source_cap_[i] = theta > 0.0 ? 2.0 * theta : 0.0;
        sink_cap_[i] = theta < 0.0 ? -2.0 * theta : 0.0;
    }
    flow_.set_terminals(source_cap_, sink_cap_);
    flow_.solve();
    std::vector<std::int8_t> spins(region_.size());
    for (std::size_t i = 0; i < region_.size(); ++i)
        spins[i] = flow_.source_side(static_cast<int>(i)) ? 1 : -1;
    degenerate_ = flow_.cut_degenerate();
    return spins;
}

double MinCutSolver::config_energy(const std::vector<std::int8_t>& spins,
                                   const std::vector<double>& local_field) const {
    double energy = 0.0;
    for (std::size_t p = 0; p < pairs_.size(); ++p)
        energy -= pair_strength_[p] * spins[static_cast<std::size_t>(pairs_[p].first)] *
                  spins[static_cast<std::size_t>(pairs_[p].second)];
    for (std::size_t i = 0; i < region_.size(); ++i) energy -= local_field[i] * spins[i];
    return energy;
}

GroundStateResult minimize(const Region& region, const BoundaryCondition& bc,
                           const CouplingSpec& coupling, const FieldSample& field,
                           const DisorderParams& params) {
    MinCutSolver solver(region, coupling);
    auto theta = solver.assemble_field(bc, field, params);
    auto spins = solver.solve(theta);

    GroundStateResult result;
    result.config = SpinConfig{region, std::move(spins)};
    result.energy = hamiltonian_energy(result.config, bc, coupling, field, params);
    result.unique_within_tol = !solver.last_degenerate();

    // Local-optimality check: no single flip may lower the energy. The
    // boundary-spin part of hamiltonian_energy differs from the pair terms
    // in config_energy only by a constant, so flip gains agree.
    double scale = std::fabs(result.energy);
    for (const auto& v : theta) scale = std::max(scale, std::fabs(v));
    for (std::size_t i = 0; i < region.size(); ++i) {
        double neighbor_sum = 0.0;
        const Site& u = region.site(i);
        for (const auto& [off, j] : coupling.offsets()) {
            auto iv = region.index_of(Site{u.x + off.x, u.y + off.y});
            if (iv >= 0) neighbor_sum += j * result.config.spins[static_cast<std::size_t>(iv)];
        }
        double flip_delta = 2.0 * result.config.spins[i] * (neighbor_sum + theta[i]);
        if (flip_delta < -1e-9 * std::max(1.0, scale))
            throw std::runtime_error("minimize: local optimality violated");
    }
    return result;
}

namespace {

// theta arrays and annulus geometry shared by the observables at scale ell
struct AnnulusProblem {
    Region annulus;
    MinCutSolver solver;
    std::vector<double> theta_pp, theta_mm, theta_pm, theta_mp;

    AnnulusProblem(int ell, const FieldSample& field, const DisorderParams& params,
                   const CouplingSpec& coupling)
        : annulus(Region::annulus(ell)), solver(annulus, coupling) {
        auto make = [&](int s_outer, int s_inner) {
            return solver.assemble_field(
                BoundaryCondition::mixed_annulus(annulus, coupling, s_outer, s_inner, ell),
                field, params);
        };
        theta_pp = make(+1, +1);
        theta_mm = make(-1, -1);
        theta_pm = make(+1, -1);
        theta_mp = make(-1, +1);
    }
};

void require_field_covers(const FieldSample& field, int radius) {
    if (!field.region.contains_region(Region::ball(Site{0, 0}, radius)))
        throw std::domain_error("field region too small for requested scale");
}

}  // namespace

std::vector<Site> disagreement_set(int ell, const FieldSample& field,
                                   const DisorderParams& params, const CouplingSpec& coupling) {
    if (ell < 1) throw std::invalid_argument("ell must be >= 1");
    require_field_covers(field, 3 * ell);
    Region ball = Region::ball(Site{0, 0}, 3 * ell);
    MinCutSolver solver(ball, coupling);
    auto plus = solver.solve(solver.assemble_field(
        BoundaryCondition::uniform(ball, coupling, +1), field, params));
    auto minus = solver.solve(solver.assemble_field(
        BoundaryCondition::uniform(ball, coupling, -1), field, params));
    std::vector<Site> sites;
    for (std::size_t i = 0; i < ball.size(); ++i) {
        if (plus[i] != minus[i] && graph_distance(ball.site(i), Site{0, 0}) <= ell)
            sites.push_back(ball.site(i));
    }
    return sites;
}

int disagreement_count(int ell, const FieldSample& field, const DisorderParams& params,
                       const CouplingSpec& coupling) {
    return static_cast<int>(disagreement_set(ell, field, params, coupling).size());
}

double separating_edge_strength(int ell, const FieldSample& field, const DisorderParams& params,
                                const CouplingSpec& coupling) {
    if (ell < 1) throw std::invalid_argument("ell must be >= 1");
    require_field_covers(field, 3 * ell);
    AnnulusProblem problem(ell, field, params, coupling);
    auto plus = problem.solver.solve(problem.theta_pp);
    auto minus = problem.solver.solve(problem.theta_mm);

    Region mid = Region::ball(Site{0, 0}, 2 * ell);
    double strength = 0.0;
    for (const auto& [u, v] : edge_boundary(mid, coupling)) {
        auto iu = problem.annulus.index_of(u);
        auto iv = problem.annulus.index_of(v);
        if (iu < 0 || iv < 0) continue;  // only edges interior to the annulus separate
        if (plus[static_cast<std::size_t>(iu)] != minus[static_cast<std::size_t>(iu)] &&
            plus[static_cast<std::size_t>(iv)] != minus[static_cast<std::size_t>(iv)])
            strength += coupling.strength(v.x - u.x, v.y - u.y);
    }
    return strength;
}

FourEnergies four_energies(int ell, const FieldSample& field, const DisorderParams& params,
                           const CouplingSpec& coupling) {
    if (ell < 1) throw std::invalid_argument("ell must be >= 1");
    require_field_covers(field, 3 * ell);
    AnnulusProblem problem(ell, field, params, coupling);
    auto energy_of = [&](const std::vector<double>& theta) {
        auto spins = problem.solver.solve(theta);
        return problem.solver.config_energy(spins, theta);
    };
    FourEnergies e;
    e.pp = energy_of(problem.theta_pp);
    e.mm = energy_of(problem.theta_mm);
    e.pm = energy_of(problem.theta_pm);
    e.mp = energy_of(problem.theta_mp);
    return e;
}

double surface_tension_T0(const FourEnergies& e) { return -(e.pp + e.mm - e.pm - e.mp); }

double surface_tension_T0(int ell, const FieldSample& field, const DisorderParams& params,
                          const CouplingSpec& coupling) {
    return surface_tension_T0(four_energies(ell, field, params, coupling));
}

double boundary_energy_gap(int ell, const FieldSample& field, const DisorderParams& params,
                           const CouplingSpec& coupling) {
    if (ell < 1) throw std::invalid_argument("ell must be >= 1");
    require_field_covers(field, 3 * ell);
    Region ball = Region::ball(Site{0, 0}, 3 * ell);
    MinCutSolver solver(ball, coupling);
    auto energy_of = [&](int s) {
        auto theta = solver.assemble_field(BoundaryCondition::uniform(ball, coupling, s),
                                           field, params);
        return solver.config_energy(solver.solve(theta), theta);
    };
    return -(energy_of(+1) - energy_of(-1));
}

std::vector<std::pair<double, double>> flip_thresholds(int ell, const FieldSample& field,
                                                       const DisorderParams& params,
                                                       const CouplingSpec& coupling,
                                                       double tolerance) {
    if (ell < 1) throw std::invalid_argument("ell must be >= 1");
    if (!(params.epsilon > 0.0))
        throw std::domain_error("flip_thresholds requires epsilon > 0");
    require_field_covers(field, 3 * ell);

    Region ball = Region::ball(Site{0, 0}, 3 * ell);
    Region inner = Region::ball(Site{0, 0}, ell);
    MinCutSolver solver(ball, coupling);
    std::vector<int> inner_index;
    for (const Site& s : inner.sites())
        inner_index.push_back(static_cast<int>(ball.index_of(s)));

    const double t_max =
        (coupling.total_strength() + std::fabs(params.h)) / params.epsilon + field.max_abs() + 1.0;

    std::vector<std::pair<double, double>> thresholds(inner.size());

    for (int side = 0; side < 2; ++side) {
        const int bc_spin = side == 0 ? +1 : -1;
        auto theta0 = solver.assemble_field(
            BoundaryCondition::uniform(ball, coupling, bc_spin), field, params);
        std::vector<double> theta = theta0;
        auto inner_spins_at = [&](double t) {
            theta = theta0;
            for (int idx : inner_index) theta[static_cast<std::size_t>(idx)] += params.epsilon * t;
            auto spins = solver.solve(theta);
            std::vector<std::int8_t> out(inner_index.size());
            for (std::size_t k = 0; k < inner_index.size(); ++k)
                out[k] = spins[static_cast<std::size_t>(inner_index[k])];
            return out;
        };

        auto lo_spins = inner_spins_at(-t_max);
        auto hi_spins = inner_spins_at(t_max);
        for (std::size_t k = 0; k < inner_index.size(); ++k) {
            if (lo_spins[k] != -1 || hi_spins[k] != 1)
                throw std::runtime_error("flip_thresholds: bisection bracket failure");
        }

        // Shared subdivision: all sites whose threshold lies in an interval
        // are refined together, so one solve serves many sites.
        struct Frame {
            double lo, hi;
            std::vector<std::size_t> active;
        };
        std::vector<Frame> stack;
        std::vector<std::size_t> all(inner_index.size());
        for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
        stack.push_back({-t_max, t_max, std::move(all)});

        while (!stack.empty()) {
            Frame frame = std::move(stack.back());
            stack.pop_back();
            if (frame.hi - frame.lo < tolerance) {
                double mid = 0.5 * (frame.lo + frame.hi);
                for (std::size_t k : frame.active)
                    (side == 0 ? thresholds[k].first : thresholds[k].second) = mid;
                continue;
            }
            double mid = 0.5 * (frame.lo + frame.hi);
            auto mid_spins = inner_spins_at(mid);
            Frame left{frame.lo, mid, {}};
            Frame right{mid, frame.hi, {}};
            for (std::size_t k : frame.active) {
                if (mid_spins[k] == 1)
                    left.active.push_back(k);  // already flipped: threshold below mid
                else
                    right.active.push_back(k);
            }
            if (!left.active.empty()) stack.push_back(std::move(left));
            if (!right.active.empty()) stack.push_back(std::move(right));
        }
    }

    for (auto& [t_plus, t_minus] : thresholds) {
        if (t_plus > t_minus + tolerance)
            throw std::runtime_error("flip_thresholds: ordering violated");
        if (t_plus > t_minus) t_minus = t_plus;
    }
    return thresholds;
}

std::vector<AvalancheStep> avalanche_scan(const Region& region, const FieldSample& field,
                                          const CouplingSpec& coupling,
                                          const DisorderParams& params,
                                          const std::vector<double>& h_grid) {
    for (std::size_t i = 1; i < h_grid.size(); ++i)
        if (!(h_grid[i] > h_grid[i - 1]))
            throw std::invalid_argument("h grid must be strictly increasing");
    if (!field.region.contains_region(region))
        throw std::domain_error("field does not cover region");

    MinCutSolver solver(region, coupling);
    BoundaryCondition bc = BoundaryCondition::uniform(region, coupling, -1);
    DisorderParams step_params = params;

    std::vector<AvalancheStep> steps;
    std::vector<std::int8_t> previous(region.size(), -1);
    bool have_previous = false;
    for (double h : h_grid) {
        step_params.h = h;
        auto spins = solver.solve(solver.assemble_field(bc, field, step_params));
        AvalancheStep step;
        step.h = h;
        std::vector<int> flipped;
        for (std::size_t i = 0; i < region.size(); ++i) {
            if (have_previous && spins[i] < previous[i])
                throw std::runtime_error("avalanche_scan: non-monotone flip");
            if (spins[i] > previous[i]) flipped.push_back(static_cast<int>(i));
        }
        // connected components of the flipped set along coupling edges
        std::vector<char> seen(region.size(), 0);
        for (int start : flipped) {
            if (seen[static_cast<std::size_t>(start)]) continue;
            int size = 0;
            std::vector<int> queue = {start};
            seen[static_cast<std::size_t>(start)] = 1;
            while (!queue.empty()) {
                int i = queue.back();
                queue.pop_back();
                ++size;
                const Site& u = region.site(static_cast<std::size_t>(i));
                for (const auto& [off, j] : coupling.offsets()) {
                    auto iv = region.index_of(Site{u.x + off.x, u.y + off.y});
                    if (iv < 0 || seen[static_cast<std::size_t>(iv)]) continue;
                    if (spins[static_cast<std::size_t>(iv)] > previous[static_cast<std::size_t>(iv)]) {
                        seen[static_cast<std::size_t>(iv)] = 1;
                        queue.push_back(static_cast<int>(iv));
                    }
                }
            }
            step.cluster_sizes.push_back(size);
        }
        std::sort(step.cluster_sizes.rbegin(), step.cluster_sizes.rend());
        steps.push_back(std::move(step));
        previous = spins;
        have_previous = true;
    }
    return steps;
}

}  // namespace rfim
