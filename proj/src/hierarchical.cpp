#include "rfim/hierarchical.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "rfim/estimators.hpp"
#include "rfim/groundstate.hpp"
#include "rfim/parallel.hpp"
#include "rfim/stats.hpp"

namespace rfim {

bool large_field_event(const Region& block, const FieldSample& field,
                       const DisorderParams& params, const CouplingSpec& coupling) {
    params.validate();
    if (!field.region.contains_region(block))
        throw std::domain_error("large_field_event: field does not cover block");
    double sum = 0.0;
    for (const Site& s : block.sites())
        sum += field.values[static_cast<std::size_t>(field.region.index_of(s))];
    double boundary_strength = 0.0;
    for (const auto& [u, v] : edge_boundary(block, coupling)) {
        boundary_strength += coupling.strength(v.x - u.x, v.y - u.y);
    }
    return params.epsilon * std::fabs(sum) > boundary_strength;
}

namespace {

int int_pow3(int n) {
    int v = 1;
    for (int i = 0; i < n; ++i) v *= 3;
    return v;
}

}  // namespace

CurdlingState curdle(const Region& window, const FieldSample& field,
                     const DisorderParams& params, const CouplingSpec& coupling, int max_level,
                     int window_bc) {
    params.validate();
    if (params.h != 0.0) throw std::invalid_argument("curdle is defined for h = 0");
    if (window_bc != 1 && window_bc != -1)
        throw std::invalid_argument("window_bc must be +-1");
    if (max_level < 0 || max_level > 7)
        throw std::invalid_argument("max_level must lie in [0, 7]");
    const int side = int_pow3(max_level);
    if (!field.region.contains_region(window))
        throw std::domain_error("curdle: field does not cover window");

    // window must be one aligned block of the top-level partition
    const Site corner = window.sites().front();
    if (window.size() != static_cast<std::size_t>(side) * side ||
        corner.x % side != 0 || corner.y % side != 0)
        throw std::invalid_argument("curdle window must be a partition-aligned 3^max_level square");
    for (const Site& s : window.sites()) {
        if (s.x < corner.x || s.x >= corner.x + side || s.y < corner.y || s.y >= corner.y + side)
            throw std::invalid_argument("curdle window must be a square");
    }

    auto cell = [&](int x, int y) {
        return static_cast<std::size_t>((y - corner.y)) * side + static_cast<std::size_t>(x - corner.x);
    };

    // per-level block field sums (pyramid) and event thresholds
    std::vector<std::vector<double>> level_sums(static_cast<std::size_t>(max_level) + 1);
    level_sums[0].resize(static_cast<std::size_t>(side) * side);
    for (const Site& s : window.sites())
        level_sums[0][cell(s.x, s.y)] =
            field.values[static_cast<std::size_t>(field.region.index_of(s))];
    for (int n = 1; n <= max_level; ++n) {
        const int blocks = int_pow3(max_level - n);
        level_sums[static_cast<std::size_t>(n)].assign(
            static_cast<std::size_t>(blocks) * blocks, 0.0);
        const int prev_blocks = blocks * 3;
        for (int by = 0; by < prev_blocks; ++by)
            for (int bx = 0; bx < prev_blocks; ++bx)
                level_sums[static_cast<std::size_t>(n)][static_cast<std::size_t>(by / 3) * blocks + bx / 3] +=
                    level_sums[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(by) * prev_blocks + bx];
    }
    std::vector<double> threshold(static_cast<std::size_t>(max_level) + 1);
    for (int n = 0; n <= max_level; ++n) {
        double strength = 0.0;
        for (const auto& [u, v] :
             edge_boundary(Region::box({0, 0}, int_pow3(n), int_pow3(n)), coupling))
            strength += coupling.strength(v.x - u.x, v.y - u.y);
        threshold[static_cast<std::size_t>(n)] = strength;
    }

    CurdlingState state;
    state.window = window;
    state.max_level = max_level;
    const int capped = max_level + 1;
    state.first_event_level.assign(window.size(), capped);
    state.separation_level.assign(window.size(), capped);
    state.tau.assign(window.size(), 0);

    // n(x): first level whose containing block shows the event
    for (std::size_t i = 0; i < window.size(); ++i) {
        const Site s = window.site(i);
        for (int n = 0; n <= max_level; ++n) {
            const int block_side = int_pow3(n);
            const int blocks = int_pow3(max_level - n);
            const int bx = (s.x - corner.x) / block_side;
            const int by = (s.y - corner.y) / block_side;
            const double sum = level_sums[static_cast<std::size_t>(n)][static_cast<std::size_t>(by) * blocks + bx];
            if (params.epsilon * std::fabs(sum) > threshold[static_cast<std::size_t>(n)]) {
                state.first_event_level[i] = n;
                break;
            }
        }
    }

    // k(x): flood from the window edge over sites with n(.) > k; unreachable
    // sites are enclosed by an early-event circuit at level k
    std::vector<char> reached(window.size());
    for (int k = 0; k <= max_level; ++k) {
        std::fill(reached.begin(), reached.end(), 0);
        std::vector<std::size_t> stack;
        for (std::size_t i = 0; i < window.size(); ++i) {
            const Site s = window.site(i);
            const bool edge_site = s.x == corner.x || s.x == corner.x + side - 1 ||
                                   s.y == corner.y || s.y == corner.y + side - 1;
            if (edge_site && state.first_event_level[i] > k) {
                reached[i] = 1;
                stack.push_back(i);
            }
        }
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            const Site s = window.site(i);
            for (const auto& [dx, dy] : std::vector<std::pair<int, int>>{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
                auto iv = window.index_of(Site{s.x + dx, s.y + dy});
                if (iv < 0) continue;
                const auto j = static_cast<std::size_t>(iv);
                if (!reached[j] && state.first_event_level[j] > k) {
                    reached[j] = 1;
                    stack.push_back(j);
                }
            }
        }
        for (std::size_t i = 0; i < window.size(); ++i) {
            if (state.first_event_level[i] > k && !reached[i] &&
                state.separation_level[i] == capped)
                state.separation_level[i] = k;
        }
    }
    for (std::size_t i = 0; i < window.size(); ++i)
        state.separation_level[i] = std::min(state.separation_level[i], state.first_event_level[i]);

    std::size_t capped_count = 0;
    for (std::size_t i = 0; i < window.size(); ++i)
        if (state.capped(i)) ++capped_count;
    state.capped_fraction = static_cast<double>(capped_count) / static_cast<double>(window.size());
    state.cap_warning = state.capped_fraction > 0.01;

    // sign-decided sites: k = n within the level budget
    std::vector<char> decided(window.size(), 0);
    for (std::size_t i = 0; i < window.size(); ++i) {
        if (state.capped(i) || state.separation_level[i] != state.first_event_level[i]) continue;
        const Site s = window.site(i);
        const int n = state.first_event_level[i];
        const int block_side = int_pow3(n);
        const int blocks = int_pow3(max_level - n);
        const int bx = (s.x - corner.x) / block_side;
        const int by = (s.y - corner.y) / block_side;
        const double sum = level_sums[static_cast<std::size_t>(n)][static_cast<std::size_t>(by) * blocks + bx];
        state.tau[i] = sum >= 0.0 ? 1 : -1;
        decided[i] = 1;
    }

    // remaining pockets: exact minimization with decided spins (or the
    // window boundary condition) as boundary values
    std::vector<char> visited(window.size(), 0);
    for (std::size_t start = 0; start < window.size(); ++start) {
        if (decided[start] || visited[start]) continue;
        std::vector<Site> component;
        std::vector<std::size_t> stack = {start};
        visited[start] = 1;
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            component.push_back(window.site(i));
            const Site s = window.site(i);
            for (const auto& [off, j] : coupling.offsets()) {
                auto iv = window.index_of(Site{s.x + off.x, s.y + off.y});
                if (iv < 0) continue;
                const auto q = static_cast<std::size_t>(iv);
                if (!visited[q] && !decided[q]) {
                    visited[q] = 1;
                    stack.push_back(q);
                }
            }
        }
        Region pocket = Region::custom(component);
        auto bc = BoundaryCondition::build(pocket, coupling, [&](const Site& s) -> int {
            auto iw = window.index_of(s);
            if (iw < 0) return window_bc;
            return state.tau[static_cast<std::size_t>(iw)];
        });
        auto result = minimize(pocket, bc, coupling, field, params);
        for (std::size_t c = 0; c < pocket.size(); ++c)
            state.tau[static_cast<std::size_t>(window.index_of(pocket.site(c)))] =
                result.config.spins[c];
    }
    return state;
}

std::string CurdlingState::levels_text_grid() const {
    if (window.empty()) return "";
    const Site corner = window.sites().front();
    const Site top = window.sites().back();
    std::ostringstream out;
    for (int y = top.y; y >= corner.y; --y) {
        for (int x = corner.x; x <= top.x; ++x) {
            const auto i = static_cast<std::size_t>(window.index_of(Site{x, y}));
            const int n = first_event_level[i];
            out << (n > max_level ? '*' : static_cast<char>('0' + std::min(n, 9)));
        }
        out << '\n';
    }
    return out.str();
}

std::string CurdlingState::tau_text_grid() const {
    SpinConfig config{window, tau};
    return config.to_text_grid();
}

double curdle_match_fraction(const CurdlingState& state, const FieldSample& field,
                             const DisorderParams& params, const CouplingSpec& coupling,
                             int window_bc) {
    auto exact = minimize(state.window,
                          BoundaryCondition::uniform(state.window, coupling, window_bc),
                          coupling, field, params);
    std::size_t same = 0;
    for (std::size_t i = 0; i < state.window.size(); ++i)
        if (exact.config.spins[i] == state.tau[i]) ++same;
    return static_cast<double>(same) / static_cast<double>(state.window.size());
}

MandelbrotResult mandelbrot_percolation(double p, int levels, int samples, std::uint64_t seed) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p must lie in [0,1]");
    if (levels < 1 || levels > 7) throw std::invalid_argument("levels must lie in [1,7]");
    if (samples < 1) throw std::invalid_argument("samples must be >= 1");

    const int side = int_pow3(levels);
    std::vector<int> distances;
    for (int d = 1; d <= side / 2; d *= 2) distances.push_back(d);

    std::vector<double> crossing(static_cast<std::size_t>(samples), 0.0);
    std::vector<double> fraction(static_cast<std::size_t>(samples), 0.0);
    std::vector<std::vector<double>> reach(distances.size());
    for (auto& r : reach) r.assign(static_cast<std::size_t>(samples), 0.0);

    std::vector<char> alive(static_cast<std::size_t>(side) * side);
    std::vector<char> seen(static_cast<std::size_t>(side) * side);
    std::vector<std::vector<char>> block_alive(static_cast<std::size_t>(levels) + 1);

    for (int sample = 0; sample < samples; ++sample) {
        const std::uint64_t sample_seed = derive_seed(seed, static_cast<std::uint64_t>(sample));

        // top-down block retention; a cell survives iff every ancestor does
        block_alive[0] = {1};
        for (int step = 1; step <= levels; ++step) {
            const int blocks = int_pow3(step);
            block_alive[static_cast<std::size_t>(step)].assign(
                static_cast<std::size_t>(blocks) * blocks, 0);
            for (int by = 0; by < blocks; ++by) {
                for (int bx = 0; bx < blocks; ++bx) {
                    if (!block_alive[static_cast<std::size_t>(step - 1)]
                                    [static_cast<std::size_t>(by / 3) * (blocks / 3) + bx / 3])
                        continue;
                    const double u = keyed_uniform(sample_seed, static_cast<std::uint32_t>(bx),
                                                   static_cast<std::uint32_t>(by),
                                                   static_cast<std::uint32_t>(step));
                    block_alive[static_cast<std::size_t>(step)]
                               [static_cast<std::size_t>(by) * blocks + bx] = u >= p;
                }
            }
        }
        const auto& cells = block_alive[static_cast<std::size_t>(levels)];
        std::copy(cells.begin(), cells.end(), alive.begin());

        double count = 0.0;
        for (char a : alive) count += a;
        fraction[static_cast<std::size_t>(sample)] = count / (static_cast<double>(side) * side);

        auto at = [&](int x, int y) { return alive[static_cast<std::size_t>(y) * side + x]; };

        // left-right crossing by flood fill from the left edge
        std::fill(seen.begin(), seen.end(), 0);
        std::vector<std::pair<int, int>> stack;
        for (int y = 0; y < side; ++y) {
            if (at(0, y)) {
                seen[static_cast<std::size_t>(y) * side] = 1;
                stack.push_back({0, y});
            }
        }
        bool crossed = false;
        while (!stack.empty()) {
            auto [x, y] = stack.back();
            stack.pop_back();
            if (x == side - 1) crossed = true;
            for (const auto& [dx, dy] : std::vector<std::pair<int, int>>{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
                const int nx = x + dx, ny = y + dy;
                if (nx < 0 || nx >= side || ny < 0 || ny >= side) continue;
                if (!at(nx, ny) || seen[static_cast<std::size_t>(ny) * side + nx]) continue;
                seen[static_cast<std::size_t>(ny) * side + nx] = 1;
                stack.push_back({nx, ny});
            }
        }
        crossing[static_cast<std::size_t>(sample)] = crossed ? 1.0 : 0.0;

        // connectivity of the center cluster vs Chebyshev distance
        const int cx = side / 2, cy = side / 2;
        int max_reach = -1;
        if (at(cx, cy)) {
            std::fill(seen.begin(), seen.end(), 0);
            seen[static_cast<std::size_t>(cy) * side + cx] = 1;
            stack.push_back({cx, cy});
            max_reach = 0;
            while (!stack.empty()) {
                auto [x, y] = stack.back();
                stack.pop_back();
                max_reach = std::max(max_reach, std::max(std::abs(x - cx), std::abs(y - cy)));
                for (const auto& [dx, dy] : std::vector<std::pair<int, int>>{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || nx >= side || ny < 0 || ny >= side) continue;
                    if (!at(nx, ny) || seen[static_cast<std::size_t>(ny) * side + nx]) continue;
                    seen[static_cast<std::size_t>(ny) * side + nx] = 1;
                    stack.push_back({nx, ny});
                }
            }
        }
        for (std::size_t k = 0; k < distances.size(); ++k)
            reach[k][static_cast<std::size_t>(sample)] = max_reach >= distances[k] ? 1.0 : 0.0;
    }

    MandelbrotResult result;
    result.samples = samples;
    auto cross_m = moments_of(crossing);
    result.crossing_probability = cross_m.mean;
    result.crossing_se = cross_m.std_error;
    auto frac_m = moments_of(fraction);
    result.survive_fraction_mean = frac_m.mean;
    result.survive_fraction_se = frac_m.std_error;
    result.decay_distance = distances;
    for (std::size_t k = 0; k < distances.size(); ++k) {
        auto m = moments_of(reach[k]);
        result.decay_probability.push_back(m.mean);
        result.decay_se.push_back(m.std_error);
    }
    return result;
}

HighDisorderReport high_disorder_check(const DisorderParams& params,
                                       const CouplingSpec& coupling) {
    params.validate();
    if (!(params.epsilon > 0.0))
        throw std::domain_error("high_disorder_check requires epsilon > 0");
    if (coupling.range() != 1 || coupling.strength(1, 0) != coupling.strength(0, 1))
        throw std::domain_error("high_disorder_check covers the nearest-neighbor case");
    const double j = coupling.strength(1, 0);
    auto normal_cdf = [](double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); };
    HighDisorderReport report;
    report.exceptional_prob = normal_cdf((4.0 * j - params.h) / params.epsilon) -
                              normal_cdf((-4.0 * j - params.h) / params.epsilon);
    report.threshold = kSitePercolationThreshold2D;
    report.exponential_regime = report.exceptional_prob < report.threshold;
    return report;
}

ConnectivitySeries exceptional_percolation(int window_radius, const DisorderParams& params,
                                           const CouplingSpec& coupling, int replicas,
                                           std::uint64_t seed, int threads) {
    if (window_radius < 1) throw std::invalid_argument("window radius must be >= 1");
    if (replicas < 2) throw std::invalid_argument("need replicas >= 2");
    params.validate();
    const double bound = coupling.total_strength();
    Region window = Region::ball({0, 0}, window_radius);

    std::vector<int> distances;
    for (int d = 1; d <= window_radius; d *= 2) distances.push_back(d);
    if (distances.back() != window_radius) distances.push_back(window_radius);

    std::vector<std::vector<double>> reach(distances.size());
    for (auto& r : reach) r.assign(static_cast<std::size_t>(replicas), 0.0);
    std::vector<double> open_count(static_cast<std::size_t>(replicas), 0.0);

    parallel_for(replicas, threads, [&](int r, int) {
        auto field = sample_field(window, derive_seed(seed, static_cast<std::uint64_t>(r)));
        std::vector<char> open(window.size());
        double opens = 0.0;
        for (std::size_t i = 0; i < window.size(); ++i) {
            open[i] = std::fabs(params.h + params.epsilon * field.values[i]) <= bound;
            opens += open[i];
        }
        open_count[static_cast<std::size_t>(r)] = opens / static_cast<double>(window.size());

        int max_reach = -1;
        auto origin = window.index_of({0, 0});
        if (open[static_cast<std::size_t>(origin)]) {
            std::vector<char> seen(window.size(), 0);
            std::vector<std::size_t> stack = {static_cast<std::size_t>(origin)};
            seen[static_cast<std::size_t>(origin)] = 1;
            max_reach = 0;
            while (!stack.empty()) {
                const std::size_t i = stack.back();
                stack.pop_back();
                const Site s = window.site(i);
                max_reach = std::max(max_reach, graph_distance(s, {0, 0}));
                for (const auto& [dx, dy] : std::vector<std::pair<int, int>>{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
                    auto iv = window.index_of(Site{s.x + dx, s.y + dy});
                    if (iv < 0) continue;
                    const auto q = static_cast<std::size_t>(iv);
                    if (open[q] && !seen[q]) {
                        seen[q] = 1;
                        stack.push_back(q);
                    }
                }
            }
        }
        for (std::size_t k = 0; k < distances.size(); ++k)
            reach[k][static_cast<std::size_t>(r)] = max_reach >= distances[k] ? 1.0 : 0.0;
    });

    ConnectivitySeries series;
    series.replicas = replicas;
    series.open_fraction = moments_of(open_count).mean;
    series.distances = distances;
    for (std::size_t k = 0; k < distances.size(); ++k) {
        auto m = moments_of(reach[k]);
        series.probability.push_back(m.mean);
        series.std_error.push_back(m.std_error);
    }
    return series;
}

BlockDensityReport block_density(int ell, const DisorderParams& params,
                                 const CouplingSpec& coupling, int replicas,
                                 std::uint64_t seed, int threads) {
    if (ell < 1) throw std::invalid_argument("ell must be >= 1");
    if (!(params.temperature == 0.0))
        throw std::domain_error("block_density is a zero-temperature observable");
    if (replicas < 2) throw std::invalid_argument("need replicas >= 2");
    params.validate();

    const int block_side = 2 * ell;
    Region sample_region = Region::box({-ell, -ell}, block_side + 2 * ell, block_side + 2 * ell);
    Region ball = Region::ball({0, 0}, ell);
    const auto origin = static_cast<std::size_t>(ball.index_of({0, 0}));

    std::vector<double> hits(static_cast<std::size_t>(replicas), 0.0);
    std::vector<std::unique_ptr<MinCutSolver>> solvers(static_cast<std::size_t>(std::max(1, threads)));

    parallel_for(replicas, threads, [&](int r, int worker) {
        auto& solver = solvers[static_cast<std::size_t>(worker)];
        if (!solver) solver = std::make_unique<MinCutSolver>(ball, coupling);
        auto field = sample_field(sample_region, derive_seed(seed, static_cast<std::uint64_t>(r)));
        bool sensitive = false;
        FieldSample local{ball, std::vector<double>(ball.size()), field.seed};
        for (int y = 0; y < block_side && !sensitive; ++y) {
            for (int x = 0; x < block_side && !sensitive; ++x) {
                for (std::size_t i = 0; i < ball.size(); ++i) {
                    const Site s = ball.site(i);
                    local.values[i] = field.at(Site{s.x + x, s.y + y});
                }
                auto plus = solver->solve(solver->assemble_field(
                    BoundaryCondition::uniform(ball, coupling, +1), local, params));
                auto minus = solver->solve(solver->assemble_field(
                    BoundaryCondition::uniform(ball, coupling, -1), local, params));
                if (plus[origin] != minus[origin]) sensitive = true;
            }
        }
        hits[static_cast<std::size_t>(r)] = sensitive ? 1.0 : 0.0;
    });

    BlockDensityReport report;
    report.replicas = replicas;
    auto m = moments_of(hits);
    report.block_event_prob = m.mean;
    report.block_event_se = m.std_error;
    auto m_hat = estimate_m(ell, params, coupling, std::max(1000, replicas),
                            derive_seed(seed, 0xB10C), GibbsEngine::exact(), threads);
    report.m_hat = m_hat.mean;
    report.union_bound = static_cast<double>(block_side) * block_side * m_hat.mean;
    report.surface_bound = 4.0 * (ell + 1) * m_hat.mean;
    report.implied_prefactor = report.block_event_prob * ell;
    return report;
}

}  // namespace rfim
