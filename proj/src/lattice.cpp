#include "rfim/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace rfim {

CouplingSpec CouplingSpec::nearest_neighbor(double j) {
    CouplingSpec spec;
    spec.add_offset(1, 0, j);
    spec.add_offset(0, 1, j);
    return spec;
}

void CouplingSpec::add_offset(int dx, int dy, double j) {
    if (dx == 0 && dy == 0) throw std::invalid_argument("coupling offset (0,0) is not a pair");
    if (j < 0.0) throw std::invalid_argument("couplings must be ferromagnetic (J >= 0)");
    if (j == 0.0) return;
    for (auto& [off, val] : offsets_) {
        if ((off.x == dx && off.y == dy) || (off.x == -dx && off.y == -dy)) {
            val = j;
            return;
        }
    }
    offsets_.push_back({Site{dx, dy}, j});
    offsets_.push_back({Site{-dx, -dy}, j});
    std::sort(offsets_.begin(), offsets_.end(),
              [](const auto& a, const auto& b) { return SiteOrder{}(a.first, b.first); });
    range_ = 0;
    for (const auto& [off, val] : offsets_)
        range_ = std::max(range_, std::abs(off.x) + std::abs(off.y));
}

double CouplingSpec::strength(int dx, int dy) const {
    for (const auto& [off, val] : offsets_)
        if (off.x == dx && off.y == dy) return val;
    return 0.0;
}

double CouplingSpec::total_strength() const {
    double total = 0.0;
    for (const auto& [off, val] : offsets_) total += val;
    return total;
}

std::string CouplingSpec::describe() const {
    std::ostringstream out;
    out << "{";
    bool first = true;
    for (const auto& [off, val] : offsets_) {
        if (!SiteOrder{}(Site{0, 0}, off)) continue;  // list each pair once
        if (!first) out << ",";
        out << "(" << off.x << "," << off.y << "):" << val;
        first = false;
    }
    out << "}";
    return out.str();
}

Region::Region(std::vector<Site> sites, RegionKind kind)
    : sites_(std::move(sites)), kind_(kind) {
    std::sort(sites_.begin(), sites_.end(), SiteOrder{});
    auto dup = std::adjacent_find(sites_.begin(), sites_.end());
    if (dup != sites_.end()) throw std::invalid_argument("region sites must be distinct");
}

Region Region::ball(Site center, int radius) {
    if (radius < 0) throw std::invalid_argument("ball radius must be >= 0");
    std::vector<Site> sites;
    sites.reserve(static_cast<std::size_t>(ball_size(radius)));
    for (int y = center.y - radius; y <= center.y + radius; ++y) {
        int r = radius - std::abs(y - center.y);
        for (int x = center.x - r; x <= center.x + r; ++x) sites.push_back({x, y});
    }
    Region region(std::move(sites), RegionKind::Ball);
    region.center_ = center;
    region.radius_ = radius;
    return region;
}

Region Region::annulus(int ell) {
    if (ell < 1) throw std::invalid_argument("annulus scale must be >= 1");
    std::vector<Site> sites;
    for (int y = -3 * ell; y <= 3 * ell; ++y) {
        for (int x = -3 * ell + std::abs(y); x <= 3 * ell - std::abs(y); ++x) {
            if (std::abs(x) + std::abs(y) > ell) sites.push_back({x, y});
        }
    }
    Region region(std::move(sites), RegionKind::Annulus);
    region.radius_ = ell;
    return region;
}

Region Region::box(Site corner, int width, int height) {
    if (width < 1 || height < 1) throw std::invalid_argument("box sides must be >= 1");
    std::vector<Site> sites;
    sites.reserve(static_cast<std::size_t>(width) * height);
    for (int y = corner.y; y < corner.y + height; ++y)
        for (int x = corner.x; x < corner.x + width; ++x) sites.push_back({x, y});
    return Region(std::move(sites), RegionKind::Box);
}

Region Region::custom(std::vector<Site> sites) {
    return Region(std::move(sites), RegionKind::Custom);
}

bool Region::contains(const Site& s) const { return index_of(s) >= 0; }

std::ptrdiff_t Region::index_of(const Site& s) const {
    auto it = std::lower_bound(sites_.begin(), sites_.end(), s, SiteOrder{});
    if (it == sites_.end() || !(*it == s)) return -1;
    return it - sites_.begin();
}

bool Region::contains_region(const Region& inner) const {
    return std::includes(sites_.begin(), sites_.end(),
                         inner.sites_.begin(), inner.sites_.end(), SiteOrder{});
}

std::string Region::describe() const {
    std::ostringstream out;
    switch (kind_) {
        case RegionKind::Ball:
            out << "ball:center=(" << center_.x << "," << center_.y << "):radius=" << radius_;
            break;
        case RegionKind::Annulus:
            out << "annulus:center=(0,0):ell=" << radius_;
            break;
        case RegionKind::Box: out << "box"; break;
        case RegionKind::Custom: out << "custom"; break;
    }
    out << ":n=" << sites_.size();
    if ((kind_ == RegionKind::Box || kind_ == RegionKind::Custom) && !sites_.empty()) {
        out << ":bbox=(" << sites_.front().x << "," << sites_.front().y << ")..("
            << sites_.back().x << "," << sites_.back().y << ")";
    }
    return out.str();
}

std::vector<std::pair<Site, Site>> edge_boundary(const Region& region,
                                                 const CouplingSpec& coupling) {
    std::vector<std::pair<Site, Site>> edges;
    for (const Site& u : region.sites()) {
        for (const auto& [off, j] : coupling.offsets()) {
            Site v{u.x + off.x, u.y + off.y};
            if (!region.contains(v)) edges.push_back({u, v});
        }
    }
    return edges;
}

std::vector<Site> vertex_boundary(const Region& region, const CouplingSpec& coupling) {
    std::set<Site, SiteOrder> outside;
    for (const auto& [u, v] : edge_boundary(region, coupling)) outside.insert(v);
    return {outside.begin(), outside.end()};
}

}  // namespace rfim
