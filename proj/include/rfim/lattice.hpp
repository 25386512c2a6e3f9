#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace rfim {

struct Site {
    int x = 0;
    int y = 0;

    friend bool operator==(const Site&, const Site&) = default;
};

// Row-major order: by y, then by x. Used everywhere a deterministic
// site ordering is required.
struct SiteOrder {
    bool operator()(const Site& a, const Site& b) const {
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    }
};

inline int graph_distance(const Site& a, const Site& b) {
    int dx = a.x - b.x;
    int dy = a.y - b.y;
    return (dx < 0 ? -dx : dx) + (dy < 0 ? -dy : dy);
}

// Translation-invariant ferromagnetic pair couplings with finite support.
// Offsets are stored symmetrically: adding (dx,dy) also adds (-dx,-dy).
class CouplingSpec {
public:
    CouplingSpec() = default;

    // Nearest-neighbor coupling of strength j on the four unit displacements.
    static CouplingSpec nearest_neighbor(double j);

    void add_offset(int dx, int dy, double j);

    double strength(int dx, int dy) const;

    // Max graph distance with nonzero coupling.
    int range() const { return range_; }

    // Sum of J over all offsets; the field magnitude that forces a spin.
    double total_strength() const;

    // Offsets with J != 0, each direction listed once (both (d) and (-d)).
    const std::vector<std::pair<Site, double>>& offsets() const { return offsets_; }

    std::string describe() const;

private:
    std::vector<std::pair<Site, double>> offsets_;  // sorted, both signs
    int range_ = 0;
};

enum class RegionKind { Ball, Annulus, Box, Custom };

// Finite site set with a fixed row-major iteration order and a dense
// site -> [0,n) index for solver arrays.
class Region {
public:
    Region() = default;
    Region(std::vector<Site> sites, RegionKind kind);

    static Region ball(Site center, int radius);
    static Region annulus(int ell);  // ball(0,3*ell) minus ball(0,ell)
    static Region box(Site corner, int width, int height);
    static Region custom(std::vector<Site> sites);

    std::size_t size() const { return sites_.size(); }
    bool empty() const { return sites_.empty(); }
    const std::vector<Site>& sites() const { return sites_; }
    const Site& site(std::size_t i) const { return sites_[i]; }

    bool contains(const Site& s) const;
    // Dense index of s, or -1 if not a member.
    std::ptrdiff_t index_of(const Site& s) const;

    bool contains_region(const Region& inner) const;

    RegionKind kind() const { return kind_; }
    const Site& center() const { return center_; }
    int radius() const { return radius_; }  // -1 when not radius-defined

    // Metadata triple for result records: (kind, center, radius) where
    // meaningful; boxes and custom sets report their bounding box.
    std::string describe() const;

    friend bool operator==(const Region& a, const Region& b) {
        return a.sites_ == b.sites_;
    }

private:
    std::vector<Site> sites_;  // sorted row-major, distinct
    RegionKind kind_ = RegionKind::Custom;
    Site center_{0, 0};
    int radius_ = -1;
};

// All ordered pairs (u,v) with u inside, v outside, J_{u,v} != 0.
std::vector<std::pair<Site, Site>> edge_boundary(const Region& region,
                                                 const CouplingSpec& coupling);

// All outside sites with a nonzero coupling to some inside site,
// in row-major order.
std::vector<Site> vertex_boundary(const Region& region,
                                  const CouplingSpec& coupling);

// |ball(0,L)| = 1 + 2L(L+1)
inline std::int64_t ball_size(int radius) {
    return 1 + 2 * static_cast<std::int64_t>(radius) * (radius + 1);
}

}  // namespace rfim
