#include "rfim/disorder.hpp"

#include <cmath>
#include <stdexcept>

namespace rfim {

void DisorderParams::validate() const {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
    if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
    if (!std::isfinite(h)) throw std::invalid_argument("h must be finite");
}

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& ctr,
                         const std::array<std::uint32_t, 2>& key) {
    std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
    std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
    std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kPhiloxW0;
            key[1] += kPhiloxW1;
        }
        philox_round(counter, key);
    }
    return counter;
}

std::uint64_t keyed_u64(std::uint64_t seed, std::uint32_t a, std::uint32_t b,
                        std::uint32_t stream) {
    std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed),
                                        static_cast<std::uint32_t>(seed >> 32)};
    std::array<std::uint32_t, 4> ctr = {a, b, stream, 0u};
    auto out = philox4x32(ctr, key);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

double keyed_uniform(std::uint64_t seed, std::uint32_t a, std::uint32_t b,
                     std::uint32_t stream) {
    // (n + 0.5) / 2^64 lies strictly inside (0,1)
    return (static_cast<double>(keyed_u64(seed, a, b, stream)) + 0.5) *
           0x1.0p-64;
}

double keyed_normal(std::uint64_t seed, std::uint32_t a, std::uint32_t b,
                    std::uint32_t stream) {
    return normal_icdf(keyed_uniform(seed, a, b, stream));
}

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index) {
    return keyed_u64(base_seed, static_cast<std::uint32_t>(index),
                     static_cast<std::uint32_t>(index >> 32), 0x5EEDu);
}

double normal_icdf(double p) {
    // AS 241 (PPND16). Relative accuracy about 1e-15 over (0,1).
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_icdf requires p in (0,1)");
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                     6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                   1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
                 1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
               (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                     3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                   5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
                 4.2313330701600911252e+1) * r + 1.0);
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                      2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                    3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
                  4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
                (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                      1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                    6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
                  2.05319162663775882187e+0) * r + 1.0);
    } else {
        r -= 5.0;
        value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                      1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                    2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
                  5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
                (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                      1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                    1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                  5.99832206555887937690e-1) * r + 1.0);
    }
    return (q < 0.0) ? -value : value;
}

double phi(double s) { return std::exp(-0.5 * s * s) * 0.3989422804014326779; }

double chi(double t) {
    // 2 * integral_t^inf phi = erfc(t / sqrt(2)); values > 1 for t < 0 per
    // the integral formula taken literally.
    return std::erfc(t * 0.7071067811865475244);
}

double gamma_exponent(double j, double epsilon) {
    if (j < 0.0) throw std::domain_error("gamma_exponent requires J >= 0");
    if (!(epsilon > 0.0)) throw std::domain_error("gamma_exponent requires epsilon > 0");
    return 0x1.0p-10 * chi(50.0 * j / epsilon);
}

double FieldSample::at(const Site& s) const {
    auto i = region.index_of(s);
    if (i < 0) throw std::domain_error("site not in field region");
    return values[static_cast<std::size_t>(i)];
}

double FieldSample::max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::fabs(v));
    return m;
}

FieldSample sample_field(const Region& region, std::uint64_t seed) {
    if (region.empty()) throw std::invalid_argument("sample_field requires a nonempty region");
    FieldSample field{region, {}, seed};
    field.values.reserve(region.size());
    for (const Site& s : region.sites()) {
        field.values.push_back(keyed_normal(seed, static_cast<std::uint32_t>(s.x),
                                            static_cast<std::uint32_t>(s.y), 0xF1E1Du));
    }
    return field;
}

FieldSample shift_field(const FieldSample& field, const Region& inner, double t) {
    if (!field.region.contains_region(inner))
        throw std::domain_error("shift_field: inner region not contained in field region");
    FieldSample shifted = field;
    for (const Site& s : inner.sites())
        shifted.values[static_cast<std::size_t>(field.region.index_of(s))] += t;
    return shifted;
}

double hat_eta(const FieldSample& field, const Region& inner) {
    if (inner.empty()) throw std::domain_error("hat_eta requires a nonempty inner region");
    if (!field.region.contains_region(inner))
        throw std::domain_error("hat_eta: inner region not contained in field region");
    double sum = 0.0;
    for (const Site& s : inner.sites())
        sum += field.values[static_cast<std::size_t>(field.region.index_of(s))];
    return sum / std::sqrt(static_cast<double>(inner.size()));
}

}  // namespace rfim
