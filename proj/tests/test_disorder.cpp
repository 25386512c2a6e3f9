#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rfim/disorder.hpp"

using namespace rfim;

namespace {

// adaptive Simpson quadrature, used as the independent route to chi
double simpson(double (*f)(double), double a, double b) {
    auto rec = [&](auto&& self, double lo, double hi, double flo, double fmid, double fhi,
                   double whole, double tol) -> double {
        double mid = 0.5 * (lo + hi);
        double lmid = 0.5 * (lo + mid), rmid = 0.5 * (mid + hi);
        double fl = f(lmid), fr = f(rmid);
        double left = (mid - lo) / 6.0 * (flo + 4.0 * fl + fmid);
        double right = (hi - mid) / 6.0 * (fmid + 4.0 * fr + fhi);
        if (std::fabs(left + right - whole) < 15.0 * tol)
            return left + right + (left + right - whole) / 15.0;
        return self(self, lo, mid, flo, fl, fmid, left, 0.5 * tol) +
               self(self, mid, hi, fmid, fr, fhi, right, 0.5 * tol);
    };
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return rec(rec, a, b, fa, fm, fb, whole, 1e-13);
}

double chi_by_quadrature(double t) {
    // integrate the density out to 40 standard deviations
    return 2.0 * simpson(&phi, t, 40.0);
}

}  // namespace

TEST_CASE("philox known-answer vectors") {
    auto zero = philox4x32({0, 0, 0, 0}, {0, 0});
    CHECK(zero[0] == 0x6627e8d5u);
    CHECK(zero[1] == 0xe169c58du);
    CHECK(zero[2] == 0xbc57ac4cu);
    CHECK(zero[3] == 0x9b00dbd8u);

    auto ones = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                           {0xffffffffu, 0xffffffffu});
    CHECK(ones[0] == 0x408f276du);
    CHECK(ones[1] == 0x41c83b0eu);
    CHECK(ones[2] == 0xa20bc7c6u);
    CHECK(ones[3] == 0x6d5451fdu);

    auto pi = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                         {0xa4093822u, 0x299f31d0u});
    CHECK(pi[0] == 0xd16cfe09u);
    CHECK(pi[1] == 0x94fdccebu);
    CHECK(pi[2] == 0x5001e420u);
    CHECK(pi[3] == 0x24126ea1u);
}

TEST_CASE("field sampling is deterministic and keyed by coordinates") {
    Region r1 = Region::ball({0, 0}, 1);
    Region r2 = Region::ball({0, 0}, 2);
    auto f1 = sample_field(r1, 42);
    auto f1b = sample_field(r1, 42);
    CHECK(f1.values == f1b.values);

    auto f2 = sample_field(r2, 42);
    for (const Site& s : r1.sites()) CHECK(f1.at(s) == f2.at(s));

    auto g = sample_field(r1, 43);
    CHECK(f1.values != g.values);
}

TEST_CASE("sampled field is standard normal: moments") {
    Region row = Region::box({0, 0}, 1000, 1000);
    auto field = sample_field(row, 7);
    double sum = 0.0, sq = 0.0;
    for (double v : field.values) {
        sum += v;
        sq += v * v;
    }
    const double n = static_cast<double>(field.values.size());
    CHECK(std::fabs(sum / n) < 0.004);          // 3 sigma of mean over 1e6 draws
    CHECK(std::fabs(sq / n - 1.0) < 0.006);     // ~4 sigma of second moment
}

TEST_CASE("hat_eta over replicas is standard normal (KS at 1%)") {
    Region inner = Region::ball({0, 0}, 2);
    const int replicas = 100000;
    std::vector<double> samples;
    samples.reserve(replicas);
    for (int r = 0; r < replicas; ++r)
        samples.push_back(hat_eta(sample_field(inner, derive_seed(99, r)), inner));
    std::sort(samples.begin(), samples.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double cdf = 0.5 * std::erfc(-samples[i] * 0.7071067811865475244);
        double lo = static_cast<double>(i) / replicas;
        double hi = static_cast<double>(i + 1) / replicas;
        ks = std::max({ks, std::fabs(cdf - lo), std::fabs(cdf - hi)});
    }
    CHECK(ks < 1.6276 / std::sqrt(static_cast<double>(replicas)));
}

TEST_CASE("hat_eta basics") {
    Region inner = Region::ball({0, 0}, 1);
    FieldSample zero{inner, std::vector<double>(inner.size(), 0.0), 0};
    CHECK(hat_eta(zero, inner) == 0.0);

    Region single = Region::ball({2, 2}, 0);
    auto f = sample_field(single, 5);
    CHECK(hat_eta(f, single) == doctest::Approx(f.values[0]).epsilon(1e-15));

    CHECK_THROWS_AS(hat_eta(f, Region::ball({0, 0}, 1)), std::domain_error);
}

TEST_CASE("shift_field shifts inner sites only and inverts") {
    Region outer = Region::ball({0, 0}, 2);
    Region inner = Region::ball({0, 0}, 1);
    auto f = sample_field(outer, 11);

    auto same = shift_field(f, inner, 0.0);
    CHECK(same.values == f.values);

    auto shifted = shift_field(f, inner, 0.75);
    for (const Site& s : outer.sites()) {
        if (inner.contains(s))
            CHECK(shifted.at(s) == doctest::Approx(f.at(s) + 0.75).epsilon(1e-15));
        else
            CHECK(shifted.at(s) == f.at(s));
    }
    auto back = shift_field(shifted, inner, -0.75);
    for (std::size_t i = 0; i < f.values.size(); ++i)
        CHECK(back.values[i] == doctest::Approx(f.values[i]).epsilon(1e-14));

    CHECK_THROWS_AS(shift_field(f, Region::ball({0, 0}, 3), 1.0), std::domain_error);
}

TEST_CASE("hat_eta of a shifted field obeys the affine relation") {
    Region outer = Region::ball({0, 0}, 3);
    Region inner = Region::ball({0, 0}, 2);
    for (int r = 0; r < 100; ++r) {
        auto f = sample_field(outer, derive_seed(123, r));
        double t = 3.0 * (keyed_uniform(77, r, 0, 1) - 0.5);
        double lhs = hat_eta(shift_field(f, inner, t), inner);
        double rhs = hat_eta(f, inner) + t * std::sqrt(static_cast<double>(inner.size()));
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("phi and chi reference values") {
    CHECK(phi(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-12));
    CHECK(chi(0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(chi(1.959964) == doctest::Approx(0.05).epsilon(2e-5));
    CHECK(std::fabs(chi(1.959964) - chi_by_quadrature(1.959964)) < 1e-6);
}

TEST_CASE("chi agrees with quadrature and is strictly decreasing") {
    double prev = chi(0.0);
    for (int i = 1; i <= 1000; ++i) {
        double t = 8.0 * i / 1000.0;
        double c = chi(t);
        CHECK(c < prev);
        prev = c;
    }
    for (double t : {0.0, 0.5, 1.0, 2.0, 4.0, 6.0, 8.0})
        CHECK(std::fabs(chi(t) - chi_by_quadrature(t)) < 1e-10);
    CHECK(chi(-1.0) > 1.0);  // integral formula taken literally
}

TEST_CASE("gamma exponent") {
    CHECK(gamma_exponent(0.0, 1.0) == doctest::Approx(9.765625e-4).epsilon(1e-12));
    CHECK(gamma_exponent(1.0, 1e9) == doctest::Approx(9.765625e-4).epsilon(1e-9));
    CHECK(gamma_exponent(1.0, 50.0) ==
          doctest::Approx(0x1.0p-10 * chi_by_quadrature(1.0)).epsilon(1e-9));
    CHECK_THROWS_AS(gamma_exponent(1.0, 0.0), std::domain_error);
}

TEST_CASE("normal_icdf inverts the normal CDF") {
    for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.7, 0.99, 1.0 - 1e-6}) {
        double x = normal_icdf(p);
        double back = 0.5 * std::erfc(-x * 0.7071067811865475244);
        CHECK(back == doctest::Approx(p).epsilon(1e-10));
    }
    CHECK(normal_icdf(0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
}
