#include <sstream>

#include "doctest.h"
#include "peq/lattice.hpp"

using namespace peq;
using namespace peq::lat;
using sets::drop_least_zero;
using sets::evens;
using sets::mod_set;

namespace {

pr::Program prog(const char* text) { return pr::Program::from_text(text); }

std::vector<u64> table(u64 n, u64 (*fn)(u64)) {
    std::vector<u64> t(n + 1);
    for (u64 i = 0; i <= n; ++i) t[i] = fn(i);
    return t;
}

std::vector<u64> cert(const SetDescriptor& x, const SetDescriptor& y, u64 horizon) {
    auto c = certify_by_profile(x, y, horizon, 20 * (horizon + 1));
    REQUIRE(c);
    return *c;
}

// Least stage matching profiles, the natural p and q of a pair.
std::vector<u64> least_match(const SetDescriptor& from, const SetDescriptor& to, u64 horizon) {
    std::vector<u64> out(horizon + 1);
    for (u64 s = 0; s <= horizon; ++s) {
        u64 t = 0;
        while (t < 10 * (horizon + 1) && to.zeros_by_index(t) < from.zeros_by_index(s)) ++t;
        out[s] = t;
    }
    return out;
}

}  // namespace

TEST_CASE("equilibrium point examples") {
    // Profiles 0,1,1,2,2,3,... and 0,1,2,2,3,4,... also meet at s = 3.
    CHECK(equilibrium_points(evens(), mod_set(3), 10).points == std::vector<u64>{0, 1, 3});
    for (u64 k = 2; k < 6; ++k) {
        auto rep = equilibrium_points(evens(), mod_set(k), 300);
        std::vector<u64> brute;
        u64 a = 0, b = 0;
        for (u64 s = 0; s <= 300; ++s) {
            a += s % 2;
            b += s % k != 0;
            if (a == b) brute.push_back(s);
        }
        CHECK(rep.points == brute);
    }
    CHECK(equilibrium_points(mod_set(4), mod_set(4), 10).points.size() == 11);
    CHECK(equilibrium_points(evens(), drop_least_zero(evens()), 10).points == std::vector<u64>{0});
    auto steps = equilibrium_points(evens(), mod_set(3), 10, sets::Convention::Steps);
    CHECK(steps.convention == sets::Convention::Steps);
    CHECK(steps.points == std::vector<u64>{0, 1, 2, 4});
}

TEST_CASE("diamond evidence via q") {
    u64 h = 100;
    auto self = cert(mod_set(3), mod_set(3), h);
    auto all = diamond_evidence_q(mod_set(3), mod_set(3), table(h, [](u64 t) { return t; }), &self, h, 5);
    CHECK(all.stages.size() == h + 1);
    CHECK(all.evidence());

    auto up = cert(evens(), mod_set(3), h);
    auto two = diamond_evidence_q(evens(), mod_set(3), table(h, [](u64 t) { return t; }), &up, h, 5);
    CHECK(two.stages == std::vector<u64>{0, 1, 3});
    CHECK_FALSE(two.evidence());

    auto shifted = drop_least_zero(evens());
    auto sc = cert(shifted, evens(), h);
    auto e = diamond_evidence_q(shifted, evens(), table(h, [](u64 t) { return t + 2; }), &sc, h, 1);
    for (u64 t = 1; t <= h; ++t) CHECK(std::find(e.stages.begin(), e.stages.end(), t) != e.stages.end());

    CHECK_THROWS_AS(diamond_evidence_q(evens(), mod_set(3), table(h, [](u64 t) { return t; }), nullptr, h, 1),
                    NotCertified);
    std::vector<u64> wrong(h + 1, 0);
    CHECK_THROWS_AS(diamond_evidence_q(evens(), mod_set(3), table(h, [](u64 t) { return t; }), &wrong, h, 1),
                    NotCertified);

    std::ostringstream a, b;
    write_report(a, two);
    write_report(b, diamond_evidence_q(evens(), mod_set(3), table(h, [](u64 t) { return t; }), &up, h, 5));
    CHECK(a.str() == b.str());
    CHECK(a.str().find("no-evidence-at-horizon") != std::string::npos);
}

TEST_CASE("diamond evidence via r") {
    auto id = red::UnaryMap::from_program(prog("P[1,1]"), 1'000'000);
    for (const auto& y : {evens(), mod_set(3), mod_set(7)}) {
        auto lower = drop_least_zero(y);
        auto c = cert(lower, y, 60);
        auto e = diamond_evidence_r(lower, y, id, &c, 0, 50, 51);
        CHECK(e.stages.size() == 51);
    }
    auto triple = red::UnaryMap::from_program(prog("R(Z; C(S; C(S; C(S; P[2,2]))))"), 1'000'000);
    auto c = cert(evens(), mod_set(3), 60);
    auto e = diamond_evidence_r(evens(), mod_set(3), triple, &c, 0, 20, 21);
    CHECK(e.stages.size() == 21);
}

TEST_CASE("slow sets") {
    std::vector<pr::Program> fam = {prog("P[1,1]")};
    auto x = make_slow_set(fam, 20);
    // Identity forces only strictly increasing zeros: 1, 2, 3, ...
    for (u64 n = 0; n < 20; ++n) CHECK(x.principal_zero(n, 1000) == n + 1);
    CHECK(check_slow(x, fam, 0, 19).all_hold());

    std::vector<pr::Program> square = {prog("R(Z; C(R(P[1,1]; C(S; P[3,3])); P[3,3], P[3,1]))")};
    CHECK(square[0].value(7) == 49);
    auto sq = make_slow_set(square, 4);
    auto c = check_slow(sq, square, 0, 3);
    CHECK(c.all_hold());
    CHECK(sq.principal_zero(3, 1'000'000) > 25);

    CHECK(make_slow_set({}, 10).dsl() == "evens");

    // Tower direction: a slow set gives no r-evidence for (X^[-2], X).
    std::vector<pr::Program> lin = {prog("P[1,1]"), prog("C(S; P[1,1])"),
                                    prog("R(Z; C(S; C(S; P[2,2])))")};
    auto slow = make_slow_set(lin, 10);
    auto lowered = drop_least_zero(drop_least_zero(slow));
    auto cs = cert(lowered, slow, 200);
    for (const auto& r : lin) {
        auto e = diamond_evidence_r(lowered, slow, red::UnaryMap::from_program(r, 10'000'000), &cs, 0, 9, 1);
        CHECK(e.stages.empty());
    }
    // Evens is not slow: n + 2 already bounds the next zero, identity falls one zero short.
    auto evens2 = drop_least_zero(drop_least_zero(evens()));
    auto ce = cert(evens2, evens(), 200);
    auto full = diamond_evidence_r(evens2, evens(), red::UnaryMap::from_program(prog("C(S; C(S; P[1,1]))"), 1000),
                                   &ce, 0, 50, 51);
    CHECK(full.stages.size() == 51);
    auto none = diamond_evidence_r(evens2, evens(), red::UnaryMap::from_program(prog("P[1,1]"), 1000), &ce, 0, 50, 1);
    CHECK(none.stages.empty());
}

TEST_CASE("nondiamond sets below a given set") {
    std::vector<pr::Program> fam = {prog("P[1,1]")};
    auto nd = make_nondiamond_below(evens(), fam, 30);
    CHECK_FALSE(nd.degenerate);
    for (u64 n = 0; n < 30; ++n) CHECK(nd.set.principal_zero(n, 100000) > 2 * n + 3);
    auto c = cert(nd.set, evens(), 100);
    auto e = diamond_evidence_r(nd.set, evens(), red::UnaryMap::from_program(fam[0], 1000), &c, 0, 29, 1);
    CHECK(e.stages.empty());

    auto same = make_nondiamond_below(evens(), {}, 30);
    CHECK(same.degenerate);
    for (u64 i = 0; i < 100; ++i) CHECK(same.set.bit(i) == evens().bit(i));

    auto rep = x1_bound_check(evens(), nd.set, &c, 100);
    CHECK(rep.reduction_side);
}

TEST_CASE("x1 bound check examples") {
    u64 h = 80;
    auto lower = drop_least_zero(mod_set(3));
    auto c1 = cert(lower, mod_set(3), h);
    auto r1 = x1_bound_check(mod_set(3), lower, &c1, h);
    CHECK(r1.reduction_side);
    auto c2 = cert(mod_set(3), mod_set(3), h);
    auto r2 = x1_bound_check(mod_set(3), mod_set(3), &c2, h);
    CHECK(r2.diamond_side.size() == h + 1);
    CHECK_FALSE(r2.reduction_side);
}

TEST_CASE("canonical diamond witness") {
    u64 h = 120;
    auto x = drop_least_zero(evens());
    auto y = evens();
    auto p = least_match(x, y, h);
    auto q = least_match(y, x, h);
    auto w = canonical_diamond_witness(x, y, p, q, h);
    CHECK(w.proof_case >= 1);
    CHECK(w.equilibria >= w.good_pairs);
    if (w.proof_case == 1) {
        for (u64 i = 0; i + 1 <= h; ++i) {
            if (i < h) CHECK(w.d[i + 1] <= w.d[i] + 1);
            u64 lower = 0;
            for (u64 u = 0; u <= i; ++u)
                if (x.zeros_by_index(u) <= y.zeros_by_index(i))
                    lower = std::max(lower, x.zeros_by_index(u));
            CHECK(w.d[i] >= lower);
            CHECK(w.x_star.zeros_by_index(i) == w.d[i]);
        }
    }
    // Demanding many good pairs of the first kind moves to the symmetric case.
    auto w2 = canonical_diamond_witness(x, y, p, q, h, sets::Convention::Index, 10);
    CHECK(w2.proof_case == 2);
    CHECK(w2.equilibria >= w2.good_pairs);
    for (u64 i = 0; i <= h; ++i) CHECK(w2.y_star.zeros_by_index(i) == w2.d[i]);

    // Profiles already equal: case 1 with X* = X on the horizon.
    auto same = canonical_diamond_witness(mod_set(3), mod_set(3), table(h, [](u64 t) { return t; }),
                                          table(h, [](u64 t) { return t; }), h);
    CHECK(same.proof_case == 1);
    for (u64 i = 0; i <= h; ++i) CHECK(same.x_star.bit(i) == mod_set(3).bit(i));
    CHECK(same.equilibria == h + 1);

    std::vector<u64> far(h + 1, 100000);
    CHECK_THROWS_AS(canonical_diamond_witness(evens(), mod_set(3), far, far, h), CaseUndetermined);
}

TEST_CASE("restricting diamond evidence to a subinterval") {
    u64 h = 100;
    auto x = mod_set(3);
    auto y = mod_set(3);
    auto id = cert(x, x, h);
    auto q = table(3 * h, [](u64 t) { return t; });
    auto r = restrict_diamond_witness(x, x, y, y, {id, id, id}, q, h);
    CHECK(r.outer_count == h + 1);
    // Inner evidence is only promised at the last stage of each zero count.
    for (u64 t = 0; t < h; ++t)
        if (y.zeros_by_index(t + 1) > y.zeros_by_index(t))
            CHECK(std::find(r.inner.stages.begin(), r.inner.stages.end(), t) != r.inner.stages.end());
    CHECK(r.lost == r.outer_count - r.inner.stages.size());

    auto lo = sets::set_meet(evens(), mod_set(5));
    auto hi = sets::set_join(evens(), mod_set(5));
    auto mid_lo = evens();
    auto mid_hi = evens();
    auto r2 = restrict_diamond_witness(lo, mid_lo, mid_hi, hi,
                                       {cert(lo, mid_lo, h), cert(mid_lo, mid_hi, h), cert(mid_hi, hi, h)},
                                       table(3 * h, [](u64 t) { return t; }), h);
    // Brute-force recount of the inner evidence.
    u64 count = 0;
    for (u64 t = 0; t <= h; ++t)
        if (mid_hi.zeros_by_index(t) == mid_lo.zeros_by_index(r2.q[t])) ++count;
    CHECK(count == r2.inner.stages.size());
    CHECK(count + r2.lost >= r2.outer_count);
}

TEST_CASE("identity reductions shift to the tower") {
    std::vector<u64> g(60);
    for (u64 k = 0; k < 60; ++k) g[k] = 2 * k + 1;
    auto h = shift_identity_reduction(g, evens());
    CHECK(h.size() == 59);
    CHECK(h[0] == 3);
    auto lowered = drop_least_zero(evens());
    auto bad = red::check_reduction_table(h, sets::identity_relation(), sets::equiv_view(lowered), 58);
    CHECK_FALSE(bad);
}

TEST_CASE("reports are deterministic") {
    std::ostringstream a, b;
    write_report(a, equilibrium_points(evens(), mod_set(3), 10));
    write_report(b, equilibrium_points(evens(), mod_set(3), 10));
    CHECK(a.str() == b.str());
    CHECK(a.str() == "# peq-report v1 equilibrium\nconvention\tindex\nhorizon\t10\ncount\t3\npoint\t0\npoint\t1\npoint\t3\n");
    std::vector<pr::Program> fam = {prog("P[1,1]")};
    std::ostringstream c;
    write_report(c, check_slow(make_slow_set(fam, 3), fam, 0, 2), family_hash(fam));
    CHECK(c.str().find("family-hash\t") != std::string::npos);
}
