#include <algorithm>
#include <random>

#include "doctest.h"
#include "peq/sets.hpp"

using namespace peq;
using namespace peq::sets;

namespace {

// Zero positions by direct scan, independent of cached counters.
std::vector<u64> zero_positions(const SetDescriptor& x, u64 upto) {
    std::vector<u64> out;
    for (u64 i = 0; i <= upto; ++i)
        if (!x.bit(i)) out.push_back(i);
    return out;
}

u64 scan_zeros(const SetDescriptor& x, u64 s) {
    u64 n = 0;
    for (u64 i = 0; i <= s; ++i) n += x.bit(i) ? 0 : 1;
    return n;
}

SetDescriptor from_bits_then_evens(const std::string& head) {
    return with_prefix(bits_from_string(head), evens());
}

constexpr const char* kIsEven = "R(C(S; Z); C(R(C(S; Z); C(Z; P[2,1])); P[2,2]))";

// n -> 10n + 10, comfortably above the node count of kIsEven.
std::string linear_bound_text() {
    std::string base = "Z", step = "P[2,2]";
    for (int i = 0; i < 10; ++i) {
        base = "C(S; " + base + ")";
        step = "C(S; " + step + ")";
    }
    return "R(" + base + "; " + step + ")";
}

}  // namespace

TEST_CASE("bit examples") {
    CHECK(evens().bit(4));
    CHECK_FALSE(evens().bit(3));
    CHECK_FALSE(mod_set(3).bit(5));
    CHECK(mod_set(3).bit(6));
    CHECK(singleton_zero().bit(0));
    CHECK_FALSE(singleton_zero().bit(7));
}

TEST_CASE("zeros_by_index examples") {
    CHECK(zeros_by_index(evens(), 4) == 2);
    CHECK(zeros_by_index(evens(), 0) == 0);
    CHECK(zeros_by_index(mod_set(3), 5) == 4);
    for (u64 s = 0; s < 200; ++s) {
        CHECK(zeros_by_index(evens(), s) == scan_zeros(evens(), s));
        CHECK(zeros_by_index(mod_set(5), s) == scan_zeros(mod_set(5), s));
        CHECK(zeros_by_index(singleton_zero(), s) == s);
    }
}

TEST_CASE("zeros_by_steps examples") {
    auto x = mod_set(3);
    CHECK(zeros_by_steps(x, 0) == 0);
    for (u64 s = 0; s < 100; ++s) CHECK(zeros_by_steps(x, s) <= zeros_by_steps(x, s + 1));

    // Evens as a term with constant per-bit cost.
    auto is_even = pr::parse_term(kIsEven);
    auto bound = pr::parse_term(linear_bound_text());
    SetDescriptor term_evens = term_set(is_even, bound);
    for (u64 n = 0; n < 30; ++n) CHECK(term_evens.bit(n) == evens().bit(n));
    // Cost grows with n for a recursion term; recover the five-bit horizon from the costs.
    u64 five = 0;
    for (u64 n = 0; n < 5; ++n) five += term_evens.bit_cost(n);
    CHECK(zeros_by_steps(term_evens, five) == zeros_by_index(evens(), 4));
    CHECK(zeros_by_steps(term_evens, five - 1) == zeros_by_index(evens(), 3));
}

TEST_CASE("term sets enforce their step bound") {
    auto is_even = pr::parse_term(kIsEven);
    SetDescriptor tight = term_set(is_even, pr::parse_term("C(S; C(S; Z))"));
    CHECK_THROWS_AS(tight.bit(6), PunctualityViolation);
}

TEST_CASE("principal_zero examples") {
    CHECK(principal_zero(evens(), 0, 100) == 1);
    CHECK(principal_zero(evens(), 5, 100) == 11);
    CHECK(principal_zero(mod_set(3), 2, 100) == 4);
    CHECK_THROWS_AS(principal_zero(with_prefix(Bits(50, 1), evens()), 0, 20), CeilingExceeded);
    for (u64 k = 2; k < 7; ++k) {
        auto pos = zero_positions(mod_set(k), 300);
        for (u64 n = 0; n < 100; ++n) CHECK(principal_zero(mod_set(k), n, 1000) == pos[n]);
    }
}

TEST_CASE("principal_transversal examples") {
    Bits id = principal_transversal(identity_relation(), 5);
    CHECK(bits_to_string(id) == "011111");
    Bits ev = principal_transversal(equiv_view(evens()), 6);
    CHECK(bits_to_string(ev) == "0101010");
    Bits single = principal_transversal(equiv_view(singleton_zero()), 4);
    CHECK(bits_to_string(single) == "01111");

    Relation broken{"broken", [](u64 a, u64 b) { return a <= b; }, std::nullopt};
    CHECK_THROWS_AS(principal_transversal(broken, 5), NotEquivalence);
}

TEST_CASE("normal form examples") {
    NormalForm nf = normal_form(equiv_view(evens()), 60);
    for (u64 x = 0; x <= 60; ++x) {
        CHECK(nf.carrier.bit(x) == evens().bit(x));
        CHECK(nf.to_carrier[x] == (x % 2 == 0 ? 0 : x));
        CHECK(nf.to_carrier[x] <= x);
    }
    CHECK(nf.to_carrier[2] == 0);
    CHECK(nf.to_carrier[4] == 0);

    NormalForm idf = normal_form(identity_relation(), 20);
    for (u64 x = 0; x <= 20; ++x) {
        CHECK(idf.carrier.bit(x) == (x == 0));
        CHECK(idf.to_carrier[x] == x);
    }

    // Mod-3 residue classes: carrier is {0,3,4,5,...}.
    Relation mod3{"mod3", [](u64 a, u64 b) { return a % 3 == b % 3; }, std::nullopt};
    NormalForm m = normal_form(mod3, 40);
    for (u64 x = 0; x <= 40; ++x) {
        CHECK(m.to_carrier[x] == x % 3);
        CHECK(m.carrier.bit(x) == (x == 0 || x >= 3));
        for (u64 y = 0; y <= 40; ++y) {
            bool lhs = mod3.related(x, y);
            u64 fx = m.to_carrier[x], fy = m.to_carrier[y];
            bool rhs = fx == fy || (m.carrier.bit(fx) && m.carrier.bit(fy));
            CHECK(lhs == rhs);
        }
    }
}

TEST_CASE("string join and meet examples") {
    auto j = [](const char* a, const char* b) {
        return bits_to_string(string_join(bits_from_string(a), bits_from_string(b)));
    };
    auto m = [](const char* a, const char* b) {
        return bits_to_string(string_meet(bits_from_string(a), bits_from_string(b)));
    };
    CHECK(j("0101", "0110") == "0101");
    CHECK(m("0101", "0110") == "0110");
    CHECK(j("1001", "0101") == "0101");
    CHECK(m("1001", "0101") == "1001");
    CHECK(j("0110", "0110") == "0110");
    CHECK(m("0110", "0110") == "0110");
    CHECK_THROWS_AS(string_join(bits_from_string("01"), bits_from_string("011")), ShapeMismatch);
    CHECK_THROWS_AS(string_meet(bits_from_string("01"), bits_from_string("11")), ShapeMismatch);
}

TEST_CASE("set join and meet examples") {
    auto j = set_join(evens(), mod_set(3));
    auto m = set_meet(evens(), mod_set(3));
    for (u64 i = 0; i < 300; ++i) {
        CHECK(j.bit(i) == mod_set(3).bit(i));
        CHECK(m.bit(i) == evens().bit(i));
    }
    auto jj = set_join(mod_set(3), mod_set(3));
    for (u64 i = 0; i < 100; ++i) CHECK(jj.bit(i) == mod_set(3).bit(i));
}

TEST_CASE("bit 0 normalization is recorded") {
    auto x = from_bits_then_evens("0");
    CHECK_FALSE(x.bit(0));
    auto j = set_join(x, evens());
    CHECK(j.bit(0));
    CHECK_FALSE(j.notes().empty());
    auto fx = force_zero_member(x);
    for (u64 s = 0; s < 50; ++s) CHECK(fx.zeros_by_index(s) == scan_zeros(fx, s));
}

TEST_CASE("drop_least_zero examples") {
    auto d1 = drop_least_zero(evens());
    auto d2 = drop_least_zero(d1);
    auto z1 = zero_positions(d1, 20);
    auto z2 = zero_positions(d2, 20);
    CHECK(z1 == std::vector<u64>{3, 5, 7, 9, 11, 13, 15, 17, 19});
    CHECK(z2 == std::vector<u64>{5, 7, 9, 11, 13, 15, 17, 19});
    for (u64 n = 0; n <= 50; ++n) CHECK(principal_zero(d1, n, 1000) == principal_zero(evens(), n + 1, 1000));
    for (u64 t = 0; t < 200; ++t) {
        u64 base = zeros_by_index(mod_set(4), t);
        CHECK(zeros_by_index(drop_least_zero(mod_set(4)), t) == (base == 0 ? 0 : base - 1));
        CHECK(scan_zeros(drop_least_zero(mod_set(4)), t) == (base == 0 ? 0 : base - 1));
    }
}

TEST_CASE("property: profile step law and lattice identities on random prefixes") {
    std::mt19937_64 rng(3);
    auto random_set = [&]() {
        std::string head;
        std::uniform_int_distribution<int> coin(0, 2);
        for (int i = 0; i < 40; ++i) head += coin(rng) ? '1' : '0';
        return from_bits_then_evens(head);
    };
    for (int trial = 0; trial < 30; ++trial) {
        auto x = random_set(), y = random_set(), z = random_set();
        auto nx = force_zero_member(x), ny = force_zero_member(y), nz = force_zero_member(z);
        auto j = set_join(x, y), m = set_meet(x, y);
        for (u64 s = 0; s < 120; ++s) {
            CHECK(scan_zeros(j, s) == std::max(scan_zeros(nx, s), scan_zeros(ny, s)));
            CHECK(scan_zeros(m, s) == std::min(scan_zeros(nx, s), scan_zeros(ny, s)));
            u64 step = zeros_by_index(x, s + 1) - zeros_by_index(x, s);
            CHECK(step <= 1);
        }
        auto left = set_join(x, set_meet(y, z));
        auto right = set_meet(set_join(x, y), set_join(x, z));
        for (u64 i = 0; i < 120; ++i) CHECK(left.bit(i) == right.bit(i));
        (void)nz;
    }
}
