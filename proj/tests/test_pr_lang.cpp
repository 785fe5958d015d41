#include <limits>

#include "doctest.h"
#include "peq/pr_lang.hpp"
#include "term_gen.hpp"

using namespace peq;
using namespace peq::pr;

namespace {

// Reference interpreter: value and node-visit count with no clock at all.
struct Counted {
    u64 value;
    u64 cost;
};

Counted reference(const Term& t, const std::vector<u64>& args) {
    switch (t.kind) {
        case Kind::Zero: return {0, 1};
        case Kind::Succ: return {args.at(0) + 1, 1};
        case Kind::Proj: return {args.at(t.index - 1), 1};
        case Kind::Comp: {
            std::vector<u64> mid;
            u64 cost = 1;
            for (std::size_t i = 1; i < t.parts.size(); ++i) {
                Counted c = reference(*t.parts[i], args);
                mid.push_back(c.value);
                cost += c.cost;
            }
            Counted o = reference(*t.parts[0], mid);
            return {o.value, cost + o.cost};
        }
        case Kind::PrimRec: {
            std::vector<u64> params(args.begin(), args.end() - 1);
            Counted acc = reference(*t.parts[0], params);
            u64 cost = 1 + acc.cost;
            for (u64 m = 0; m < args.back(); ++m) {
                std::vector<u64> a = params;
                a.push_back(m);
                a.push_back(acc.value);
                acc = reference(*t.parts[1], a);
                cost += acc.cost;
            }
            return {acc.value, cost};
        }
    }
    return {0, 0};
}

u64 eval1(const TermPtr& t, u64 x, u64 budget = std::numeric_limits<u64>::max()) {
    return eval_clocked(*t, std::span<const u64>(&x, 1), budget).value;
}

}  // namespace

TEST_CASE("parse examples") {
    auto id = parse_term("P[1,1]");
    CHECK(id->kind == Kind::Proj);
    CHECK(id->arity == 1);
    CHECK(id->index == 1);

    auto s = parse_term("C(S; P[1,1])");
    CHECK(s->kind == Kind::Comp);
    CHECK(s->parts[0]->kind == Kind::Succ);
    CHECK(eval1(s, 4) == 5);

    auto rec = parse_term("R(Z; C(S; P[3,3]))");
    CHECK(rec->kind == Kind::PrimRec);
    CHECK(rec->parts[1]->kind == Kind::Comp);
    // Step arity 3 makes the recursion binary; the unary view feeds x to both slots.
    CHECK(rec->arity == 2);
    auto unary = as_unary(rec);
    StepOutcome o = eval_clocked(*unary, std::vector<u64>{3}, 100);
    CHECK(o.converged);
    CHECK(o.value == 3);
    Counted ref = reference(*unary, {3});
    CHECK(o.steps == ref.cost);
    // Wrapper C + two projections, recursion node, base, three step unfoldings of three nodes.
    CHECK(ref.cost == 3 + 1 + 1 + 3 * 3);

    // With only zero leaves, a recursion in base position fixes the arity.
    auto nested = parse_term("R(R(Z; Z); Z)");
    CHECK(nested->arity == 2);
    CHECK(nested->parts[0]->arity == 1);
}

TEST_CASE("parse errors carry positions") {
    try {
        parse_term("C(S; P[1,1], P[1,1])");
        FAIL("expected arity error");
    } catch (const ArityError& e) {
        CHECK(e.position == 2);
    }
    try {
        parse_term("C(S; P[1,1]");
        FAIL("expected syntax error");
    } catch (const SyntaxError& e) {
        CHECK(e.position == 11);
    }
    CHECK_THROWS_AS(parse_term("P[1,2]"), ArityError);
    CHECK_THROWS_AS(parse_term("Q"), SyntaxError);
    CHECK_THROWS_AS(parse_term("R(S; P[2,1])"), ArityError);
    CHECK_THROWS_AS(parse_term("P[1,1] \xc3\xa9"), SyntaxError);
}

TEST_CASE("serialization is canonical") {
    CHECK(serialize(*parse_term("C( S ;P[1,1] )")) == "C(S; P[1,1])");
    CHECK(serialize(*parse_term("C(P[2,1];P[1,1],S)")) == "C(P[2,1]; P[1,1], S)");
}

TEST_CASE("clocked evaluation examples") {
    auto id = proj(1, 1);
    StepOutcome a = eval_clocked(*id, std::vector<u64>{7}, 10);
    CHECK(a.converged);
    CHECK(a.value == 7);
    CHECK(a.steps == 1);
    CHECK_FALSE(eval_clocked(*id, std::vector<u64>{7}, 1).converged);
    CHECK_THROWS_AS(eval_clocked(*id, std::vector<u64>{1, 2}, 10), ArityError);
}

TEST_CASE("decode examples") {
    CHECK(decode(0)->kind == Kind::Zero);
    CHECK(decode(1)->kind == Kind::Succ);
    u64 e = encode(*proj(1, 1));
    CHECK(same_term(*decode(e), *proj(1, 1)));
    auto big = decode(1'000'000);
    CHECK(big != nullptr);
    CHECK(reference(*as_unary(big), {2}).cost > 0);
}

TEST_CASE("converges_within examples") {
    u64 e = encode(*proj(1, 1));
    CHECK(converges_within(e, 5, 10) == std::optional<u64>(5));
    CHECK_FALSE(converges_within(e, 5, 0).has_value());
    for (u64 code = 0; code < 300; ++code) {
        for (u64 s = 0; s < 30; ++s) {
            auto now = converges_within(code, 4, s);
            auto next = converges_within(code, 4, s + 1);
            if (now) CHECK(next == now);
        }
    }
    u64 succ_code = encode(*parse_term("C(S; P[1,1])"));
    CHECK(converges_within(succ_code, 4, 1000) == std::optional<u64>(5));
}

TEST_CASE("cantor pairing inverts") {
    for (u64 z = 0; z < 5000; ++z) {
        auto [x, y] = cantor_unpair(z);
        CHECK(cantor_pair(x, y) == z);
    }
    CHECK_THROWS_AS(cantor_pair(std::numeric_limits<u64>::max(), 1), std::overflow_error);
}

TEST_CASE("property: evaluator agrees with the reference interpreter") {
    testing::TermGen gen(11);
    for (int trial = 0; trial < 400; ++trial) {
        auto t = as_unary(gen.make(1 + gen.below(2), 3));
        u64 x = gen.below(6);
        Counted ref = reference(*t, {x});
        if (ref.cost > 200000) continue;
        StepOutcome exact = eval_clocked(*t, std::vector<u64>{x}, ref.cost + 1);
        CHECK(exact.converged);
        CHECK(exact.value == ref.value);
        CHECK(exact.steps == ref.cost);
        CHECK_FALSE(eval_clocked(*t, std::vector<u64>{x}, ref.cost).converged);
    }
}

TEST_CASE("property: encode inverts decode on canonical indices") {
    int encoded = 0;
    for (u64 e = 0; e < 3000; ++e) {
        auto t = decode(e);
        try {
            u64 back = encode(*t);
            CHECK(same_term(*decode(back), *t));
            ++encoded;
        } catch (const std::overflow_error&) {
        }
    }
    CHECK(encoded > 1000);
    testing::TermGen gen(5);
    for (int trial = 0; trial < 300; ++trial) {
        auto t = gen.make(1, 2);
        try {
            u64 e = encode(*t);
            CHECK(serialize(*decode(e)) == serialize(*t));
        } catch (const std::overflow_error&) {
        }
    }
}
