#pragma once

// Random well-typed terms for property tests.

#include <random>

#include "peq/pr_lang.hpp"

namespace peq::testing {

class TermGen {
public:
    explicit TermGen(std::uint64_t seed) : rng_(seed) {}

    // A term of the requested arity with at most `depth` levels of nesting.
    pr::TermPtr make(unsigned arity, int depth) {
        unsigned pick = below(depth <= 0 ? 2 : 5);
        if (arity == 0) {
            if (pick % 2 == 0 || depth <= 0) return pr::zero(0);
            return pr::comp(pr::succ(), {make(0, depth - 1)});
        }
        switch (pick) {
            case 0: return pr::proj(arity, 1 + below(arity));
            case 1:
                if (arity == 1) return below(2) ? pr::succ() : pr::zero(1);
                return pr::zero(arity);
            case 2:
            case 3: {
                unsigned k = 1 + below(3);
                std::vector<pr::TermPtr> inners;
                for (unsigned i = 0; i < k; ++i) inners.push_back(make(arity, depth - 1));
                return pr::comp(make(k, depth - 1), std::move(inners));
            }
            default:
                return pr::primrec(make(arity - 1, depth - 1), make(arity + 1, depth - 1));
        }
    }

    std::uint64_t below(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng_); }

private:
    std::mt19937_64 rng_;
};

}  // namespace peq::testing
