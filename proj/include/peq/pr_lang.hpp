#pragma once

// Primitive recursive term calculus: syntax, arity checking, Goedel coding and a
// step-counted evaluator.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peq/errors.hpp"

namespace peq::pr {

using u64 = std::uint64_t;

enum class Kind : std::uint8_t { Zero, Succ, Proj, Comp, PrimRec };

struct Term;
using TermPtr = std::shared_ptr<const Term>;

// Comp stores the outer function first, then the inner functions.
// PrimRec stores base then step. The step receives (params..., m, previous).
// Zero takes its arity from the surrounding context; alone it is nullary.
struct Term {
    Kind kind;
    unsigned arity;
    unsigned index = 0;
    std::vector<TermPtr> parts;
};

TermPtr zero(unsigned arity = 0);
TermPtr succ();
TermPtr proj(unsigned n, unsigned i);
TermPtr comp(TermPtr outer, std::vector<TermPtr> inners);
TermPtr primrec(TermPtr base, TermPtr step);

bool same_term(const Term& a, const Term& b);
std::string serialize(const Term& t);
TermPtr parse_term(std::string_view text);

// Cost model identifier written into trace headers.
inline constexpr const char* kCostModel = "node-visit-v1";

struct StepOutcome {
    bool converged = false;
    u64 value = 0;
    u64 steps = 0;
};

// One step per node visit. Converged iff the total cost is strictly below budget.
StepOutcome eval_clocked(const Term& t, std::span<const u64> args, u64 budget);

// Total decoding via Cantor pairing; ill-typed codes are repaired by inserting
// projections so every index names a well-formed term.
TermPtr decode(u64 e);
// Throws std::overflow_error when the code does not fit in 64 bits.
u64 encode(const Term& t);

// Wraps a term of any arity into a unary term by feeding the first argument
// to every parameter (or, for constants, by widening the zero leaves).
TermPtr as_unary(const TermPtr& t);

std::optional<u64> converges_within(u64 e, u64 x, u64 s);

u64 cantor_pair(u64 x, u64 y);
std::pair<u64, u64> cantor_unpair(u64 z);

// A unary program with a step clock, used for opponents and witnesses.
class Program {
public:
    Program() = default;
    explicit Program(TermPtr term);
    static Program from_text(std::string_view text);

    const Term& term() const { return *term_; }
    const TermPtr& term_ptr() const { return term_; }
    std::string text() const { return serialize(*term_); }

    StepOutcome run(u64 x, u64 budget) const;
    // The value if the run converged in fewer than s steps.
    std::optional<u64> within(u64 x, u64 s) const;
    // Evaluates with an effectively unbounded clock.
    u64 value(u64 x) const;
    u64 cost(u64 x) const;

private:
    TermPtr term_;
};

}  // namespace peq::pr
