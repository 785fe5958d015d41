#pragma once

// Reduction witnesses, counterexample detectors, and the conversions between
// reductions and zero-count growth bounds.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "peq/pr_lang.hpp"
#include "peq/sets.hpp"

namespace peq::red {

using u64 = std::uint64_t;
using sets::Bits;
using sets::Convention;
using sets::Relation;
using sets::SetDescriptor;

enum class Claim { Reduction, GrowthH, GrowthP, GrowthQ, PrincipalR };
const char* claim_name(Claim c);
Claim parse_claim(std::string_view text);

// A total unary function known either as a clocked program or as a finite table.
class UnaryMap {
public:
    UnaryMap() = default;
    static UnaryMap from_program(pr::Program p, u64 budget_per_call);
    static UnaryMap from_table(std::vector<u64> values);

    // Throws BudgetExceeded when the program clock runs out, or when x lies past the table.
    u64 operator()(u64 x) const;
    bool is_table() const { return !program_; }
    const std::vector<u64>& table() const { return table_; }
    std::vector<u64> tabulate(u64 horizon) const;

private:
    std::optional<pr::Program> program_;
    u64 budget_ = 0;
    std::vector<u64> table_;
};

// A table with the claim it certifies and the horizon it was verified on.
struct Witness {
    Claim claim = Claim::Reduction;
    u64 horizon = 0;
    Convention convention = Convention::Index;
    std::string source;  // descriptor text of the domain side
    std::string target;
    std::vector<u64> values;
};

void write_witness(std::ostream& out, const Witness& w);
Witness read_witness(std::istream& in);

enum class Flavor { RtoRY, RYtoR, RXtoRY };
const char* flavor_name(Flavor f);

struct Counterexample {
    Flavor flavor = Flavor::RtoRY;
    u64 l = 0;
    u64 m = 0;
    u64 stage = 0;
    // Truth value of the left side of the violated biconditional.
    bool left_side = false;
};

// Memoized clocked runs of one program: within(x, s) is the value if the run
// converges in fewer than s steps.
class ClockedRuns {
public:
    explicit ClockedRuns(pr::Program p) : program_(std::move(p)) {}
    std::optional<u64> within(u64 x, u64 s);
    const pr::Program& program() const { return program_; }

private:
    struct Entry {
        bool done = false;
        u64 value = 0;
        u64 cost = 0;
        u64 tried = 0;  // no convergence below this budget
    };
    pr::Program program_;
    std::vector<Entry> memo_;
};

// Relation lookups backed by materialized carrier bits when available.
class RelationWindow {
public:
    explicit RelationWindow(Relation r) : r_(std::move(r)) {}
    bool related(u64 a, u64 b);

private:
    Relation r_;
    Bits bits_;
};

// Least (x, y) with x < y <= n and x R y != f(x) S f(y).
std::optional<Counterexample> check_reduction_prefix(const UnaryMap& f, const Relation& r,
                                                     const Relation& s, u64 n);
// Same check with f already tabulated on 0..n.
std::optional<Counterexample> check_reduction_table(const std::vector<u64>& f, const Relation& r,
                                                    const Relation& s, u64 n);

// The three stage-s detectors, scanning all pairs. Each returns the
// lexicographically least pair that violates the reduction biconditional.
std::optional<Counterexample> detect_r_to_ry(const pr::Program& p, const Relation& r,
                                             const Bits& sigma_y, u64 s);
std::optional<Counterexample> detect_ry_to_r(const pr::Program& p, const Relation& r,
                                             const Bits& sigma_y, u64 s);
std::optional<Counterexample> detect_rx_to_ry(const pr::Program& p, const Bits& sigma_x,
                                              const Bits& sigma_y, u64 s);

// Stateful form used by constructions: strings only grow between calls, so
// only pairs involving newly usable points need checking.
class Detector {
public:
    Detector(Flavor flavor, pr::Program p, std::optional<Relation> r = std::nullopt);
    // For RYtoR and RtoRY pass the Y string as `sigma`; RXtoRY also needs `sigma_x`.
    std::optional<Counterexample> step(const Bits& sigma, u64 s, const Bits* sigma_x = nullptr);

private:
    Flavor flavor_;
    ClockedRuns runs_;
    std::optional<RelationWindow> rel_;
    std::vector<u64> usable_;
    std::vector<std::uint8_t> is_usable_;
    bool hit(u64 l, u64 m, const Bits& sigma, const Bits* sigma_x);
};

// Index-convention growth bound: h(s) = f(greatest zero of X up to s), or 0.
std::vector<u64> synth_h_from_reduction(const std::vector<u64>& f, const SetDescriptor& x,
                                        const SetDescriptor& y, u64 horizon);
std::vector<u64> synth_reduction_from_h(const SetDescriptor& x, const SetDescriptor& y,
                                        const std::vector<u64>& h, u64 horizon);

// Step-convention bound p on the step window of X's first horizon+1 bits.
std::vector<u64> synth_p_from_reduction(const std::vector<u64>& f, const SetDescriptor& x,
                                        const SetDescriptor& y, u64 horizon);
std::vector<u64> synth_reduction_from_p(const SetDescriptor& x, const SetDescriptor& y,
                                        const std::vector<u64>& p, u64 horizon);
// Steps needed to decide bits 0..n.
u64 steps_to_decide(const SetDescriptor& x, u64 n);
// Largest index whose bits 0..index are all decided within t steps, if any.
std::optional<u64> decided_upto(const SetDescriptor& x, u64 t);

std::vector<u64> respect_normal_form(const std::vector<u64>& f, const SetDescriptor& x,
                                     const SetDescriptor& y, u64 horizon);
std::vector<u64> surjectivize(const std::vector<u64>& f, const SetDescriptor& x,
                              const SetDescriptor& y, u64 horizon);

// Throws NotAReduction with the offending pair.
void require_reduction(const std::vector<u64>& f, const SetDescriptor& x, const SetDescriptor& y,
                       u64 horizon, const std::string& what);

struct ImmunityVerdict {
    std::string program;
    bool injective = true;
    std::optional<std::pair<u64, u64>> collision;  // l < m with equal values
    std::optional<u64> hit;                        // least x whose value lies in X
};
std::vector<ImmunityVerdict> check_pre_immune(const SetDescriptor& x,
                                              const std::vector<pr::Program>& family,
                                              u64 horizon);

}  // namespace peq::red
