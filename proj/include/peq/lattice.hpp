#pragma once

// Equilibrium points, bounded diamond-property evidence, slow sets and the
// tower operator bounds.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "peq/reductions.hpp"
#include "peq/sets.hpp"

namespace peq::lat {

using u64 = std::uint64_t;
using sets::Convention;
using sets::Bits;
using sets::SetDescriptor;

u64 zop(const SetDescriptor& x, u64 s, Convention c);
std::uint64_t family_hash(const std::vector<pr::Program>& family);

struct EquilibriumReport {
    Convention convention = Convention::Index;
    u64 horizon = 0;
    std::vector<u64> points;
};
EquilibriumReport equilibrium_points(const SetDescriptor& x, const SetDescriptor& y, u64 horizon,
                                     Convention c = Convention::Index);

// Reduction table from X to Y found by searching a growth bound up to `ceiling`.
std::optional<std::vector<u64>> certify_by_profile(const SetDescriptor& x, const SetDescriptor& y,
                                                   u64 horizon, u64 ceiling);

struct DiamondEvidence {
    std::string kind;  // "q" or "r"
    Convention convention = Convention::Index;
    u64 horizon = 0;
    u64 threshold = 0;
    bool relaxed = false;
    std::vector<u64> stages;
    bool evidence() const { return stages.size() >= threshold; }
};

// Counts t <= horizon with ZOP_Y[t] = ZOP_X[q(t)] (or <= when relaxed).
// `certificate` must be a reduction from X to Y on the horizon.
DiamondEvidence diamond_evidence_q(const SetDescriptor& x, const SetDescriptor& y,
                                   const std::vector<u64>& q,
                                   const std::vector<u64>* certificate, u64 horizon, u64 k,
                                   Convention c = Convention::Index, bool relaxed = false);

// Counts n in [n0, n1] with p_X(n) <= r(p_Y(n+1)), p_* the principal zero functions.
DiamondEvidence diamond_evidence_r(const SetDescriptor& x, const SetDescriptor& y,
                                   const red::UnaryMap& r, const std::vector<u64>* certificate,
                                   u64 n0, u64 n1, u64 k, u64 ceiling = 10'000'000);

struct DiamondWitness {
    int proof_case = 0;  // 1: rebuild X, 2: rebuild Y, 3: keep both
    SetDescriptor x_star;
    SetDescriptor y_star;
    std::vector<u64> c;      // case 1/2 only
    std::vector<u64> d;
    std::vector<u64> d_hat;
    u64 good_pairs = 0;      // distinct zero counts j carrying a good pair of the chosen case
    u64 equilibria = 0;      // equilibrium points of (X*, Y*) up to the horizon
    std::vector<std::string> notes;
};

// `min_pairs` is how many good pairs a case needs before it is chosen.
DiamondWitness canonical_diamond_witness(const SetDescriptor& x, const SetDescriptor& y,
                                         const std::vector<u64>& p, const std::vector<u64>& q,
                                         u64 horizon, Convention c = Convention::Index,
                                         u64 min_pairs = 1);

struct RestrictedWitness {
    std::vector<u64> q;
    u64 outer_count = 0;
    DiamondEvidence inner;
    u64 lost = 0;  // outer evidence stages with no matching inner stage
};

// X <= X' <= Y' <= Y with tables certifying each step; q is evidence for (X, Y).
RestrictedWitness restrict_diamond_witness(const SetDescriptor& x, const SetDescriptor& x_inner,
                                           const SetDescriptor& y_inner, const SetDescriptor& y,
                                           const std::vector<std::vector<u64>>& chain,
                                           const std::vector<u64>& q, u64 horizon,
                                           Convention c = Convention::Index);

// Zeros z_0 = 1, z_{n+1} = max(z_n + 1, max_r r(z_n) + 1); evens for an empty family.
SetDescriptor make_slow_set(const std::vector<pr::Program>& family, u64 window);

struct NondiamondSet {
    SetDescriptor set;
    bool degenerate = false;
};
// p_X(n) = max(p_X(n-1) + 1, max_r r(p_Y(n+1)) + 1, p_Y(n)).
NondiamondSet make_nondiamond_below(const SetDescriptor& y, const std::vector<pr::Program>& family,
                                    u64 window, u64 ceiling = 100'000'000);

struct SlownessCertificate {
    std::vector<std::string> family;
    u64 n0 = 0;
    u64 n1 = 0;
    struct Verdict {
        u64 member;
        u64 n;
        u64 next_zero;
        u64 bound;
        bool holds;
    };
    std::vector<Verdict> verdicts;
    bool all_hold() const;
};
SlownessCertificate check_slow(const SetDescriptor& x, const std::vector<pr::Program>& family,
                               u64 n0, u64 n1, u64 ceiling = 100'000'000);

struct X1BoundReport {
    u64 horizon = 0;
    Convention convention = Convention::Index;
    std::vector<u64> diamond_side;  // stages with ZOP_Y >= ZOP_X
    bool reduction_side = true;     // ZOP_Y <= ZOP_{X^[-1]} everywhere
    std::optional<u64> first_excess;
};
// `certificate` reduces Y to X on the horizon.
X1BoundReport x1_bound_check(const SetDescriptor& x, const SetDescriptor& y,
                             const std::vector<u64>* certificate, u64 horizon,
                             Convention c = Convention::Index);

// From a reduction g of Id to R_X, a reduction of Id to R_{X^[-1]}:
// drop the prefix of g up to the point mapped onto X's least zero.
std::vector<u64> shift_identity_reduction(const std::vector<u64>& g, const SetDescriptor& x,
                                          u64 ceiling = 1'000'000);

void write_report(std::ostream& out, const EquilibriumReport& r);
void write_report(std::ostream& out, const DiamondEvidence& e);
void write_report(std::ostream& out, const SlownessCertificate& c, std::uint64_t hash);

}  // namespace peq::lat
