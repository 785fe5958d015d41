#pragma once

// Stage-by-stage diagonalization constructions against a finite opponent
// family, with replayable traces and post-hoc validation.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "peq/reductions.hpp"
#include "peq/sets.hpp"

namespace peq::con {

using u64 = std::uint64_t;
using sets::Bits;
using sets::SetDescriptor;

enum class Policy { Once, RoundRobin };
const char* policy_name(Policy p);
Policy parse_policy(std::string_view text);

struct OpponentFamily {
    std::vector<pr::Program> members;
    Policy policy = Policy::Once;

    // Member attacked by requirement e, or nothing once a `once` family is used up.
    const pr::Program* member(u64 e) const;
};

// One term per line; `#` starts a comment; blank lines are skipped.
OpponentFamily parse_family(std::string_view text, Policy policy = Policy::Once);
OpponentFamily load_family(const std::string& path, Policy policy = Policy::Once);

enum class Construction {
    Immune,
    Incomparable,
    Antichain,
    Dense,
    DenseIncomparable,
    JoinSplit,
    MeetSplit,
    Diamond,
    Separator
};
const char* construction_name(Construction c);
Construction parse_construction(std::string_view text);
// Role names of the input sets, in order.
std::vector<std::string> input_roles(Construction c);

struct ConstructionSpec {
    Construction kind = Construction::Immune;
    std::vector<SetDescriptor> inputs;
    OpponentFamily family;
    u64 max_stages = 1000;
    u64 cycle_budget = 0;  // 0: only the total budget applies
    u64 count = 2;         // antichain size
    u64 k = 0;             // diamond: equilibrium points required up to max_stages
};

struct StageRecord {
    u64 stage = 0;
    std::string cycle;
    std::string phase;
    std::vector<std::string> bits;  // emitted bits per output, "-" for none
    std::vector<std::string> events;
};

// A counterexample as recorded, with the sets it was judged against named by role.
struct CxRecord {
    std::string cycle;
    u64 member = 0;
    std::string flavor;  // RtoRY, RYtoR, RXtoRY, collision, hit
    std::string source;  // role of the domain side (relation or set)
    std::string target;
    u64 l = 0;
    u64 m = 0;
    u64 stage = 0;
};

struct Exhaustion {
    std::string cycle;
    std::string phase;
    u64 stage = 0;
    std::string detail;
};

struct RunOutcome {
    ConstructionSpec spec;
    std::vector<std::string> output_names;
    std::vector<Bits> outputs;  // constructed prefixes
    std::vector<StageRecord> records;
    std::vector<std::string> notes;
    std::optional<Exhaustion> exhausted;
    std::vector<red::Witness> witnesses;
    std::vector<CxRecord> counterexamples;

    SetDescriptor descriptor(std::size_t output) const;
};

// Runs to the stage budget; exhaustion is reported in the outcome, not thrown.
RunOutcome run_construction(const ConstructionSpec& spec);
// Same, but throws StageBudgetExhausted.
RunOutcome run_or_throw(const ConstructionSpec& spec);

RunOutcome construct_immune(const OpponentFamily& family, u64 max_stages);
RunOutcome construct_incomparable(const SetDescriptor& r_carrier, const OpponentFamily& family,
                                  u64 max_stages);
RunOutcome construct_antichain(u64 count, const OpponentFamily& family, u64 max_stages);
RunOutcome construct_dense(const SetDescriptor& x, const SetDescriptor& z,
                           const OpponentFamily& family, u64 max_stages);
RunOutcome construct_dense_incomparable(const SetDescriptor& x, const SetDescriptor& t,
                                        const SetDescriptor& z, const OpponentFamily& family,
                                        u64 max_stages);
RunOutcome construct_join_split(const SetDescriptor& z, const OpponentFamily& family,
                                u64 max_stages);
RunOutcome construct_meet_split(const SetDescriptor& z, const OpponentFamily& family,
                                u64 max_stages);
RunOutcome construct_diamond(const SetDescriptor& x, const SetDescriptor& z,
                             const OpponentFamily& family, u64 max_stages, u64 k = 0);
RunOutcome construct_separator(const SetDescriptor& x, const SetDescriptor& y,
                               const OpponentFamily& family, u64 max_stages);

// A Trace-kind set: the given prefix, then the even numbers.
SetDescriptor trace_descriptor(Bits head, std::string dsl);

// Descriptor text that re-runs the construction and selects one output.
std::string construct_dsl(const ConstructionSpec& spec, std::size_t output);

std::string render_trace(const RunOutcome& run);

struct ParsedTrace {
    ConstructionSpec spec;
    std::vector<std::string> output_names;
    std::vector<StageRecord> records;
};
ParsedTrace parse_trace(std::string_view text);
// Bits of one output reassembled from the records.
Bits trace_output_bits(const ParsedTrace& trace, std::size_t output);

struct Check {
    std::string name;
    bool ok = true;
    std::string detail;
};
struct Validation {
    std::vector<Check> checks;
    bool ok() const;
};
Validation validate(const RunOutcome& run);

struct Divergence {
    u64 line = 0;           // 1-based line of the first differing byte
    u64 offset_trace = 0;   // byte offset of that difference in the given trace
    u64 offset_replay = 0;  // and in the replayed trace
    std::string expected;   // replayed line
    std::string found;      // given line
};
struct VerifyReport {
    std::optional<Divergence> divergence;
    Validation validation;
    bool ok() const { return !divergence && validation.ok(); }
};
VerifyReport verify_trace(std::string_view text);

}  // namespace peq::con
