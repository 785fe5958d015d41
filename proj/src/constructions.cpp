#include "peq/constructions.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "peq/lattice.hpp"

namespace peq::con {

using sets::count_zeros;

const char* policy_name(Policy p) { return p == Policy::Once ? "once" : "round-robin"; }

Policy parse_policy(std::string_view text) {
    if (text == "once") return Policy::Once;
    if (text == "round-robin") return Policy::RoundRobin;
    throw PreconditionFailed("unknown cycling policy '" + std::string(text) + "'");
}

const pr::Program* OpponentFamily::member(u64 e) const {
    if (members.empty()) return nullptr;
    if (policy == Policy::Once) return e < members.size() ? &members[e] : nullptr;
    return &members[e % members.size()];
}

OpponentFamily parse_family(std::string_view text, Policy policy) {
    OpponentFamily f;
    f.policy = policy;
    std::istringstream in{std::string(text)};
    std::string line;
    u64 number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t\r");
        std::string term = line.substr(first, last - first + 1);
        try {
            f.members.push_back(pr::Program::from_text(term));
        } catch (const SyntaxError& e) {
            throw SyntaxError("family line " + std::to_string(number) + ": " + e.what(),
                              e.position);
        } catch (const ArityError& e) {
            throw ArityError("family line " + std::to_string(number) + ": " + e.what(),
                             e.position);
        }
    }
    return f;
}

OpponentFamily load_family(const std::string& path, Policy policy) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read family file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_family(buf.str(), policy);
}

namespace {

struct NameEntry {
    Construction kind;
    const char* name;
};
constexpr NameEntry kNames[] = {
    {Construction::Immune, "immune"},
    {Construction::Incomparable, "incomparable"},
    {Construction::Antichain, "antichain"},
    {Construction::Dense, "dense"},
    {Construction::DenseIncomparable, "dense-incomparable"},
    {Construction::JoinSplit, "join-split"},
    {Construction::MeetSplit, "meet-split"},
    {Construction::Diamond, "diamond"},
    {Construction::Separator, "separator"},
};

}  // namespace

const char* construction_name(Construction c) {
    for (const auto& n : kNames)
        if (n.kind == c) return n.name;
    return "?";
}

Construction parse_construction(std::string_view text) {
    for (const auto& n : kNames)
        if (text == n.name) return n.kind;
    throw PreconditionFailed("unknown construction '" + std::string(text) + "'");
}

std::vector<std::string> input_roles(Construction c) {
    switch (c) {
        case Construction::Immune:
        case Construction::Antichain: return {};
        case Construction::Incomparable: return {"R"};
        case Construction::Dense: return {"X", "Z"};
        case Construction::DenseIncomparable: return {"X", "T", "Z"};
        case Construction::JoinSplit:
        case Construction::MeetSplit: return {"Z"};
        case Construction::Diamond: return {"X", "Z"};
        case Construction::Separator: return {"X", "Y"};
    }
    return {};
}

namespace {

std::vector<std::string> output_names_for(const ConstructionSpec& spec) {
    switch (spec.kind) {
        case Construction::JoinSplit:
        case Construction::MeetSplit:
        case Construction::Diamond: return {"Y0", "Y1"};
        case Construction::Separator: return {"Z"};
        case Construction::Antichain: {
            std::vector<std::string> v;
            for (u64 i = 0; i < spec.count; ++i) v.push_back("S" + std::to_string(i));
            return v;
        }
        default: return {"Y"};
    }
}

// Prefix length minus stage number.
u64 offset_for(Construction c) {
    switch (c) {
        case Construction::Dense:
        case Construction::DenseIncomparable:
        case Construction::Diamond:
        case Construction::Separator: return 1;
        default: return 0;
    }
}

const char* copy_rule_for(Construction c) {
    switch (c) {
        case Construction::JoinSplit:
        case Construction::MeetSplit: return "Z(s)";
        case Construction::Dense:
        case Construction::DenseIncomparable:
        case Construction::Diamond: return "source(s+1)";
        default: return "none";
    }
}

class TraceSource final : public sets::SetSource {
public:
    TraceSource(Bits head, std::string dsl) : head_(std::move(head)), dsl_(std::move(dsl)) {}
    std::string dsl() const override { return dsl_; }
    sets::Kind kind() const override { return sets::Kind::Trace; }

protected:
    std::uint8_t compute_bit(u64 n) override {
        if (n < head_.size()) return head_[n];
        return n % 2 == 0 ? 1 : 0;
    }

private:
    Bits head_;
    std::string dsl_;
};

std::string quote(const std::string& s) { return "\"" + s + "\""; }

// Node-visit clock used for every opponent value the constructions need
// outside a detector.
constexpr u64 kValueBudget = 4'000'000'000ULL;

u64 checked_value(const pr::Program& p, u64 x) {
    pr::StepOutcome o = p.run(x, kValueBudget);
    if (!o.converged)
        throw BudgetExceeded("opponent " + p.text() + " did not converge on " + std::to_string(x));
    return o.value;
}

// ---------------------------------------------------------------------------
// Stage machine scaffolding.

class Machine {
public:
    explicit Machine(const ConstructionSpec& spec) : spec_(spec) {
        out_.spec = spec;
        out_.output_names = output_names_for(spec);
        out_.outputs.resize(out_.output_names.size());
    }
    virtual ~Machine() = default;

    virtual RunOutcome run() {
        begin_record(0);
        init();
        end_record();
        for (u64 t = 1; t <= spec_.max_stages; ++t) {
            begin_record(t);
            step(t);
            end_record();
            if (requirement_open_ && spec_.cycle_budget && t - opened_at_ >= spec_.cycle_budget) {
                exhaust(t, "cycle budget of " + std::to_string(spec_.cycle_budget) +
                               " stages used up");
                break;
            }
        }
        if (!out_.exhausted && requirement_open_ && spec_.family.policy == Policy::Once)
            exhaust(spec_.max_stages, exhaustion_detail());
        return std::move(out_);
    }

protected:
    const ConstructionSpec& spec_;
    RunOutcome out_;
    StageRecord rec_;
    std::string cycle_ = "-";
    std::string phase_ = "init";
    bool requirement_open_ = false;
    u64 opened_at_ = 0;

    virtual void init() = 0;
    virtual void step(u64 t) = 0;
    virtual std::string exhaustion_detail() const { return "no counterexample before the budget"; }

    void begin_record(u64 t) {
        rec_ = StageRecord{};
        rec_.stage = t;
        rec_.cycle = cycle_;
        rec_.phase = phase_;
        rec_.bits.assign(out_.outputs.size(), "");
    }
    void end_record() {
        for (auto& b : rec_.bits)
            if (b.empty()) b = "-";
        out_.records.push_back(std::move(rec_));
    }
    void emit(std::size_t output, bool bit) {
        out_.outputs[output].push_back(bit ? 1 : 0);
        rec_.bits[output].push_back(bit ? '1' : '0');
    }
    void event(std::string e) { rec_.events.push_back(std::move(e)); }
    void open(const std::string& id, bool requirement, u64 stage) {
        cycle_ = id;
        requirement_open_ = requirement;
        opened_at_ = stage;
        event("open:" + id);
    }
    void close() { event("close:" + cycle_); }
    void set_phase(const std::string& p) {
        if (p != phase_) event("phase:" + p);
        phase_ = p;
    }
    void record_cx(const red::Counterexample& c, u64 member, const std::string& source,
                   const std::string& target) {
        CxRecord r{cycle_, member, red::flavor_name(c.flavor), source, target, c.l, c.m, c.stage};
        event("cx:" + r.flavor + ":" + std::to_string(c.l) + ":" + std::to_string(c.m) + ":" +
              std::to_string(c.stage));
        out_.counterexamples.push_back(std::move(r));
    }
    void exhaust(u64 stage, const std::string& detail) {
        out_.exhausted = Exhaustion{cycle_, phase_, stage, detail};
    }
};

// ---------------------------------------------------------------------------
// Co-immune set: P_e closes on a collision or on an image inside Y.

class ImmuneWatch {
public:
    explicit ImmuneWatch(pr::Program p) : runs_(std::move(p)) {}

    struct Found {
        bool collision;
        u64 a;
        u64 b;
    };

    // Inputs up to s, clock s, judged against sigma (length s).
    std::optional<Found> step(const Bits& sigma, u64 s) {
        if (converged_.size() < s + 1) converged_.resize(s + 1, 0);
        std::vector<u64> fresh;
        for (u64 m = 0; m <= s; ++m) {
            if (converged_[m]) continue;
            if (auto v = runs_.within(m, s)) {
                converged_[m] = 1;
                fresh.push_back(m);
                values_.emplace(m, *v);
            }
        }
        for (u64 m : fresh) {
            u64 v = values_[m];
            auto it = first_.find(v);
            if (it != first_.end()) return Found{true, std::min(it->second, m), std::max(it->second, m)};
            first_.emplace(v, m);
            pending_.push_back(m);
        }
        for (u64 m : pending_) {
            u64 z = values_[m];
            if (z < sigma.size() && sigma[z]) return Found{false, m, z};
        }
        return std::nullopt;
    }

private:
    red::ClockedRuns runs_;
    std::vector<std::uint8_t> converged_;
    std::map<u64, u64> values_;
    std::map<u64, u64> first_;
    std::vector<u64> pending_;
};

class ImmuneMachine final : public Machine {
public:
    using Machine::Machine;

private:
    u64 e_ = 0;
    std::optional<ImmuneWatch> watch_;
    u64 fallback_count_ = 0;

    void open_next(u64 stage) {
        if (const pr::Program* p = spec_.family.member(e_)) {
            watch_.emplace(*p);
            open("P" + std::to_string(e_), true, stage);
        } else {
            watch_.reset();
            open("F", false, stage);
        }
        phase_ = "copying";
    }
    void init() override { open_next(0); }
    void step(u64 t) override {
        u64 s = t - 1;
        if (!watch_) {
            emit(0, fallback_count_++ % 2 == 0);
            return;
        }
        auto found = watch_->step(out_.outputs[0], s);
        if (!found) {
            emit(0, true);
            return;
        }
        std::string flavor = found->collision ? "collision" : "hit";
        event("cx:" + flavor + ":" + std::to_string(found->a) + ":" + std::to_string(found->b) +
              ":" + std::to_string(s));
        out_.counterexamples.push_back(CxRecord{cycle_, e_, flavor, "-", "Y", found->a, found->b, s});
        emit(0, false);
        close();
        ++e_;
        open_next(t);
    }
};

// ---------------------------------------------------------------------------
// Incomparability with a given R; also drives each member of an antichain.

struct Target {
    std::string role;
    sets::Relation relation;
};

class IncomparableCore {
public:
    // Requirement r attacks member e against targets[i].
    struct Requirement {
        u64 e;
        std::size_t target;
    };

    IncomparableCore(const OpponentFamily& family, std::vector<Target> targets)
        : family_(family), targets_(std::move(targets)) {}

    // Next requirement index after r (inclusive search), or nothing.
    std::optional<std::pair<u64, Requirement>> next_from(u64 r) const {
        if (targets_.size() == 1) {
            if (!family_.member(r)) return std::nullopt;
            return std::make_pair(r, Requirement{r, 0});
        }
        if (family_.members.empty()) return std::nullopt;
        u64 limit = family_.policy == Policy::Once
                        ? pr::cantor_pair(family_.members.size() - 1, targets_.size() - 1)
                        : ~u64{0};
        for (; r <= limit; ++r) {
            auto [e, i] = pr::cantor_unpair(r);
            if (i < targets_.size() && family_.member(e))
                return std::make_pair(r, Requirement{e, static_cast<std::size_t>(i)});
        }
        return std::nullopt;
    }

    const OpponentFamily& family_;
    std::vector<Target> targets_;
};

class IncomparableMachine : public Machine {
public:
    IncomparableMachine(const ConstructionSpec& spec, std::vector<Target> targets,
                        std::size_t output, std::string prefix)
        : Machine(spec), core_(spec.family, std::move(targets)), output_(output),
          prefix_(std::move(prefix)) {}

    RunOutcome take() { return std::move(out_); }
    void run_into(RunOutcome& into) {
        begin_record(0);
        init();
        end_record();
        for (u64 t = 1; t <= spec_.max_stages; ++t) {
            begin_record(t);
            step(t);
            end_record();
            if (requirement_open_ && spec_.cycle_budget && t - opened_at_ >= spec_.cycle_budget) {
                exhaust(t, "cycle budget used up");
                break;
            }
        }
        if (!out_.exhausted && requirement_open_ && spec_.family.policy == Policy::Once)
            exhaust(spec_.max_stages, exhaustion_detail());
        into.outputs[output_] = out_.outputs[output_];
        for (auto& r : out_.records) into.records.push_back(std::move(r));
        for (auto& c : out_.counterexamples) into.counterexamples.push_back(std::move(c));
        if (out_.exhausted && !into.exhausted) into.exhausted = out_.exhausted;
    }

protected:
    IncomparableCore core_;
    std::size_t output_;
    std::string prefix_;
    u64 r_ = 0;
    bool q_side_ = false;
    IncomparableCore::Requirement req_{0, 0};
    std::optional<red::Detector> det_;
    u64 fallback_count_ = 0;

    std::string id(char letter) const {
        std::string s = prefix_ + letter + std::to_string(req_.e);
        if (core_.targets_.size() > 1) s += "." + std::to_string(req_.target);
        return s;
    }
    void open_requirement(u64 stage) {
        const Target& tg = core_.targets_[req_.target];
        const pr::Program& p = *core_.family_.member(req_.e);
        det_.emplace(q_side_ ? red::Flavor::RYtoR : red::Flavor::RtoRY, p, tg.relation);
        open(id(q_side_ ? 'Q' : 'P'), true, stage);
        phase_ = "copying";
    }
    void open_from(u64 r, u64 stage) {
        if (auto n = core_.next_from(r)) {
            r_ = n->first;
            req_ = n->second;
            q_side_ = false;
            open_requirement(stage);
        } else {
            det_.reset();
            open(prefix_ + "F", false, stage);
            phase_ = "copying";
        }
    }
    void init() override {
        cycle_ = prefix_.empty() ? "-" : prefix_.substr(0, prefix_.size() - 1);
        rec_.cycle = cycle_;
        open_from(0, 0);
    }
    void step(u64 t) override {
        u64 s = t - 1;
        Bits& sigma = out_.outputs[output_];
        if (!det_) {
            emit(output_, fallback_count_++ % 2 == 0);
            return;
        }
        auto cx = det_->step(sigma, s);
        if (!cx) {
            emit(output_, !q_side_);
            return;
        }
        const Target& tg = core_.targets_[req_.target];
        std::string self = out_.output_names[output_];
        if (q_side_)
            record_cx(*cx, req_.e, self, tg.role);
        else
            record_cx(*cx, req_.e, tg.role, self);
        emit(output_, false);
        close();
        if (!q_side_) {
            q_side_ = true;
            open_requirement(t);
        } else {
            open_from(r_ + 1, t);
        }
    }
};

RunOutcome run_incomparable(const ConstructionSpec& spec) {
    if (spec.inputs.size() != 1) throw PreconditionFailed("incomparable needs one input set");
    IncomparableMachine m(spec, {Target{"R", sets::equiv_view(spec.inputs[0])}}, 0, "");
    return m.run();
}

RunOutcome run_antichain(const ConstructionSpec& spec) {
    if (spec.count < 1) throw PreconditionFailed("antichain count must be at least 1");
    RunOutcome out;
    out.spec = spec;
    out.output_names = output_names_for(spec);
    out.outputs.resize(spec.count);
    SetDescriptor first = sets::evens();
    out.outputs[0] = first.prefix(spec.max_stages == 0 ? 0 : spec.max_stages - 1);
    if (spec.max_stages == 0) out.outputs[0].clear();
    std::vector<SetDescriptor> built{trace_descriptor(out.outputs[0], construct_dsl(spec, 0))};
    for (u64 n = 1; n < spec.count; ++n) {
        std::vector<Target> targets;
        for (u64 i = 0; i < n; ++i)
            targets.push_back(Target{"S" + std::to_string(i), sets::equiv_view(built[i])});
        ConstructionSpec sub = spec;
        IncomparableMachine m(sub, std::move(targets), n, "S" + std::to_string(n) + ":");
        m.run_into(out);
        built.push_back(trace_descriptor(out.outputs[n], construct_dsl(spec, n)));
        if (out.exhausted) break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Density: Y between X and Z, copying Z in P-cycles and X in Q-cycles.

class DenseMachine final : public Machine {
public:
    DenseMachine(const ConstructionSpec& spec, SetDescriptor x, std::optional<SetDescriptor> t,
                 SetDescriptor z, std::vector<std::string> notes)
        : Machine(spec), x_(std::move(x)), t_(std::move(t)), z_(std::move(z)) {
        out_.notes = std::move(notes);
    }

private:
    SetDescriptor x_;
    std::optional<SetDescriptor> t_;
    SetDescriptor z_;
    Bits sx_, sz_, st_;
    u64 nx_ = 0, ny_ = 0, nz_ = 0;
    u64 e_ = 0;
    bool q_side_ = false;
    bool transition_ = false;
    std::optional<red::Detector> det_;

    void open_cycle(u64 stage) {
        transition_ = false;
        phase_ = "copying";
        const pr::Program* p = spec_.family.member(e_);
        if (!p) {
            det_.reset();
            q_side_ = false;
            open("F", false, stage);
            return;
        }
        det_.emplace(red::Flavor::RXtoRY, *p);
        open(std::string(q_side_ ? "Q" : "P") + std::to_string(e_), true, stage);
    }
    void init() override {
        sx_.push_back(x_.bit(0));
        sz_.push_back(z_.bit(0));
        if (t_) st_.push_back(t_->bit(0));
        emit(0, true);
        open_cycle(0);
    }
    void close_and_advance(u64 t) {
        close();
        if (q_side_) ++e_;
        q_side_ = !q_side_;
        open_cycle(t);
    }
    void step(u64 t) override {
        bool xb = x_.bit(t), zb = z_.bit(t);
        sx_.push_back(xb);
        sz_.push_back(zb);
        if (t_) st_.push_back(t_->bit(t));
        nx_ += !xb;
        nz_ += !zb;
        const Bits& y = out_.outputs[0];
        if (!det_) {  // fallback: keep copying Z
            emit(0, zb);
            ny_ += !zb;
            return;
        }
        if (!q_side_) {
            if (transition_) {
                emit(0, true);
                if (nx_ == ny_) close_and_advance(t);
                return;
            }
            emit(0, zb);
            ny_ += !zb;
            // Against R_Y <= R_X (or R_Y <= R_T).
            const Bits& target = t_ ? st_ : sx_;
            if (auto cx = det_->step(target, t, &y)) {
                record_cx(*cx, e_, "Y", t_ ? "T" : "X");
                transition_ = true;
                set_phase("transition");
                if (nx_ == ny_) close_and_advance(t);
            }
            return;
        }
        if (transition_) {
            emit(0, false);
            ++ny_;
            if (ny_ == nz_) close_and_advance(t);
            return;
        }
        emit(0, xb);
        ny_ += !xb;
        // Against R_Z <= R_Y (or R_T <= R_Y).
        const Bits& source = t_ ? st_ : sz_;
        if (auto cx = det_->step(y, t, &source)) {
            record_cx(*cx, e_, t_ ? "T" : "Z", "Y");
            transition_ = true;
            set_phase("transition");
            if (ny_ == nz_) close_and_advance(t);
        }
    }
    std::string exhaustion_detail() const override {
        if (!transition_) return "no counterexample before the budget";
        return q_side_ ? "Y did not catch up with the zeros of Z" : "X did not catch up with the zeros of Y";
    }
};

// Profile domination #X[s] <= #Z[s] on 0..horizon, else the first failure.
std::optional<u64> domination_failure(const SetDescriptor& x, const SetDescriptor& z, u64 horizon) {
    for (u64 s = 0; s <= horizon; ++s)
        if (x.zeros_by_index(s) > z.zeros_by_index(s)) return s;
    return std::nullopt;
}

void require_zero_member(const SetDescriptor& x, const std::string& role) {
    if (!x.bit(0)) throw PreconditionFailed("0 must belong to " + role + " (" + x.dsl() + ")");
}

void require_infinite_coinfinite(const SetDescriptor& x, const std::string& role, u64 horizon) {
    bool one = false, zero = false;
    for (u64 n = 1; n <= horizon && !(one && zero); ++n) (x.bit(n) ? one : zero) = true;
    if (!one || !zero)
        throw PreconditionFailed(role + " must be infinite and coinfinite; " + x.dsl() +
                                 " shows only " + (one ? "ones" : "zeros") + " after 0 up to " +
                                 std::to_string(horizon));
}

RunOutcome run_dense(const ConstructionSpec& spec) {
    bool with_t = spec.kind == Construction::DenseIncomparable;
    if (spec.inputs.size() != (with_t ? 3u : 2u))
        throw PreconditionFailed("wrong number of input sets");
    SetDescriptor x = spec.inputs[0];
    std::optional<SetDescriptor> t;
    if (with_t) t = spec.inputs[1];
    SetDescriptor z = spec.inputs.back();
    require_zero_member(x, "X");
    require_zero_member(z, "Z");
    require_infinite_coinfinite(z, "Z", spec.max_stages + 1);
    std::vector<std::string> notes;
    u64 horizon = spec.max_stages + 1;
    if (auto bad = domination_failure(x, z, horizon)) {
        notes.push_back("Z replaced by join(X, Z): zero count of X exceeds that of Z at " +
                        std::to_string(*bad));
        z = sets::set_join(x, z);
    }
    if (t) {
        u64 h = std::min<u64>(horizon, 500);
        if (!lat::certify_by_profile(x, *t, h, 64 * (h + 1)))
            throw PreconditionFailed("no reduction from X to T found up to " + std::to_string(h));
        if (!lat::certify_by_profile(*t, z, h, 64 * (h + 1)))
            throw PreconditionFailed("no reduction from T to Z found up to " + std::to_string(h));
        if (t->dsl() == x.dsl()) notes.push_back("T equals X: P-cycles behave as plain density");
    }
    DenseMachine m(spec, x, t, z, std::move(notes));
    RunOutcome out = m.run();
    // Reductions X -> Y -> Z read off the profiles: nonmembers go to the
    // matching zero, members to 0.
    SetDescriptor y = out.descriptor(0);
    u64 hz = out.outputs[0].size() - 1;
    auto table = [&](const SetDescriptor& from, const SetDescriptor& to) {
        std::vector<u64> f(hz + 1, 0);
        std::vector<u64> to_zeros;
        for (u64 n = 0; n <= hz; ++n)
            if (!to.bit(n)) to_zeros.push_back(n);
        u64 count = 0;
        for (u64 n = 0; n <= hz; ++n) {
            if (from.bit(n)) continue;
            if (count >= to_zeros.size())
                throw PreconditionFailed("zero-count chain broken at " + std::to_string(n));
            f[n] = to_zeros[count++];
        }
        return f;
    };
    red::Witness g{red::Claim::Reduction, hz, sets::Convention::Index, x.dsl(), y.dsl(),
                   table(x, y)};
    red::Witness h{red::Claim::Reduction, hz, sets::Convention::Index, y.dsl(), z.dsl(),
                   table(y, z)};
    out.witnesses = {std::move(g), std::move(h)};
    return out;
}

// ---------------------------------------------------------------------------
// Join and meet splits of Z.

class SplitMachine final : public Machine {
public:
    SplitMachine(const ConstructionSpec& spec, SetDescriptor z, bool meet)
        : Machine(spec), z_(std::move(z)), meet_(meet) {}

private:
    SetDescriptor z_;
    bool meet_;
    Bits sz_;
    u64 n0_ = 0, n1_ = 0;
    u64 e_ = 0;
    bool q_side_ = false;
    bool transition_ = false;
    bool dummy_ = false;
    std::optional<red::Detector> det_;

    void open_cycle(u64 stage) {
        transition_ = false;
        phase_ = "copying";
        const pr::Program* p = spec_.family.member(e_);
        if (!p) {
            det_.reset();
            dummy_ = true;
            open("F", false, stage);
            return;
        }
        det_.emplace(red::Flavor::RXtoRY, *p);
        open(std::string(q_side_ ? "Q" : "P") + std::to_string(e_), true, stage);
    }
    void init() override { open_cycle(0); }
    void put(std::size_t side, bool bit) {
        emit(side, bit);
        (side == 0 ? n0_ : n1_) += !bit;
    }
    void close_and_advance(u64 t) {
        close();
        if (q_side_) ++e_;
        q_side_ = !q_side_;
        open_cycle(t);
    }
    void step(u64 t) override {
        bool zb = z_.bit(t - 1);
        sz_.push_back(zb);
        // P-side copies Z into Y0 and holds Y1 constant; Q-side swaps the roles.
        std::size_t copier = q_side_ ? 1 : 0;
        std::size_t other = 1 - copier;
        bool constant = !meet_;  // 1 for joins, 0 for meets
        if (transition_) {
            put(0, copier == 0 ? zb : !constant);
            put(1, copier == 1 ? zb : !constant);
            if (n0_ == n1_) close_and_advance(t);
            return;
        }
        put(0, copier == 0 ? zb : constant);
        put(1, copier == 1 ? zb : constant);
        std::optional<red::Counterexample> cx;
        if (det_) {
            const Bits& held = out_.outputs[other];
            // Join: against R_Z <= R_{held}. Meet: against R_{held} <= R_Z.
            cx = meet_ ? det_->step(sz_, t, &held) : det_->step(held, t, &sz_);
            if (cx) {
                std::string held_name = out_.output_names[other];
                if (meet_)
                    record_cx(*cx, e_, held_name, "Z");
                else
                    record_cx(*cx, e_, "Z", held_name);
            }
        }
        if (cx || dummy_) {
            if (n0_ == n1_) {
                close_and_advance(t);
            } else {
                transition_ = true;
                set_phase("transition");
            }
        }
    }
    std::string exhaustion_detail() const override {
        if (transition_) return "zero counts of Y0 and Y1 never matched";
        return "no counterexample before the budget";
    }
};

RunOutcome run_split(const ConstructionSpec& spec) {
    if (spec.inputs.size() != 1) throw PreconditionFailed("split needs one input set");
    bool meet = spec.kind == Construction::MeetSplit;
    const SetDescriptor& z = spec.inputs[0];
    if (!meet) require_infinite_coinfinite(z, "Z", spec.max_stages + 1);
    SplitMachine m(spec, z, meet);
    return m.run();
}

// ---------------------------------------------------------------------------
// Diamond: Y0, Y1 with Y0 meet Y1 = X and Y0 join Y1 = Z.

class DiamondMachine final : public Machine {
public:
    DiamondMachine(const ConstructionSpec& spec, SetDescriptor x, SetDescriptor z,
                   std::vector<std::string> notes)
        : Machine(spec), x_(std::move(x)), z_(std::move(z)) {
        out_.notes = std::move(notes);
    }

private:
    SetDescriptor x_, z_;
    Bits sz_;
    u64 n0_ = 0, n1_ = 0;
    u64 e_ = 0;
    bool p_side_ = false;  // Q-cycles first
    bool transition_ = false;
    u64 transition_since_ = 0;
    std::optional<red::Detector> det_;

    void open_cycle(u64 stage) {
        phase_ = "copying";
        transition_ = false;
        const pr::Program* p = spec_.family.member(e_);
        if (!p) {
            det_.reset();
            p_side_ = false;
            transition_ = true;
            transition_since_ = stage;
            phase_ = "transition";
            open("F", false, stage);
            return;
        }
        det_.emplace(red::Flavor::RXtoRY, *p);
        open(std::string(p_side_ ? "P" : "Q") + std::to_string(e_), true, stage);
    }
    void init() override {
        sz_.push_back(z_.bit(0));
        emit(0, true);
        emit(1, true);
        open_cycle(0);
    }
    void step(u64 t) override {
        bool xb = x_.bit(t), zb = z_.bit(t);
        sz_.push_back(zb);
        bool was_transition = transition_;
        // Q-side copies X into Y0 and Z into Y1; P-side swaps.
        bool b0 = p_side_ ? zb : xb;
        bool b1 = p_side_ ? xb : zb;
        emit(0, b0);
        emit(1, b1);
        n0_ += !b0;
        n1_ += !b1;
        if (was_transition) {
            if (n0_ == n1_) {
                close();
                if (det_) {
                    if (p_side_) ++e_;
                    p_side_ = !p_side_;
                }
                open_cycle(t);
            }
            return;
        }
        std::size_t against = p_side_ ? 1 : 0;
        const Bits& held = out_.outputs[against];
        if (auto cx = det_->step(held, t, &sz_)) {
            record_cx(*cx, e_, "Z", out_.output_names[against]);
            transition_ = true;
            transition_since_ = t;
            set_phase("transition");
        }
    }
    std::string exhaustion_detail() const override {
        if (transition_)
            return "no equilibrium point of (X, Z) since stage " + std::to_string(transition_since_);
        return "no counterexample before the budget";
    }
};

RunOutcome run_diamond(const ConstructionSpec& spec) {
    if (spec.inputs.size() != 2) throw PreconditionFailed("diamond needs X and Z");
    SetDescriptor x = spec.inputs[0];
    SetDescriptor z = spec.inputs[1];
    require_zero_member(x, "X");
    require_zero_member(z, "Z");
    std::vector<std::string> notes;
    u64 horizon = spec.max_stages + 1;
    if (auto bad = domination_failure(x, z, horizon)) {
        notes.push_back("Z replaced by join(X, Z): zero count of X exceeds that of Z at " +
                        std::to_string(*bad));
        z = sets::set_join(x, z);
    }
    if (spec.k > 0) {
        auto eq = lat::equilibrium_points(x, z, spec.max_stages);
        if (eq.points.size() < spec.k)
            throw PreconditionFailed("(X, Z) has " + std::to_string(eq.points.size()) +
                                     " equilibrium points up to " +
                                     std::to_string(spec.max_stages) + ", fewer than k = " +
                                     std::to_string(spec.k));
    }
    DiamondMachine m(spec, x, z, std::move(notes));
    return m.run();
}

// ---------------------------------------------------------------------------
// Separator: Z below X^[-1] without the diamond property against X, and not
// reducible to Y, for every family member.

class SeparatorMachine final : public Machine {
public:
    SeparatorMachine(const ConstructionSpec& spec, SetDescriptor x, SetDescriptor y)
        : Machine(spec), x_(std::move(x)), y_(std::move(y)), x1_(sets::drop_least_zero(x_)) {
        const auto& f = spec_.family.members;
        runmax_.resize(f.size());
        costs_.resize(f.size());
    }

private:
    SetDescriptor x_, y_, x1_;
    u64 v_ = 0;      // index being attacked
    u64 k_ = 0;      // input being processed
    u64 spent_ = 0;  // stages spent on p'_v(k)
    u64 zz_ = 0;     // zero count of Z so far
    std::vector<u64> zop_z_{0};
    std::vector<std::vector<u64>> runmax_;
    std::vector<std::vector<u64>> costs_;
    u64 bracket_failures_ = 0;

    u64 members() const { return spec_.family.members.size(); }
    void ensure(u64 n) {
        const auto& f = spec_.family.members;
        for (std::size_t i = 0; i < f.size(); ++i)
            while (runmax_[i].size() <= n) {
                u64 j = runmax_[i].size();
                pr::StepOutcome o = f[i].run(j, kValueBudget);
                if (!o.converged)
                    throw BudgetExceeded("opponent " + f[i].text() + " did not converge on " +
                                         std::to_string(j));
                u64 prev = j ? runmax_[i].back() : 0;
                runmax_[i].push_back(std::max(prev, o.value));
                costs_[i].push_back(o.steps);
            }
    }
    // Normalized member: strictly increasing in n and in e.
    u64 value(u64 e, u64 n) {
        ensure(n);
        u64 v = e + n;
        u64 top = members() == 0 ? 0 : std::min<u64>(e, members() - 1) + 1;
        for (u64 i = 0; i < top; ++i) v += runmax_[i][n];
        return v;
    }
    u64 cost(u64 e, u64 n) {
        ensure(n);
        if (e >= members()) return 2;
        u64 c = 1;
        for (u64 i = 0; i <= e; ++i) c += costs_[i][n];
        return std::max<u64>(c, 2);
    }
    std::string id() const { return "V" + std::to_string(v_); }
    void init() override {
        require_zero_member(x_, "X");
        emit(0, true);
        cycle_ = id();
        requirement_open_ = v_ < members();
        rec_.cycle = "-";
        event("open:" + cycle_);
        phase_ = "run";
    }
    void step(u64 t) override {
        u64 s = t - 1;  // stage of the proof; decides Z(s+1) = Z(t)
        ++spent_;
        bool up = false;
        u64 val = value(v_, k_);
        if (spent_ >= cost(v_, k_) && s >= val) {
            u64 k = k_;
            event("conv:" + std::to_string(k) + ":" + std::to_string(val));
            if (!x1_.bit(k + 1)) {
                u64 zx = x_.zeros_by_index(s);
                u64 cap = zx == 0 ? 0 : zx - 1;
                up = std::min(zz_ + 1, cap) > zz_;
            }
            ++k_;
            spent_ = 0;
            // A found value p'_v(k) with ZOP_Z[k] above ZOP_Y[p'_v(k)] moves to the next index.
            u64 zy = y_.zeros_by_index(val);
            if (zop_z_[k] > zy) {
                event("vinc:" + std::to_string(v_) + ":" + std::to_string(k) + ":" +
                      std::to_string(zop_z_[k]) + ":" + std::to_string(zy));
                close();
                ++v_;
                cycle_ = id();
                requirement_open_ = v_ < members();
                opened_at_ = t;
                event("open:" + cycle_);
            }
        }
        emit(0, !up);
        zz_ += up;
        zop_z_.push_back(zz_);
        // Bracket: ZOP_Z[t] equals ZOP_{X^[-1]}[k*(t)].
        if (zz_ != x1_.zeros_by_index(k_)) ++bracket_failures_;
    }
    std::string exhaustion_detail() const override {
        return "V stopped at " + std::to_string(v_) + " of " + std::to_string(members());
    }

public:
    RunOutcome run() override {
        RunOutcome out = Machine::run();
        if (bracket_failures_)
            out.notes.push_back("bracket invariant failed at " + std::to_string(bracket_failures_) +
                                " stages");
        return out;
    }
};

RunOutcome run_separator(const ConstructionSpec& spec) {
    if (spec.inputs.size() != 2) throw PreconditionFailed("separator needs X and Y");
    SeparatorMachine m(spec, spec.inputs[0], spec.inputs[1]);
    RunOutcome out = m.run();
    // Desk-level anti-certificate: a stage per member with ZOP_{X^[-1]} above ZOP_Y of the image.
    SetDescriptor x1 = sets::drop_least_zero(spec.inputs[0]);
    for (std::size_t i = 0; i < spec.family.members.size(); ++i) {
        bool found = false;
        for (u64 s = 0; s <= spec.max_stages && !found; ++s) {
            u64 img = checked_value(spec.family.members[i], s);
            found = x1.zeros_by_index(s) > spec.inputs[1].zeros_by_index(img);
        }
        if (!found)
            out.notes.push_back("no anti-certificate stage for member " + std::to_string(i) +
                                " up to " + std::to_string(spec.max_stages));
    }
    return out;
}

}  // namespace

SetDescriptor trace_descriptor(Bits head, std::string dsl) {
    return SetDescriptor(std::make_shared<TraceSource>(std::move(head), std::move(dsl)));
}

SetDescriptor RunOutcome::descriptor(std::size_t output) const {
    return trace_descriptor(outputs.at(output), construct_dsl(spec, output));
}

RunOutcome run_construction(const ConstructionSpec& spec) {
    auto roles = input_roles(spec.kind);
    if (spec.inputs.size() != roles.size())
        throw PreconditionFailed(std::string(construction_name(spec.kind)) + " takes " +
                                 std::to_string(roles.size()) + " input sets, got " +
                                 std::to_string(spec.inputs.size()));
    switch (spec.kind) {
        case Construction::Immune: {
            ImmuneMachine m(spec);
            return m.run();
        }
        case Construction::Incomparable: return run_incomparable(spec);
        case Construction::Antichain: return run_antichain(spec);
        case Construction::Dense:
        case Construction::DenseIncomparable: return run_dense(spec);
        case Construction::JoinSplit:
        case Construction::MeetSplit: return run_split(spec);
        case Construction::Diamond: return run_diamond(spec);
        case Construction::Separator: return run_separator(spec);
    }
    throw PreconditionFailed("unknown construction");
}

RunOutcome run_or_throw(const ConstructionSpec& spec) {
    RunOutcome out = run_construction(spec);
    if (out.exhausted)
        throw StageBudgetExhausted(out.exhausted->cycle, out.exhausted->phase,
                                   out.exhausted->stage, out.exhausted->detail);
    return out;
}

namespace {

ConstructionSpec make_spec(Construction kind, std::vector<SetDescriptor> inputs,
                           const OpponentFamily& family, u64 max_stages) {
    ConstructionSpec s;
    s.kind = kind;
    s.inputs = std::move(inputs);
    s.family = family;
    s.max_stages = max_stages;
    return s;
}

}  // namespace

RunOutcome construct_immune(const OpponentFamily& family, u64 max_stages) {
    return run_or_throw(make_spec(Construction::Immune, {}, family, max_stages));
}
RunOutcome construct_incomparable(const SetDescriptor& r, const OpponentFamily& family,
                                  u64 max_stages) {
    return run_or_throw(make_spec(Construction::Incomparable, {r}, family, max_stages));
}
RunOutcome construct_antichain(u64 count, const OpponentFamily& family, u64 max_stages) {
    ConstructionSpec s = make_spec(Construction::Antichain, {}, family, max_stages);
    s.count = count;
    return run_or_throw(s);
}
RunOutcome construct_dense(const SetDescriptor& x, const SetDescriptor& z,
                           const OpponentFamily& family, u64 max_stages) {
    return run_or_throw(make_spec(Construction::Dense, {x, z}, family, max_stages));
}
RunOutcome construct_dense_incomparable(const SetDescriptor& x, const SetDescriptor& t,
                                        const SetDescriptor& z, const OpponentFamily& family,
                                        u64 max_stages) {
    return run_or_throw(make_spec(Construction::DenseIncomparable, {x, t, z}, family, max_stages));
}
RunOutcome construct_join_split(const SetDescriptor& z, const OpponentFamily& family,
                                u64 max_stages) {
    return run_or_throw(make_spec(Construction::JoinSplit, {z}, family, max_stages));
}
RunOutcome construct_meet_split(const SetDescriptor& z, const OpponentFamily& family,
                                u64 max_stages) {
    return run_or_throw(make_spec(Construction::MeetSplit, {z}, family, max_stages));
}
RunOutcome construct_diamond(const SetDescriptor& x, const SetDescriptor& z,
                             const OpponentFamily& family, u64 max_stages, u64 k) {
    ConstructionSpec s = make_spec(Construction::Diamond, {x, z}, family, max_stages);
    s.k = k;
    return run_or_throw(s);
}
RunOutcome construct_separator(const SetDescriptor& x, const SetDescriptor& y,
                               const OpponentFamily& family, u64 max_stages) {
    return run_or_throw(make_spec(Construction::Separator, {x, y}, family, max_stages));
}

// ---------------------------------------------------------------------------
// Trace text.

std::string construct_dsl(const ConstructionSpec& spec, std::size_t output) {
    std::string s = "construct ";
    s += construction_name(spec.kind);
    s += " [";
    for (std::size_t i = 0; i < spec.inputs.size(); ++i) {
        if (i) s += "; ";
        s += spec.inputs[i].dsl();
    }
    s += "] family [";
    for (std::size_t i = 0; i < spec.family.members.size(); ++i) {
        if (i) s += ", ";
        s += quote(spec.family.members[i].text());
    }
    s += "] policy ";
    s += policy_name(spec.family.policy);
    s += " stages " + std::to_string(spec.max_stages);
    if (spec.cycle_budget) s += " cycle-budget " + std::to_string(spec.cycle_budget);
    if (spec.kind == Construction::Antichain) s += " count " + std::to_string(spec.count);
    if (spec.kind == Construction::Diamond && spec.k) s += " k " + std::to_string(spec.k);
    s += " output " + std::to_string(output);
    return s;
}

namespace {

std::string join_strings(const std::vector<std::string>& v, const char* sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += sep;
        s += v[i];
    }
    return s;
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = text.find(sep, start);
        out.emplace_back(text.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 15];
    return s;
}

}  // namespace

std::string render_trace(const RunOutcome& run) {
    const ConstructionSpec& spec = run.spec;
    std::ostringstream o;
    o << "# peq-trace v1\n";
    o << "construction\t" << construction_name(spec.kind) << "\n";
    auto roles = input_roles(spec.kind);
    for (std::size_t i = 0; i < spec.inputs.size(); ++i)
        o << "input\t" << roles[i] << "\t" << spec.inputs[i].dsl() << "\n";
    o << "family_hash\t" << hex64(lat::family_hash(spec.family.members)) << "\n";
    for (std::size_t i = 0; i < spec.family.members.size(); ++i)
        o << "family\t" << i << "\t" << spec.family.members[i].text() << "\n";
    o << "policy\t" << policy_name(spec.family.policy) << "\n";
    o << "max_stages\t" << spec.max_stages << "\n";
    o << "cycle_budget\t" << spec.cycle_budget << "\n";
    if (spec.kind == Construction::Antichain) o << "param\tcount\t" << spec.count << "\n";
    if (spec.kind == Construction::Diamond) o << "param\tk\t" << spec.k << "\n";
    o << "convention\tindex\n";
    o << "offset\t" << offset_for(spec.kind) << "\n";
    o << "copy_rule\t" << copy_rule_for(spec.kind) << "\n";
    o << "cost_model\t" << pr::kCostModel << "\n";
    o << "outputs\t" << join_strings(run.output_names, ",") << "\n";
    for (const auto& n : run.notes) o << "note\t" << n << "\n";
    o << "records\n";
    for (const auto& r : run.records) {
        o << r.stage << "\t" << r.cycle << "\t" << r.phase << "\t" << join_strings(r.bits, ",")
          << "\t" << (r.events.empty() ? "-" : join_strings(r.events, ";")) << "\n";
    }
    if (run.exhausted)
        o << "end\texhausted\t" << run.exhausted->cycle << "\t" << run.exhausted->phase << "\t"
          << run.exhausted->stage << "\t" << run.exhausted->detail << "\n";
    else
        o << "end\tok\n";
    return o.str();
}

ParsedTrace parse_trace(std::string_view text) {
    ParsedTrace t;
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line != "# peq-trace v1")
        throw PreconditionFailed("not a peq-trace v1 file");
    bool records = false;
    bool have_kind = false;
    u64 number = 1;
    while (std::getline(in, line)) {
        ++number;
        auto f = split(line, '\t');
        auto need = [&](std::size_t n) {
            if (f.size() < n)
                throw PreconditionFailed("trace line " + std::to_string(number) + " is truncated");
        };
        try {
            if (!records) {
                const std::string& key = f[0];
                if (key == "construction") {
                    need(2);
                    t.spec.kind = parse_construction(f[1]);
                    have_kind = true;
                } else if (key == "input") {
                    need(3);
                    t.spec.inputs.push_back(sets::parse_descriptor(f[2]));
                } else if (key == "family") {
                    need(3);
                    t.spec.family.members.push_back(pr::Program::from_text(f[2]));
                } else if (key == "policy") {
                    need(2);
                    t.spec.family.policy = parse_policy(f[1]);
                } else if (key == "max_stages") {
                    need(2);
                    t.spec.max_stages = std::stoull(f[1]);
                } else if (key == "cycle_budget") {
                    need(2);
                    t.spec.cycle_budget = std::stoull(f[1]);
                } else if (key == "param") {
                    need(3);
                    if (f[1] == "count") t.spec.count = std::stoull(f[2]);
                    else if (f[1] == "k") t.spec.k = std::stoull(f[2]);
                } else if (key == "outputs") {
                    need(2);
                    t.output_names = split(f[1], ',');
                } else if (key == "records") {
                    records = true;
                }
                continue;
            }
            if (f[0] == "end") break;
            need(5);
            StageRecord r;
            r.stage = std::stoull(f[0]);
            r.cycle = f[1];
            r.phase = f[2];
            r.bits = split(f[3], ',');
            if (f[4] != "-") r.events = split(f[4], ';');
            t.records.push_back(std::move(r));
        } catch (const std::invalid_argument&) {
            throw PreconditionFailed("bad number on trace line " + std::to_string(number));
        } catch (const std::out_of_range&) {
            throw PreconditionFailed("bad number on trace line " + std::to_string(number));
        }
    }
    if (!have_kind) throw PreconditionFailed("trace header names no construction");
    return t;
}

Bits trace_output_bits(const ParsedTrace& trace, std::size_t output) {
    if (output >= trace.output_names.size())
        throw PreconditionFailed("trace has no output " + std::to_string(output));
    Bits out;
    if (trace.spec.kind == Construction::Antichain) {
        if (output == 0) {
            if (trace.spec.max_stages) out = sets::evens().prefix(trace.spec.max_stages - 1);
            return out;
        }
        std::string tag = "S" + std::to_string(output);
        for (const auto& r : trace.records) {
            if (r.cycle != tag && r.cycle.rfind(tag + ":", 0) != 0) continue;
            if (r.bits.size() <= output || r.bits[output] == "-") continue;
            for (char c : r.bits[output]) out.push_back(c == '1');
        }
        return out;
    }
    for (const auto& r : trace.records) {
        if (r.bits.size() <= output || r.bits[output] == "-") continue;
        for (char c : r.bits[output]) out.push_back(c == '1');
    }
    return out;
}

// ---------------------------------------------------------------------------
// Validation.

bool Validation::ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.ok; });
}

namespace {

struct Sets {
    std::map<std::string, SetDescriptor> by_role;
    const SetDescriptor& at(const std::string& role) const {
        auto it = by_role.find(role);
        if (it == by_role.end()) throw PreconditionFailed("no set named " + role);
        return it->second;
    }
};

// Z as the machine copied it, after join normalization.
SetDescriptor effective_upper(const ConstructionSpec& spec) {
    const SetDescriptor& x = spec.inputs.front();
    SetDescriptor z = spec.inputs.back();
    if (domination_failure(x, z, spec.max_stages + 1)) z = sets::set_join(x, z);
    return z;
}

bool normalizes_upper(Construction c) {
    return c == Construction::Dense || c == Construction::DenseIncomparable ||
           c == Construction::Diamond;
}

Sets collect_sets(const RunOutcome& run) {
    Sets s;
    auto roles = input_roles(run.spec.kind);
    for (std::size_t i = 0; i < run.spec.inputs.size(); ++i) s.by_role[roles[i]] = run.spec.inputs[i];
    if (normalizes_upper(run.spec.kind)) s.by_role["Z"] = effective_upper(run.spec);
    for (std::size_t i = 0; i < run.outputs.size(); ++i)
        s.by_role[run.output_names[i]] = run.descriptor(i);
    return s;
}

// Re-evaluates a recorded counterexample against the final sets.
bool cx_still_holds(const CxRecord& c, const RunOutcome& run, const Sets& sets) {
    const pr::Program* p = run.spec.family.member(c.member);
    if (!p) return false;
    if (c.flavor == "collision") {
        auto a = p->within(c.l, c.stage), b = p->within(c.m, c.stage);
        return c.l != c.m && a && b && *a == *b;
    }
    if (c.flavor == "hit") {
        auto v = p->within(c.l, c.stage);
        return v && *v == c.m && sets.at(c.target).bit(c.m);
    }
    if (c.l >= c.m) return false;
    auto a = p->within(c.l, c.stage), b = p->within(c.m, c.stage);
    if (!a || !b) return false;
    auto same_class = [](const SetDescriptor& x, u64 u, u64 v) {
        return u == v || (x.bit(u) && x.bit(v));
    };
    const SetDescriptor& src = sets.at(c.source);
    const SetDescriptor& dst = sets.at(c.target);
    if (c.flavor == "RtoRY" || c.flavor == "RXtoRY")
        return same_class(src, c.l, c.m) == !same_class(dst, *a, *b);
    if (c.flavor == "RYtoR") return (src.bit(c.l) && src.bit(c.m)) == !same_class(dst, *a, *b);
    return false;
}

std::string tag_of(const std::string& cycle) {
    auto colon = cycle.find(':');
    return colon == std::string::npos ? "" : cycle.substr(0, colon);
}

Check single_open_cycle(const RunOutcome& run) {
    Check c{"single-open-cycle", true, ""};
    std::map<std::string, std::vector<std::string>> open_by_run;
    for (const auto& r : run.records) {
        std::string tag = run.spec.kind == Construction::Antichain
                              ? (r.cycle.find(':') == std::string::npos ? r.cycle : tag_of(r.cycle))
                              : "";
        auto& open = open_by_run[tag];
        if (r.stage > 0) {
            if (open.size() != 1 || open[0] != r.cycle) {
                c.ok = false;
                c.detail = "stage " + std::to_string(r.stage) + " starts with " +
                           std::to_string(open.size()) + " open cycles";
                return c;
            }
        }
        for (const auto& e : r.events) {
            if (e.rfind("open:", 0) == 0) open.push_back(e.substr(5));
            if (e.rfind("close:", 0) == 0) {
                auto it = std::find(open.begin(), open.end(), e.substr(6));
                if (it == open.end()) {
                    c.ok = false;
                    c.detail = "stage " + std::to_string(r.stage) + " closes an unopened cycle";
                    return c;
                }
                open.erase(it);
            }
        }
    }
    return c;
}

Check prefix_discipline(const RunOutcome& run) {
    Check c{"prefix-length", true, ""};
    u64 offset = offset_for(run.spec.kind);
    std::map<std::string, std::vector<u64>> lengths;
    for (const auto& r : run.records) {
        std::string tag = run.spec.kind == Construction::Antichain
                              ? (r.cycle.find(':') == std::string::npos ? r.cycle : tag_of(r.cycle))
                              : "";
        auto& len = lengths[tag];
        len.resize(r.bits.size(), 0);
        for (std::size_t i = 0; i < r.bits.size(); ++i) {
            if (run.spec.kind == Construction::Antichain && tag != "S" + std::to_string(i))
                continue;
            if (r.bits[i] != "-") len[i] += r.bits[i].size();
            if (len[i] != r.stage + offset) {
                c.ok = false;
                c.detail = "output " + std::to_string(i) + " has length " +
                           std::to_string(len[i]) + " after stage " + std::to_string(r.stage);
                return c;
            }
        }
    }
    return c;
}

// Stages at which a cycle was opened (the synchronization points of splits and diamonds).
std::vector<u64> open_stages(const RunOutcome& run) {
    std::vector<u64> v;
    for (const auto& r : run.records)
        for (const auto& e : r.events)
            if (e.rfind("open:", 0) == 0) {
                v.push_back(r.stage);
                break;
            }
    return v;
}

u64 zeros_in(const Bits& b, u64 len) {
    u64 n = 0;
    for (u64 i = 0; i < len && i < b.size(); ++i) n += !b[i];
    return n;
}

void validate_density(const RunOutcome& run, Validation& v) {
    Check chain{"density-chain", true, ""};
    const SetDescriptor& x = run.spec.inputs[0];
    SetDescriptor z = effective_upper(run.spec);
    const Bits& y = run.outputs[0];
    u64 nx = 0, ny = 0, nz = 0;
    std::vector<u64> cx(y.size()), cy(y.size()), cz(y.size());
    for (u64 s = 0; s < y.size(); ++s) {
        nx += !x.bit(s);
        ny += !y[s];
        nz += !z.bit(s);
        cx[s] = nx;
        cy[s] = ny;
        cz[s] = nz;
        if (chain.ok && !(nx <= ny && ny <= nz)) {
            chain.ok = false;
            chain.detail = "chain fails at " + std::to_string(s);
        }
    }
    v.checks.push_back(chain);
    Check closes{"density-close-equalities", true, ""};
    for (const auto& r : run.records)
        for (const auto& e : r.events) {
            if (e.rfind("close:", 0) != 0) continue;
            u64 s = r.stage;
            bool p = e[6] == 'P';
            bool q = e[6] == 'Q';
            if ((p && cx[s] != cy[s]) || (q && cy[s] != cz[s])) {
                closes.ok = false;
                closes.detail = e + " at " + std::to_string(s);
            }
        }
    v.checks.push_back(closes);
    Check wit{"density-reductions", true, ""};
    auto sets_ = collect_sets(run);
    try {
        if (run.witnesses.size() != 2) throw NotAReduction("missing witness tables");
        u64 h = run.witnesses[0].horizon;
        red::require_reduction(run.witnesses[0].values, x, sets_.at("Y"), h, "g");
        red::require_reduction(run.witnesses[1].values, sets_.at("Y"), z, h, "h");
    } catch (const Error& e) {
        wit.ok = false;
        wit.detail = e.what();
    }
    v.checks.push_back(wit);
}

void validate_split(const RunOutcome& run, Validation& v, bool meet) {
    const Bits& y0 = run.outputs[0];
    const Bits& y1 = run.outputs[1];
    const SetDescriptor& z = run.spec.inputs[0];
    auto opens = open_stages(run);
    u64 sync = opens.empty() ? 0 : opens.back();
    u64 len = sync;  // offset 0: prefix length equals the stage
    Bits a(y0.begin(), y0.begin() + len), b(y1.begin(), y1.begin() + len);
    Bits combined = meet ? sets::string_meet(a, b) : sets::string_join(a, b);
    Check exact{meet ? "meet-bit-exact" : "join-bit-exact", true,
                "checked " + std::to_string(len) + " bits"};
    for (u64 i = 0; i < len; ++i)
        if (combined[i] != z.bit(i)) {
            exact.ok = false;
            exact.detail = "differs at " + std::to_string(i);
            break;
        }
    v.checks.push_back(exact);
    Check eq{"split-close-equal-counts", true, ""};
    for (u64 s : opens)
        if (zeros_in(y0, s) != zeros_in(y1, s)) {
            eq.ok = false;
            eq.detail = "counts differ at " + std::to_string(s);
        }
    v.checks.push_back(eq);
    // Within each cycle the held set's block is constant^h then (1-constant)^k.
    Check block{"split-block-shape", true, ""};
    bool constant = !meet;
    for (std::size_t i = 0; i + 1 < opens.size(); ++i) {
        u64 from = opens[i], to = opens[i + 1];
        const auto& rec = run.records[from];
        std::string id;
        for (const auto& e : rec.events)
            if (e.rfind("open:", 0) == 0) id = e.substr(5);
        const Bits& held = (id.size() && id[0] == 'Q') ? y0 : y1;
        if (id == "F") continue;
        bool switched = false;
        for (u64 j = from; j < to; ++j) {
            if (held[j] != constant) switched = true;
            else if (switched) {
                block.ok = false;
                block.detail = "cycle " + id + " breaks the block shape at " + std::to_string(j);
            }
        }
    }
    v.checks.push_back(block);
}

void validate_diamond(const RunOutcome& run, Validation& v) {
    const Bits& y0 = run.outputs[0];
    const Bits& y1 = run.outputs[1];
    SetDescriptor x = run.spec.inputs[0];
    SetDescriptor z = effective_upper(run.spec);
    auto opens = open_stages(run);
    u64 sync = opens.empty() ? 0 : opens.back();
    u64 len = sync + 1;
    Bits a(y0.begin(), y0.begin() + len), b(y1.begin(), y1.begin() + len);
    Bits m = sets::string_meet(a, b), j = sets::string_join(a, b);
    Check mc{"diamond-meet-bit-exact", true, "checked " + std::to_string(len) + " bits"};
    Check nc{"diamond-join-bit-exact", true, "checked " + std::to_string(len) + " bits"};
    for (u64 i = 0; i < len; ++i) {
        if (mc.ok && m[i] != x.bit(i)) {
            mc.ok = false;
            mc.detail = "differs at " + std::to_string(i);
        }
        if (nc.ok && j[i] != z.bit(i)) {
            nc.ok = false;
            nc.detail = "differs at " + std::to_string(i);
        }
    }
    v.checks.push_back(mc);
    v.checks.push_back(nc);
    Check four{"diamond-four-way-equality", true, ""};
    for (u64 s : opens) {
        u64 n = s + 1;
        u64 a0 = zeros_in(y0, n), a1 = zeros_in(y1, n);
        u64 zx = x.zeros_by_index(s), zz = z.zeros_by_index(s);
        if (!(a0 == a1 && a1 == zx && zx == zz)) {
            four.ok = false;
            four.detail = "counts differ at " + std::to_string(s);
        }
    }
    v.checks.push_back(four);
    Check sync_check{"diamond-synchronized-prefix", true, "last synchronization at stage " +
                                                             std::to_string(sync)};
    v.checks.push_back(sync_check);
}

void validate_separator(const RunOutcome& run, Validation& v) {
    const SetDescriptor& x = run.spec.inputs[0];
    const SetDescriptor& y = run.spec.inputs[1];
    SetDescriptor x1 = sets::drop_least_zero(x);
    const Bits& z = run.outputs[0];
    std::vector<u64> zop(z.size());
    u64 n = 0;
    for (u64 s = 0; s < z.size(); ++s) zop[s] = (n += !z[s]);
    Check dom{"separator-domination", true, ""};
    for (u64 s = 0; s < z.size(); ++s) {
        u64 zx = x.zeros_by_index(s);
        if (zop[s] > (zx ? zx - 1 : 0)) {
            dom.ok = false;
            dom.detail = "ZOP_Z exceeds ZOP_X - 1 at " + std::to_string(s);
            break;
        }
    }
    v.checks.push_back(dom);
    // Replay k*(s) from the convergence events and check the bracket.
    Check bracket{"separator-bracket", true, ""};
    u64 k = 0;
    std::map<u64, u64> first_v_stage;  // member index -> k* when it became current
    std::map<u64, std::pair<u64, u64>> vinc;  // member -> (t, stage)
    std::vector<std::pair<u64, u64>> converged;  // (k, stage)
    first_v_stage[0] = 0;
    u64 current_v = 0;
    for (const auto& r : run.records) {
        for (const auto& e : r.events) {
            if (e.rfind("conv:", 0) == 0) {
                converged.emplace_back(k, r.stage - 1);
                ++k;
            } else if (e.rfind("vinc:", 0) == 0) {
                auto f = split(e, ':');
                u64 vv = std::stoull(f[1]);
                vinc[vv] = {std::stoull(f[2]), r.stage};
                current_v = vv + 1;
                first_v_stage.emplace(current_v, k);
            }
        }
        if (zop[r.stage] != x1.zeros_by_index(k)) {
            if (bracket.ok) bracket.detail = "fails at stage " + std::to_string(r.stage);
            bracket.ok = false;
        }
    }
    v.checks.push_back(bracket);
    (void)current_v;
    std::size_t members = run.spec.family.members.size();
    Check nonred{"separator-nonreducibility", true, ""};
    for (std::size_t e = 0; e < members; ++e) {
        auto it = vinc.find(e);
        if (it == vinc.end()) {
            nonred.ok = false;
            nonred.detail += "member " + std::to_string(e) + " has no V-increment; ";
            continue;
        }
        u64 t = it->second.first;
        u64 img = checked_value(run.spec.family.members[e], t);
        if (!(t < zop.size() && zop[t] > y.zeros_by_index(img))) {
            nonred.ok = false;
            nonred.detail += "member " + std::to_string(e) + " evidence does not re-validate; ";
        }
    }
    v.checks.push_back(nonred);
    // Anti-diamond window: inputs converged after e became current.
    Check anti{"separator-anti-diamond", true, ""};
    for (std::size_t e = 0; e < members; ++e) {
        auto it = first_v_stage.find(e);
        u64 hits = 0, window = 0;
        if (it != first_v_stage.end()) {
            for (auto [kk, stage] : converged) {
                if (kk < it->second) continue;
                u64 img = checked_value(run.spec.family.members[e], kk);
                if (img >= zop.size()) continue;
                u64 zx = x.zeros_by_index(kk);
                if (zx == 0) continue;
                ++window;
                hits += zop[img] < zx;
            }
        }
        anti.detail += "member " + std::to_string(e) + ": " + std::to_string(hits) + "/" +
                       std::to_string(window) + "; ";
        if (window == 0 || hits != window) anti.ok = false;
    }
    v.checks.push_back(anti);
}

void validate_immune(const RunOutcome& run, Validation& v) {
    Check c{"immune-closures", true, ""};
    u64 closes = 0, requirement_zeros = 0;
    for (const auto& r : run.records) {
        bool requirement = !r.cycle.empty() && r.cycle[0] == 'P';
        for (const auto& e : r.events)
            if (e.rfind("close:", 0) == 0) ++closes;
        if (requirement && r.bits[0] == "0") ++requirement_zeros;
    }
    if (closes != requirement_zeros) {
        c.ok = false;
        c.detail = std::to_string(closes) + " closes but " + std::to_string(requirement_zeros) +
                   " zeros emitted inside requirement cycles";
    }
    v.checks.push_back(c);
}

}  // namespace

Validation validate(const RunOutcome& run) {
    Validation v;
    v.checks.push_back(single_open_cycle(run));
    v.checks.push_back(prefix_discipline(run));
    Check perm{"counterexample-permanence", true,
               std::to_string(run.counterexamples.size()) + " counterexamples"};
    Sets sets_ = collect_sets(run);
    for (const auto& c : run.counterexamples)
        if (!cx_still_holds(c, run, sets_)) {
            perm.ok = false;
            perm.detail = "cycle " + c.cycle + " (" + c.flavor + " " + std::to_string(c.l) + "," +
                          std::to_string(c.m) + ") no longer holds";
            break;
        }
    v.checks.push_back(perm);
    switch (run.spec.kind) {
        case Construction::Immune: validate_immune(run, v); break;
        case Construction::Dense:
        case Construction::DenseIncomparable: validate_density(run, v); break;
        case Construction::JoinSplit: validate_split(run, v, false); break;
        case Construction::MeetSplit: validate_split(run, v, true); break;
        case Construction::Diamond: validate_diamond(run, v); break;
        case Construction::Separator: validate_separator(run, v); break;
        default: break;
    }
    Check done{"all-cycles-closed", !run.exhausted, ""};
    if (run.exhausted)
        done.detail = "exhausted in " + run.exhausted->cycle + " (" + run.exhausted->phase + ")";
    v.checks.push_back(done);
    return v;
}

VerifyReport verify_trace(std::string_view text) {
    VerifyReport rep;
    ParsedTrace t = parse_trace(text);
    RunOutcome replay = run_construction(t.spec);
    std::string again = render_trace(replay);
    std::size_t n = std::min(again.size(), text.size());
    std::size_t at = 0;
    while (at < n && again[at] == text[at]) ++at;
    if (at < n || again.size() != text.size()) {
        Divergence d;
        d.offset_trace = at;
        d.offset_replay = at;
        d.line = 1 + std::count(text.begin(), text.begin() + at, '\n');
        auto line_at = [](std::string_view s, std::size_t pos) {
            std::size_t b = s.rfind('\n', pos == 0 ? 0 : pos - 1);
            b = (b == std::string_view::npos || pos == 0) ? 0 : b + 1;
            std::size_t e = s.find('\n', pos);
            if (pos >= s.size()) return std::string();
            return std::string(s.substr(b, e == std::string_view::npos ? e : e - b));
        };
        d.found = line_at(text, at);
        d.expected = line_at(again, at);
        rep.divergence = d;
    }
    rep.validation = validate(replay);
    return rep;
}

}  // namespace peq::con
