#include "peq/sets.hpp"

#include <algorithm>
#include <limits>

namespace peq::sets {

const char* kind_name(Kind k) {
    switch (k) {
        case Kind::Builtin: return "builtin";
        case Kind::Term: return "term";
        case Kind::Trace: return "trace";
        case Kind::Derived: return "derived";
    }
    return "?";
}

const char* convention_name(Convention c) { return c == Convention::Index ? "index" : "steps"; }

Convention parse_convention(std::string_view text) {
    if (text == "index") return Convention::Index;
    if (text == "steps") return Convention::Steps;
    throw PreconditionFailed("unknown convention '" + std::string(text) + "'");
}

Bits bits_from_string(std::string_view text) {
    Bits out;
    out.reserve(text.size());
    for (char c : text) {
        if (c != '0' && c != '1') throw SyntaxError("bit strings use only 0 and 1", out.size());
        out.push_back(c == '1' ? 1 : 0);
    }
    return out;
}

std::string bits_to_string(const Bits& bits) {
    std::string s;
    s.reserve(bits.size());
    for (auto b : bits) s += b ? '1' : '0';
    return s;
}

u64 count_zeros(const Bits& bits) {
    return static_cast<u64>(std::count(bits.begin(), bits.end(), std::uint8_t{0}));
}

void SetSource::ensure(u64 n) {
    while (bits_.size() <= n) {
        u64 i = bits_.size();
        std::uint8_t b = compute_bit(i);
        u64 c = std::max<u64>(1, compute_cost(i));
        u64 prev_zeros = zeros_.empty() ? 0 : zeros_.back();
        u64 prev_cost = cost_prefix_.empty() ? 0 : cost_prefix_.back();
        bits_.push_back(b);
        zeros_.push_back(prev_zeros + (b ? 0 : 1));
        cost_prefix_.push_back(prev_cost + c);
    }
}

bool SetSource::bit(u64 n) {
    std::lock_guard lock(mu_);
    ensure(n);
    return bits_[n] != 0;
}

u64 SetSource::zeros_upto(u64 s) {
    std::lock_guard lock(mu_);
    ensure(s);
    return zeros_[s];
}

u64 SetSource::bit_cost(u64 n) {
    std::lock_guard lock(mu_);
    ensure(n);
    return cost_prefix_[n] - (n == 0 ? 0 : cost_prefix_[n - 1]);
}

u64 SetSource::zeros_by_steps(u64 s) {
    std::lock_guard lock(mu_);
    // Every bit costs at least one step, so at most s bits are decided.
    if (s == 0) return 0;
    ensure(s - 1);
    auto it = std::upper_bound(cost_prefix_.begin(), cost_prefix_.begin() + static_cast<long>(s), s);
    if (it == cost_prefix_.begin()) return 0;
    std::size_t k = static_cast<std::size_t>(it - cost_prefix_.begin()) - 1;
    return zeros_[k];
}

std::optional<u64> SetSource::nth_zero(u64 n, u64 ceiling) {
    std::lock_guard lock(mu_);
    u64 want = n + 1;
    u64 scanned = 0;
    while (true) {
        if (!zeros_.empty() && zeros_.back() >= want) {
            auto it = std::lower_bound(zeros_.begin(), zeros_.end(), want);
            return static_cast<u64>(it - zeros_.begin());
        }
        if (scanned > ceiling || bits_.size() > ceiling) return std::nullopt;
        u64 next = std::min<u64>(ceiling, std::max<u64>(2 * bits_.size(), 64));
        ensure(next);
        scanned = next + 1;
    }
}

bool ClosedSource::bit(u64 n) {
    u64 here = zeros_upto(n);
    u64 before = n == 0 ? 0 : zeros_upto(n - 1);
    return here == before;
}

u64 ClosedSource::zeros_by_steps(u64 s) { return s == 0 ? 0 : zeros_upto(s - 1); }

Bits SetDescriptor::prefix(u64 s) const {
    Bits out(s + 1);
    for (u64 i = 0; i <= s; ++i) out[i] = src_->bit(i) ? 1 : 0;
    return out;
}

std::vector<u64> SetDescriptor::profile(u64 horizon, Convention c) const {
    std::vector<u64> out(horizon + 1);
    for (u64 s = 0; s <= horizon; ++s) out[s] = zeros(s, c);
    return out;
}

u64 SetDescriptor::principal_zero(u64 n, u64 ceiling) const {
    auto z = src_->nth_zero(n, ceiling);
    if (!z || *z > ceiling)
        throw CeilingExceeded("zero number " + std::to_string(n) + " of " + dsl() +
                              " not found below " + std::to_string(ceiling));
    return *z;
}

u64 zeros_by_index(const SetDescriptor& x, u64 s) { return x.zeros_by_index(s); }
u64 zeros_by_steps(const SetDescriptor& x, u64 s) { return x.zeros_by_steps(s); }
u64 principal_zero(const SetDescriptor& x, u64 n, u64 ceiling) { return x.principal_zero(n, ceiling); }

namespace {

class EvensSource final : public ClosedSource {
public:
    std::string dsl() const override { return "evens"; }
    Kind kind() const override { return Kind::Builtin; }
    u64 zeros_upto(u64 s) override { return (s + 1) / 2; }
    std::optional<u64> nth_zero(u64 n, u64) override { return 2 * n + 1; }
};

class ModSource final : public ClosedSource {
public:
    explicit ModSource(u64 k) : k_(k) {}
    std::string dsl() const override { return "mod " + std::to_string(k_); }
    Kind kind() const override { return Kind::Builtin; }
    u64 zeros_upto(u64 s) override { return s - s / k_; }
    std::optional<u64> nth_zero(u64 n, u64) override {
        return k_ * (n / (k_ - 1)) + n % (k_ - 1) + 1;
    }

private:
    u64 k_;
};

class SingletonZeroSource final : public ClosedSource {
public:
    std::string dsl() const override { return "id"; }
    Kind kind() const override { return Kind::Builtin; }
    u64 zeros_upto(u64 s) override { return s; }
    std::optional<u64> nth_zero(u64 n, u64) override { return n + 1; }
};

class TermSource final : public SetSource {
public:
    TermSource(pr::TermPtr t, pr::TermPtr bound)
        : t_(pr::as_unary(std::move(t))), bound_(pr::as_unary(std::move(bound))) {}
    std::string dsl() const override {
        return "term \"" + pr::serialize(*t_) + "\" bound \"" + pr::serialize(*bound_) + "\"";
    }
    Kind kind() const override { return Kind::Term; }

protected:
    std::uint8_t compute_bit(u64 n) override {
        u64 limit = pr::eval_clocked(*bound_, std::span<const u64>(&n, 1),
                                     std::numeric_limits<u64>::max())
                        .value;
        u64 budget = limit == std::numeric_limits<u64>::max() ? limit : limit + 1;
        pr::StepOutcome o = pr::eval_clocked(*t_, std::span<const u64>(&n, 1), budget);
        if (!o.converged)
            throw PunctualityViolation("term set exceeds its step bound " + std::to_string(limit) +
                                       " at " + std::to_string(n));
        last_cost_ = o.steps;
        return o.value != 0 ? 1 : 0;
    }
    u64 compute_cost(u64) override { return last_cost_; }

private:
    pr::TermPtr t_;
    pr::TermPtr bound_;
    u64 last_cost_ = 1;
};

class PrefixSource final : public SetSource {
public:
    PrefixSource(Bits head, SetDescriptor tail) : head_(std::move(head)), tail_(std::move(tail)) {}
    std::string dsl() const override {
        return "prefix \"" + bits_to_string(head_) + "\" then " + tail_.dsl();
    }
    Kind kind() const override { return Kind::Derived; }

protected:
    std::uint8_t compute_bit(u64 n) override {
        if (n < head_.size()) return head_[n];
        return tail_.bit(n) ? 1 : 0;
    }
    u64 compute_cost(u64 n) override { return n < head_.size() ? 1 : tail_.bit_cost(n); }

private:
    Bits head_;
    SetDescriptor tail_;
};

// X with bit 0 overridden to 1; profile shifts down by one when X(0) = 0.
class ForceZeroSource final : public SetSource {
public:
    explicit ForceZeroSource(SetDescriptor x) : x_(std::move(x)), shift_(x_.bit(0) ? 0 : 1) {}
    std::string dsl() const override { return x_.dsl(); }
    Kind kind() const override { return x_.kind(); }
    bool bit(u64 n) override { return n == 0 ? true : x_.bit(n); }
    u64 zeros_upto(u64 s) override { return x_.zeros_by_index(s) - shift_; }
    u64 zeros_by_steps(u64 s) override {
        u64 z = x_.zeros_by_steps(s);
        return z >= shift_ ? z - shift_ : 0;
    }
    u64 bit_cost(u64 n) override { return x_.bit_cost(n); }
    std::optional<u64> nth_zero(u64 n, u64 ceiling) override {
        return x_.source()->nth_zero(n + shift_, ceiling);
    }

protected:
    std::uint8_t compute_bit(u64 n) override { return bit(n) ? 1 : 0; }

private:
    SetDescriptor x_;
    u64 shift_;
};

class LatticeSource final : public SetSource {
public:
    LatticeSource(SetDescriptor x, SetDescriptor y, bool join)
        : x_(std::move(x)), y_(std::move(y)), join_(join) {}
    std::string dsl() const override {
        return std::string(join_ ? "join(" : "meet(") + x_.dsl() + ", " + y_.dsl() + ")";
    }
    Kind kind() const override { return Kind::Derived; }

protected:
    std::uint8_t compute_bit(u64 n) override {
        if (n == 0) return 1;
        u64 now = pick(x_.zeros_by_index(n), y_.zeros_by_index(n));
        u64 before = pick(x_.zeros_by_index(n - 1), y_.zeros_by_index(n - 1));
        return now > before ? 0 : 1;
    }
    u64 compute_cost(u64 n) override { return x_.bit_cost(n) + y_.bit_cost(n); }

private:
    SetDescriptor x_;
    SetDescriptor y_;
    bool join_;
    u64 pick(u64 a, u64 b) const { return join_ ? std::max(a, b) : std::min(a, b); }
};

class DropSource final : public SetSource {
public:
    DropSource(SetDescriptor x, u64 least) : x_(std::move(x)), least_(least) {}
    std::string dsl() const override { return "drop(" + x_.dsl() + ")"; }
    Kind kind() const override { return Kind::Derived; }
    bool bit(u64 n) override { return n == least_ ? true : x_.bit(n); }
    u64 zeros_upto(u64 s) override {
        u64 z = x_.zeros_by_index(s);
        return z == 0 ? 0 : z - 1;
    }
    u64 zeros_by_steps(u64 s) override {
        u64 z = x_.zeros_by_steps(s);
        return z == 0 ? 0 : z - 1;
    }
    u64 bit_cost(u64 n) override { return x_.bit_cost(n); }
    std::optional<u64> nth_zero(u64 n, u64 ceiling) override {
        return x_.source()->nth_zero(n + 1, ceiling);
    }

protected:
    std::uint8_t compute_bit(u64 n) override { return bit(n) ? 1 : 0; }

private:
    SetDescriptor x_;
    u64 least_;
};

class TransversalComplementSource final : public SetSource {
public:
    explicit TransversalComplementSource(Relation r) : r_(std::move(r)) {}
    std::string dsl() const override { return "transversal-complement(" + r_.name + ")"; }
    Kind kind() const override { return Kind::Derived; }

protected:
    std::uint8_t compute_bit(u64 y) override {
        if (y == 0) return 1;
        for (u64 x = 0; x < y; ++x)
            if (r_.related(x, y)) return 1;
        return 0;
    }
    u64 compute_cost(u64 y) override { return y + 1; }

private:
    Relation r_;
};

}  // namespace

SetDescriptor evens() { return SetDescriptor(std::make_shared<EvensSource>()); }

SetDescriptor mod_set(u64 k) {
    if (k < 2) throw PreconditionFailed("mod K needs K >= 2");
    return SetDescriptor(std::make_shared<ModSource>(k));
}

SetDescriptor singleton_zero() { return SetDescriptor(std::make_shared<SingletonZeroSource>()); }

SetDescriptor term_set(const pr::TermPtr& t, const pr::TermPtr& bound) {
    return SetDescriptor(std::make_shared<TermSource>(t, bound));
}

SetDescriptor with_prefix(const Bits& head, const SetDescriptor& tail) {
    return SetDescriptor(std::make_shared<PrefixSource>(head, tail));
}

SetDescriptor force_zero_member(const SetDescriptor& x) {
    if (x.bit(0)) return x;
    auto src = std::make_shared<ForceZeroSource>(x);
    src->notes.push_back("bit 0 of " + x.dsl() + " overridden to 1");
    return SetDescriptor(src);
}

SetDescriptor set_join(const SetDescriptor& x, const SetDescriptor& y) {
    SetDescriptor nx = force_zero_member(x), ny = force_zero_member(y);
    auto src = std::make_shared<LatticeSource>(nx, ny, true);
    for (const auto* d : {&nx, &ny})
        for (const auto& n : d->notes()) src->notes.push_back(n);
    return SetDescriptor(src);
}

SetDescriptor set_meet(const SetDescriptor& x, const SetDescriptor& y) {
    SetDescriptor nx = force_zero_member(x), ny = force_zero_member(y);
    auto src = std::make_shared<LatticeSource>(nx, ny, false);
    for (const auto* d : {&nx, &ny})
        for (const auto& n : d->notes()) src->notes.push_back(n);
    return SetDescriptor(src);
}

SetDescriptor drop_least_zero(const SetDescriptor& x, u64 ceiling) {
    u64 least = x.principal_zero(0, ceiling);
    return SetDescriptor(std::make_shared<DropSource>(x, least));
}

namespace {

struct ZeroPositions {
    std::vector<u64> pos;
    explicit ZeroPositions(const Bits& b) {
        for (u64 i = 0; i < b.size(); ++i)
            if (!b[i]) pos.push_back(i);
    }
};

Bits pair_zeros(const Bits& sigma, const Bits& tau, bool join) {
    if (sigma.size() != tau.size())
        throw ShapeMismatch("strings of lengths " + std::to_string(sigma.size()) + " and " +
                            std::to_string(tau.size()));
    ZeroPositions a(sigma), b(tau);
    if (a.pos.size() != b.pos.size())
        throw ShapeMismatch("strings with " + std::to_string(a.pos.size()) + " and " +
                            std::to_string(b.pos.size()) + " zeros");
    Bits out(sigma.size(), 1);
    for (std::size_t n = 0; n < a.pos.size(); ++n)
        out[join ? std::min(a.pos[n], b.pos[n]) : std::max(a.pos[n], b.pos[n])] = 0;
    return out;
}

}  // namespace

Bits string_join(const Bits& sigma, const Bits& tau) { return pair_zeros(sigma, tau, true); }
Bits string_meet(const Bits& sigma, const Bits& tau) { return pair_zeros(sigma, tau, false); }

Relation equiv_view(const SetDescriptor& x) {
    Relation r;
    r.name = "R[" + x.dsl() + "]";
    r.related = [x](u64 a, u64 b) { return a == b || (x.bit(a) && x.bit(b)); };
    r.carrier = x;
    return r;
}

Relation identity_relation() {
    Relation r;
    r.name = "Id";
    r.related = [](u64 a, u64 b) { return a == b; };
    r.carrier = singleton_zero();
    return r;
}

void check_equivalence(const Relation& r, u64 bound) {
    for (u64 x = 0; x <= bound; ++x) {
        if (!r.related(x, x))
            throw NotEquivalence(r.name + " is not reflexive at " + std::to_string(x));
        for (u64 y = x + 1; y <= bound; ++y)
            if (r.related(x, y) != r.related(y, x))
                throw NotEquivalence(r.name + " is not symmetric at (" + std::to_string(x) + "," +
                                     std::to_string(y) + ")");
    }
    u64 small = std::min<u64>(bound, 24);
    for (u64 x = 0; x <= small; ++x)
        for (u64 y = 0; y <= small; ++y) {
            if (!r.related(x, y)) continue;
            for (u64 z = 0; z <= small; ++z)
                if (r.related(y, z) && !r.related(x, z))
                    throw NotEquivalence(r.name + " is not transitive at (" + std::to_string(x) +
                                         "," + std::to_string(y) + "," + std::to_string(z) + ")");
        }
}

Bits principal_transversal(const Relation& r, u64 bound) {
    check_equivalence(r, bound);
    Bits out(bound + 1, 0);
    for (u64 y = 1; y <= bound; ++y) {
        bool fresh = true;
        for (u64 x = 0; x < y && fresh; ++x)
            if (r.related(x, y)) fresh = false;
        out[y] = fresh ? 1 : 0;
    }
    return out;
}

NormalForm normal_form(const Relation& r, u64 horizon) {
    check_equivalence(r, horizon);
    NormalForm nf;
    nf.carrier = SetDescriptor(std::make_shared<TransversalComplementSource>(r));
    nf.to_carrier.resize(horizon + 1);
    nf.from_carrier.resize(horizon + 1);
    for (u64 x = 0; x <= horizon; ++x) {
        u64 y = 0;
        while (!r.related(y, x)) ++y;
        nf.to_carrier[x] = y;
        nf.from_carrier[x] = nf.carrier.bit(x) ? 0 : x;
    }
    return nf;
}

}  // namespace peq::sets
