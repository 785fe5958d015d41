#include "peq/pr_lang.hpp"

#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace peq::pr {

namespace {

TermPtr make(Kind kind, unsigned arity, unsigned index, std::vector<TermPtr> parts) {
    auto t = std::make_shared<Term>();
    t->kind = kind;
    t->arity = arity;
    t->index = index;
    t->parts = std::move(parts);
    return t;
}

}  // namespace

TermPtr zero(unsigned arity) { return make(Kind::Zero, arity, 0, {}); }
TermPtr succ() { return make(Kind::Succ, 1, 0, {}); }

TermPtr proj(unsigned n, unsigned i) {
    if (n == 0 || i == 0 || i > n) throw ArityError("projection P[" + std::to_string(n) + "," +
                                                        std::to_string(i) + "] out of range",
                                                    0);
    return make(Kind::Proj, n, i, {});
}

TermPtr comp(TermPtr outer, std::vector<TermPtr> inners) {
    if (inners.empty()) throw ArityError("composition needs at least one inner term", 0);
    if (outer->arity != inners.size())
        throw ArityError("outer arity " + std::to_string(outer->arity) + " but " +
                             std::to_string(inners.size()) + " inner terms",
                         0);
    unsigned n = inners.front()->arity;
    for (const auto& g : inners)
        if (g->arity != n) throw ArityError("inner terms disagree on arity", 0);
    std::vector<TermPtr> parts;
    parts.reserve(inners.size() + 1);
    parts.push_back(std::move(outer));
    for (auto& g : inners) parts.push_back(std::move(g));
    return make(Kind::Comp, n, 0, std::move(parts));
}

TermPtr primrec(TermPtr base, TermPtr step) {
    if (step->arity != base->arity + 2)
        throw ArityError("recursion step must have arity " + std::to_string(base->arity + 2), 0);
    unsigned n = base->arity;
    return make(Kind::PrimRec, n + 1, 0, {std::move(base), std::move(step)});
}

bool same_term(const Term& a, const Term& b) {
    if (a.kind != b.kind || a.arity != b.arity || a.index != b.index ||
        a.parts.size() != b.parts.size())
        return false;
    for (std::size_t i = 0; i < a.parts.size(); ++i)
        if (!same_term(*a.parts[i], *b.parts[i])) return false;
    return true;
}

namespace {

void write(const Term& t, std::string& out) {
    switch (t.kind) {
        case Kind::Zero: out += 'Z'; break;
        case Kind::Succ: out += 'S'; break;
        case Kind::Proj:
            out += "P[" + std::to_string(t.arity) + "," + std::to_string(t.index) + "]";
            break;
        case Kind::Comp:
            out += "C(";
            write(*t.parts[0], out);
            out += "; ";
            for (std::size_t i = 1; i < t.parts.size(); ++i) {
                if (i > 1) out += ", ";
                write(*t.parts[i], out);
            }
            out += ')';
            break;
        case Kind::PrimRec:
            out += "R(";
            write(*t.parts[0], out);
            out += "; ";
            write(*t.parts[1], out);
            out += ')';
            break;
    }
}

// Untyped syntax tree shared by the parser and the decoder.
struct Raw {
    Kind kind = Kind::Zero;
    unsigned n = 0;
    unsigned i = 0;
    std::vector<Raw> parts;
    std::size_t pos = 0;
};

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Raw parse_all() {
        Raw r = term();
        skip();
        if (pos_ != text_.size()) throw SyntaxError("unexpected trailing input", pos_);
        return r;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;

    void skip() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    bool at(char c) {
        skip();
        return pos_ < text_.size() && text_[pos_] == c;
    }
    void expect(char c) {
        skip();
        if (pos_ >= text_.size() || text_[pos_] != c)
            throw SyntaxError(std::string("expected '") + c + "'", pos_);
        ++pos_;
    }
    unsigned number() {
        skip();
        std::size_t start = pos_;
        u64 v = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            v = v * 10 + static_cast<u64>(text_[pos_] - '0');
            if (v > 1'000'000) throw SyntaxError("number too large", start);
            ++pos_;
        }
        if (pos_ == start) throw SyntaxError("expected a number", start);
        return static_cast<unsigned>(v);
    }

    Raw term() {
        skip();
        Raw r;
        r.pos = pos_;
        if (pos_ >= text_.size()) throw SyntaxError("unexpected end of input", pos_);
        char c = text_[pos_++];
        switch (c) {
            case 'Z': r.kind = Kind::Zero; return r;
            case 'S': r.kind = Kind::Succ; return r;
            case 'P':
                r.kind = Kind::Proj;
                expect('[');
                r.n = number();
                expect(',');
                r.i = number();
                expect(']');
                if (r.n == 0 || r.i == 0 || r.i > r.n)
                    throw ArityError("projection index out of range", r.pos);
                return r;
            case 'C':
                r.kind = Kind::Comp;
                expect('(');
                r.parts.push_back(term());
                expect(';');
                r.parts.push_back(term());
                while (at(',')) {
                    ++pos_;
                    r.parts.push_back(term());
                }
                expect(')');
                return r;
            case 'R':
                r.kind = Kind::PrimRec;
                expect('(');
                r.parts.push_back(term());
                expect(';');
                r.parts.push_back(term());
                expect(')');
                return r;
            default:
                throw SyntaxError(std::string("unknown symbol '") + c + "'", r.pos);
        }
    }
};

// Arity of a subtree that does not depend on context; empty when the subtree
// is built only from zero leaves and can take any arity.
std::optional<unsigned> natural_arity(const Raw& r) {
    switch (r.kind) {
        case Kind::Zero: return std::nullopt;
        case Kind::Succ: return 1u;
        case Kind::Proj: return r.n;
        case Kind::Comp:
            for (std::size_t i = 1; i < r.parts.size(); ++i)
                if (auto a = natural_arity(r.parts[i])) return a;
            return std::nullopt;
        case Kind::PrimRec: {
            auto s = natural_arity(r.parts[1]);
            if (s && *s >= 2) return *s - 1;
            if (auto b = natural_arity(r.parts[0])) return *b + 1;
            return std::nullopt;
        }
    }
    return std::nullopt;
}

// Recursion forces arity at least 1 even when every leaf is a zero.
bool needs_positive(const Raw& r) {
    if (r.kind == Kind::PrimRec) return true;
    if (r.kind != Kind::Comp) return false;
    for (std::size_t i = 1; i < r.parts.size(); ++i)
        if (needs_positive(r.parts[i])) return true;
    return false;
}

unsigned default_arity(const Raw& r) {
    if (auto a = natural_arity(r)) return *a;
    return needs_positive(r) ? 1 : 0;
}

class Typer {
public:
    explicit Typer(bool repair) : repair_(repair) {}

    TermPtr build(const Raw& r, std::optional<unsigned> expected) {
        switch (r.kind) {
            case Kind::Zero: return zero(expected.value_or(0));
            case Kind::Succ:
                if (expected && *expected != 1) return mismatch(r, *expected, 1);
                return succ();
            case Kind::Proj:
                if (expected && *expected != r.n) return mismatch(r, *expected, r.n);
                return proj(r.n, r.i);
            case Kind::Comp: {
                unsigned k = static_cast<unsigned>(r.parts.size() - 1);
                unsigned n = expected ? *expected : default_arity(r);
                std::vector<TermPtr> inners;
                for (std::size_t i = 1; i < r.parts.size(); ++i) inners.push_back(build(r.parts[i], n));
                TermPtr outer = build(r.parts[0], k);
                return comp(std::move(outer), std::move(inners));
            }
            case Kind::PrimRec: {
                unsigned n;
                if (expected) {
                    if (*expected == 0) return mismatch(r, 0, default_arity(r));
                    n = *expected - 1;
                } else {
                    auto a = natural_arity(r);
                    n = a ? *a - 1 : default_arity(r.parts[0]);
                }
                TermPtr base = build(r.parts[0], n);
                TermPtr step = build(r.parts[1], n + 2);
                return primrec(std::move(base), std::move(step));
            }
        }
        throw std::logic_error("unreachable term kind");
    }

private:
    bool repair_;

    TermPtr mismatch(const Raw& r, unsigned want, unsigned have) {
        if (!repair_)
            throw ArityError("expected arity " + std::to_string(want) + ", found " +
                                 std::to_string(have),
                             r.pos);
        TermPtr t = build(r, std::nullopt);
        unsigned a = t->arity;
        std::vector<TermPtr> inners;
        for (unsigned j = 0; j < a; ++j) inners.push_back(want == 0 ? zero(0) : proj(want, 1));
        return comp(std::move(t), std::move(inners));
    }
};

// Cantor list coding: (head, 0) ends, (head, r + 1) continues with code r.
Raw raw_from_code(u64 e) {
    Raw r;
    if (e == 0) return r;
    if (e == 1) {
        r.kind = Kind::Succ;
        return r;
    }
    u64 k = (e - 2) / 3;
    switch ((e - 2) % 3) {
        case 0: {
            auto [a, b] = cantor_unpair(k);
            r.kind = Kind::Proj;
            r.n = static_cast<unsigned>(a + b + 1);
            r.i = static_cast<unsigned>(b + 1);
            return r;
        }
        case 1: {
            auto [o, list] = cantor_unpair(k);
            r.kind = Kind::Comp;
            r.parts.push_back(raw_from_code(o));
            while (true) {
                auto [head, rest] = cantor_unpair(list);
                r.parts.push_back(raw_from_code(head));
                if (rest == 0) break;
                list = rest - 1;
            }
            return r;
        }
        default: {
            auto [b, s] = cantor_unpair(k);
            r.kind = Kind::PrimRec;
            r.parts.push_back(raw_from_code(b));
            r.parts.push_back(raw_from_code(s));
            return r;
        }
    }
}

u64 checked_add(u64 a, u64 b) {
    if (a > std::numeric_limits<u64>::max() - b) throw std::overflow_error("term code overflow");
    return a + b;
}

u64 checked_mul(u64 a, u64 b) {
    if (a != 0 && b > std::numeric_limits<u64>::max() / a)
        throw std::overflow_error("term code overflow");
    return a * b;
}

class Evaluator {
public:
    explicit Evaluator(u64 budget) : budget_(budget) {}

    std::optional<u64> run(const Term& t, const std::vector<u64>& args) {
        if (++used_ >= budget_) return std::nullopt;
        switch (t.kind) {
            case Kind::Zero: return 0;
            case Kind::Succ: return args[0] + 1;
            case Kind::Proj: return args[t.index - 1];
            case Kind::Comp: {
                std::vector<u64> mid;
                mid.reserve(t.parts.size() - 1);
                for (std::size_t i = 1; i < t.parts.size(); ++i) {
                    auto v = run(*t.parts[i], args);
                    if (!v) return std::nullopt;
                    mid.push_back(*v);
                }
                return run(*t.parts[0], mid);
            }
            case Kind::PrimRec: {
                std::vector<u64> params(args.begin(), args.end() - 1);
                u64 m = args.back();
                auto acc = run(*t.parts[0], params);
                if (!acc) return std::nullopt;
                std::vector<u64> step_args = params;
                step_args.push_back(0);
                step_args.push_back(0);
                for (u64 j = 0; j < m; ++j) {
                    step_args[step_args.size() - 2] = j;
                    step_args.back() = *acc;
                    acc = run(*t.parts[1], step_args);
                    if (!acc) return std::nullopt;
                }
                return acc;
            }
        }
        return std::nullopt;
    }

    u64 used() const { return used_; }

private:
    u64 budget_;
    u64 used_ = 0;
};

TermPtr widen_constant(const TermPtr& t, unsigned arity) {
    if (t->kind == Kind::Zero) return zero(arity);
    std::vector<TermPtr> inners;
    for (std::size_t i = 1; i < t->parts.size(); ++i) inners.push_back(widen_constant(t->parts[i], arity));
    return comp(t->parts[0], std::move(inners));
}

}  // namespace

std::string serialize(const Term& t) {
    std::string out;
    write(t, out);
    return out;
}

TermPtr parse_term(std::string_view text) {
    for (std::size_t i = 0; i < text.size(); ++i)
        if (static_cast<unsigned char>(text[i]) > 127) throw SyntaxError("non-ASCII input", i);
    Raw r = Parser(text).parse_all();
    return Typer(false).build(r, std::nullopt);
}

StepOutcome eval_clocked(const Term& t, std::span<const u64> args, u64 budget) {
    if (args.size() != t.arity)
        throw ArityError("term of arity " + std::to_string(t.arity) + " applied to " +
                             std::to_string(args.size()) + " arguments",
                         0);
    Evaluator ev(budget);
    std::vector<u64> a(args.begin(), args.end());
    auto v = ev.run(t, a);
    if (!v) return {};
    return {true, *v, ev.used()};
}

u64 cantor_pair(u64 x, u64 y) {
    u64 s = checked_add(x, y);
    u64 a = s, b = checked_add(s, 1);
    if (a % 2 == 0) a /= 2; else b /= 2;
    return checked_add(checked_mul(a, b), y);
}

std::pair<u64, u64> cantor_unpair(u64 z) {
    long double root = std::sqrt(8.0L * static_cast<long double>(z) + 1.0L);
    u64 w = static_cast<u64>((root - 1.0L) / 2.0L);
    auto tri = [](u64 v) { return static_cast<unsigned __int128>(v) * (v + 1) / 2; };
    while (tri(w) > z) --w;
    while (tri(w + 1) <= z) ++w;
    u64 y = z - static_cast<u64>(tri(w));
    return {w - y, y};
}

TermPtr decode(u64 e) { return Typer(true).build(raw_from_code(e), std::nullopt); }

u64 encode(const Term& t) {
    switch (t.kind) {
        case Kind::Zero: return 0;
        case Kind::Succ: return 1;
        case Kind::Proj:
            return checked_add(2, checked_mul(3, cantor_pair(t.arity - t.index, t.index - 1)));
        case Kind::Comp: {
            u64 list = 0;
            bool last = true;
            for (std::size_t i = t.parts.size() - 1; i >= 1; --i) {
                u64 rest = last ? 0 : checked_add(list, 1);
                list = cantor_pair(encode(*t.parts[i]), rest);
                last = false;
            }
            return checked_add(3, checked_mul(3, cantor_pair(encode(*t.parts[0]), list)));
        }
        case Kind::PrimRec:
            return checked_add(
                4, checked_mul(3, cantor_pair(encode(*t.parts[0]), encode(*t.parts[1]))));
    }
    return 0;
}

TermPtr as_unary(const TermPtr& t) {
    if (t->arity == 1) return t;
    if (t->arity == 0) return widen_constant(t, 1);
    std::vector<TermPtr> inners(t->arity, proj(1, 1));
    return comp(t, std::move(inners));
}

std::optional<u64> converges_within(u64 e, u64 x, u64 s) {
    TermPtr t = as_unary(decode(e));
    u64 arg = x;
    StepOutcome o = eval_clocked(*t, std::span<const u64>(&arg, 1), s);
    if (!o.converged) return std::nullopt;
    return o.value;
}

Program::Program(TermPtr term) : term_(as_unary(term)) {}

Program Program::from_text(std::string_view text) { return Program(parse_term(text)); }

StepOutcome Program::run(u64 x, u64 budget) const {
    return eval_clocked(*term_, std::span<const u64>(&x, 1), budget);
}

std::optional<u64> Program::within(u64 x, u64 s) const {
    StepOutcome o = run(x, s);
    if (!o.converged) return std::nullopt;
    return o.value;
}

u64 Program::value(u64 x) const {
    StepOutcome o = run(x, std::numeric_limits<u64>::max());
    return o.value;
}

u64 Program::cost(u64 x) const {
    StepOutcome o = run(x, std::numeric_limits<u64>::max());
    return o.steps;
}

}  // namespace peq::pr
