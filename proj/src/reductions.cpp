#include "peq/reductions.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace peq::red {

const char* claim_name(Claim c) {
    switch (c) {
        case Claim::Reduction: return "reduction";
        case Claim::GrowthH: return "growth-h";
        case Claim::GrowthP: return "growth-p";
        case Claim::GrowthQ: return "growth-q";
        case Claim::PrincipalR: return "principal-r";
    }
    return "?";
}

Claim parse_claim(std::string_view text) {
    for (Claim c : {Claim::Reduction, Claim::GrowthH, Claim::GrowthP, Claim::GrowthQ,
                    Claim::PrincipalR})
        if (text == claim_name(c)) return c;
    throw PreconditionFailed("unknown claim kind '" + std::string(text) + "'");
}

const char* flavor_name(Flavor f) {
    switch (f) {
        case Flavor::RtoRY: return "RtoRY";
        case Flavor::RYtoR: return "RYtoR";
        case Flavor::RXtoRY: return "RXtoRY";
    }
    return "?";
}

UnaryMap UnaryMap::from_program(pr::Program p, u64 budget_per_call) {
    UnaryMap m;
    m.program_ = std::move(p);
    m.budget_ = budget_per_call;
    return m;
}

UnaryMap UnaryMap::from_table(std::vector<u64> values) {
    UnaryMap m;
    m.table_ = std::move(values);
    return m;
}

u64 UnaryMap::operator()(u64 x) const {
    if (program_) {
        pr::StepOutcome o = program_->run(x, budget_);
        if (!o.converged)
            throw BudgetExceeded(program_->text() + " did not converge on " + std::to_string(x) +
                                 " within " + std::to_string(budget_) + " steps");
        return o.value;
    }
    if (x >= table_.size())
        throw BudgetExceeded("table of length " + std::to_string(table_.size()) +
                             " queried at " + std::to_string(x));
    return table_[x];
}

std::vector<u64> UnaryMap::tabulate(u64 horizon) const {
    std::vector<u64> out(horizon + 1);
    for (u64 x = 0; x <= horizon; ++x) out[x] = (*this)(x);
    return out;
}

void write_witness(std::ostream& out, const Witness& w) {
    out << "# peq-witness v1\n";
    out << "claim\t" << claim_name(w.claim) << '\n';
    out << "horizon\t" << w.horizon << '\n';
    out << "convention\t" << sets::convention_name(w.convention) << '\n';
    out << "source\t" << w.source << '\n';
    out << "target\t" << w.target << '\n';
    for (std::size_t x = 0; x < w.values.size(); ++x) out << x << '\t' << w.values[x] << '\n';
}

namespace {

std::string expect_field(std::istream& in, const std::string& key) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("witness file ends before '" + key + "'");
    auto tab = line.find('\t');
    if (tab == std::string::npos || line.substr(0, tab) != key)
        throw IoError("witness file: expected '" + key + "' line, got '" + line + "'");
    return line.substr(tab + 1);
}

u64 to_u64(const std::string& s) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(s, &used);
    } catch (const std::exception&) {
        throw IoError("not a number: '" + s + "'");
    }
    if (used != s.size()) throw IoError("not a number: '" + s + "'");
    return v;
}

}  // namespace

Witness read_witness(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "# peq-witness v1") throw IoError("not a witness file");
    Witness w;
    w.claim = parse_claim(expect_field(in, "claim"));
    w.horizon = to_u64(expect_field(in, "horizon"));
    w.convention = sets::parse_convention(expect_field(in, "convention"));
    w.source = expect_field(in, "source");
    w.target = expect_field(in, "target");
    while (std::getline(in, line)) {
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw IoError("witness row without tab: '" + line + "'");
        if (to_u64(line.substr(0, tab)) != w.values.size())
            throw IoError("witness rows out of order at '" + line + "'");
        w.values.push_back(to_u64(line.substr(tab + 1)));
    }
    return w;
}

std::optional<u64> ClockedRuns::within(u64 x, u64 s) {
    if (x >= memo_.size()) memo_.resize(x + 1);
    Entry& e = memo_[x];
    if (!e.done && e.tried < s) {
        u64 budget = std::max<u64>(s, 2 * e.tried);
        pr::StepOutcome o = program_.run(x, budget);
        if (o.converged) {
            e.done = true;
            e.value = o.value;
            e.cost = o.steps;
        } else {
            e.tried = budget;
        }
    }
    if (e.done && e.cost < s) return e.value;
    return std::nullopt;
}

bool RelationWindow::related(u64 a, u64 b) {
    if (a == b) return true;
    if (!r_.carrier) return r_.related(a, b);
    u64 top = std::max(a, b);
    if (top >= bits_.size()) {
        u64 want = std::max<u64>(top + 1, 2 * bits_.size());
        for (u64 i = bits_.size(); i < want; ++i) bits_.push_back(r_.carrier->bit(i) ? 1 : 0);
    }
    return bits_[a] && bits_[b];
}

std::optional<Counterexample> check_reduction_table(const std::vector<u64>& f, const Relation& r,
                                                    const Relation& s, u64 n) {
    if (f.size() <= n) throw BudgetExceeded("reduction table shorter than the horizon");
    RelationWindow rw(r), sw(s);
    for (u64 x = 0; x <= n; ++x)
        for (u64 y = x + 1; y <= n; ++y) {
            bool left = rw.related(x, y);
            if (left != sw.related(f[x], f[y])) return Counterexample{Flavor::RtoRY, x, y, n, left};
        }
    return std::nullopt;
}

std::optional<Counterexample> check_reduction_prefix(const UnaryMap& f, const Relation& r,
                                                     const Relation& s, u64 n) {
    return check_reduction_table(f.tabulate(n), r, s, n);
}

namespace {

bool y_equivalent(const Bits& sigma, u64 a, u64 b) {
    return a == b || (sigma[a] && sigma[b]);
}

}  // namespace

Detector::Detector(Flavor flavor, pr::Program p, std::optional<Relation> r)
    : flavor_(flavor), runs_(std::move(p)) {
    if (r) rel_.emplace(std::move(*r));
    if (flavor != Flavor::RXtoRY && !rel_)
        throw PreconditionFailed("detector needs a relation for this flavor");
}

bool Detector::hit(u64 l, u64 m, const Bits& sigma, const Bits* sigma_x) {
    u64 a = *runs_.within(l, std::numeric_limits<u64>::max());
    u64 b = *runs_.within(m, std::numeric_limits<u64>::max());
    switch (flavor_) {
        case Flavor::RtoRY: return rel_->related(l, m) == !y_equivalent(sigma, a, b);
        case Flavor::RYtoR: return (sigma[l] && sigma[m]) == !rel_->related(a, b);
        case Flavor::RXtoRY: return ((*sigma_x)[l] && (*sigma_x)[m]) == !y_equivalent(sigma, a, b);
    }
    return false;
}

std::optional<Counterexample> Detector::step(const Bits& sigma, u64 s, const Bits* sigma_x) {
    if (flavor_ == Flavor::RXtoRY && !sigma_x)
        throw PreconditionFailed("two-string detector needs both strings");
    // Points l eligible at stage s: argument inside the scanned range, value
    // converged in fewer than s steps and inside the string that judges images.
    u64 range = 0;
    switch (flavor_) {
        case Flavor::RtoRY: range = s + 1; break;
        case Flavor::RYtoR: range = sigma.size(); break;
        case Flavor::RXtoRY: range = sigma_x->size(); break;
    }
    if (is_usable_.size() < range) is_usable_.resize(range, 0);
    std::size_t old_count = usable_.size();
    for (u64 x = 0; x < range; ++x) {
        if (is_usable_[x]) continue;
        auto v = runs_.within(x, s);
        if (!v) continue;
        if (flavor_ != Flavor::RYtoR && *v >= sigma.size()) continue;
        is_usable_[x] = 1;
        usable_.push_back(x);
    }
    if (usable_.size() == old_count) return std::nullopt;
    std::optional<std::pair<u64, u64>> best;
    for (std::size_t i = old_count; i < usable_.size(); ++i) {
        u64 fresh = usable_[i];
        for (std::size_t j = 0; j < i; ++j) {
            u64 other = usable_[j];
            std::pair<u64, u64> pr{std::min(fresh, other), std::max(fresh, other)};
            if (best && pr >= *best) continue;
            if (hit(pr.first, pr.second, sigma, sigma_x)) best = pr;
        }
    }
    if (!best) return std::nullopt;
    Counterexample c;
    c.flavor = flavor_;
    c.l = best->first;
    c.m = best->second;
    c.stage = s;
    switch (flavor_) {
        case Flavor::RtoRY: c.left_side = rel_->related(c.l, c.m); break;
        case Flavor::RYtoR: c.left_side = sigma[c.l] && sigma[c.m]; break;
        case Flavor::RXtoRY: c.left_side = (*sigma_x)[c.l] && (*sigma_x)[c.m]; break;
    }
    return c;
}

std::optional<Counterexample> detect_r_to_ry(const pr::Program& p, const Relation& r,
                                             const Bits& sigma_y, u64 s) {
    Detector d(Flavor::RtoRY, p, r);
    return d.step(sigma_y, s);
}

std::optional<Counterexample> detect_ry_to_r(const pr::Program& p, const Relation& r,
                                             const Bits& sigma_y, u64 s) {
    Detector d(Flavor::RYtoR, p, r);
    return d.step(sigma_y, s);
}

std::optional<Counterexample> detect_rx_to_ry(const pr::Program& p, const Bits& sigma_x,
                                              const Bits& sigma_y, u64 s) {
    Detector d(Flavor::RXtoRY, p);
    return d.step(sigma_y, s, &sigma_x);
}

void require_reduction(const std::vector<u64>& f, const SetDescriptor& x, const SetDescriptor& y,
                       u64 horizon, const std::string& what) {
    auto bad = check_reduction_table(f, sets::equiv_view(x), sets::equiv_view(y), horizon);
    if (bad)
        throw NotAReduction(what + " fails on the pair (" + std::to_string(bad->l) + "," +
                            std::to_string(bad->m) + ")");
}

namespace {

bool increasing_on_complement(const std::vector<u64>& f, const SetDescriptor& x, u64 horizon) {
    std::optional<u64> last;
    for (u64 k = 0; k <= horizon; ++k) {
        if (x.bit(k)) continue;
        if (last && f[k] <= *last) return false;
        last = f[k];
    }
    return true;
}

bool complement_into_complement(const std::vector<u64>& f, const SetDescriptor& x,
                                const SetDescriptor& y, u64 horizon) {
    for (u64 k = 0; k <= horizon; ++k)
        if (!x.bit(k) && y.bit(f[k])) return false;
    return true;
}

}  // namespace

std::vector<u64> synth_h_from_reduction(const std::vector<u64>& f, const SetDescriptor& x,
                                        const SetDescriptor& y, u64 horizon) {
    require_reduction(f, x, y, horizon, "input reduction");
    std::vector<u64> g = f;
    if (!increasing_on_complement(g, x, horizon) || !complement_into_complement(g, x, y, horizon))
        g = surjectivize(respect_normal_form(f, x, y, horizon), x, y, horizon);
    std::vector<u64> h(horizon + 1, 0);
    std::optional<u64> greatest;
    for (u64 s = 0; s <= horizon; ++s) {
        if (!x.bit(s)) greatest = s;
        h[s] = greatest ? g[*greatest] : 0;
        if (x.zeros_by_index(s) > y.zeros_by_index(h[s]))
            throw NotAReduction("growth bound fails at " + std::to_string(s));
    }
    return h;
}

std::vector<u64> synth_reduction_from_h(const SetDescriptor& x, const SetDescriptor& y,
                                        const std::vector<u64>& h, u64 horizon) {
    if (!y.bit(0)) throw PreconditionFailed("target set must contain 0");
    if (h.size() <= horizon) throw PreconditionFailed("growth table shorter than the horizon");
    std::vector<u64> g(horizon + 1, 0);
    u64 next_free = 0;  // every complement point of Y below this is already used
    for (u64 k = 0; k <= horizon; ++k) {
        if (x.bit(k)) continue;
        // Images on the complement are increasing, so the least unused zero is
        // the first zero at or after the last one handed out.
        u64 y_pos = next_free;
        while (y_pos <= h[k] && y.bit(y_pos)) ++y_pos;
        if (y_pos > h[k])
            throw WitnessBoundViolated("no unused zero of the target below h(" + std::to_string(k) +
                                       ") = " + std::to_string(h[k]));
        g[k] = y_pos;
        next_free = y_pos + 1;
    }
    require_reduction(g, x, y, horizon, "synthesized reduction");
    return g;
}

u64 steps_to_decide(const SetDescriptor& x, u64 n) {
    u64 total = 0;
    for (u64 i = 0; i <= n; ++i) total += x.bit_cost(i);
    return total;
}

std::optional<u64> decided_upto(const SetDescriptor& x, u64 t) {
    u64 total = 0;
    std::optional<u64> last;
    for (u64 i = 0;; ++i) {
        total += x.bit_cost(i);
        if (total > t) return last;
        last = i;
    }
}

std::vector<u64> synth_p_from_reduction(const std::vector<u64>& f, const SetDescriptor& x,
                                        const SetDescriptor& y, u64 horizon) {
    require_reduction(f, x, y, horizon, "input reduction");
    std::vector<u64> g = f;
    if (!increasing_on_complement(g, x, horizon) || !complement_into_complement(g, x, y, horizon))
        g = surjectivize(respect_normal_form(f, x, y, horizon), x, y, horizon);
    // Step window covering the first horizon+1 bits of X.
    u64 window = steps_to_decide(x, horizon);
    std::vector<u64> p(window + 1);
    std::vector<u64> y_cost_prefix;
    auto y_steps = [&](u64 n) {
        while (y_cost_prefix.size() <= n) {
            u64 prev = y_cost_prefix.empty() ? 0 : y_cost_prefix.back();
            y_cost_prefix.push_back(prev + y.bit_cost(y_cost_prefix.size()));
        }
        return y_cost_prefix[n];
    };
    u64 running = 0;
    for (u64 s = 0; s <= window; ++s) {
        // The zeros of X visible after s steps lie among bits 0..s, so a running
        // maximum of the images over [0, s] bounds every one of them.
        if (s <= horizon) running = std::max(running, g[s]);
        p[s] = std::max(s + 1, y_steps(running));
        if (x.zeros_by_steps(s) > y.zeros_by_steps(p[s]))
            throw NotAReduction("step growth bound fails at " + std::to_string(s));
    }
    return p;
}

std::vector<u64> synth_reduction_from_p(const SetDescriptor& x, const SetDescriptor& y,
                                        const std::vector<u64>& p, u64 horizon) {
    // h(m) = last bit of Y decided within p(first stage deciding X up to m).
    std::vector<u64> h(horizon + 1);
    u64 stage = 0;
    for (u64 m = 0; m <= horizon; ++m) {
        stage += x.bit_cost(m);
        if (stage >= p.size()) throw PreconditionFailed("step bound table too short");
        h[m] = decided_upto(y, p[stage]).value_or(0);
    }
    return synth_reduction_from_h(x, y, h, horizon);
}

std::vector<u64> respect_normal_form(const std::vector<u64>& f, const SetDescriptor& x,
                                     const SetDescriptor& y, u64 horizon) {
    require_reduction(f, x, y, horizon, "input reduction");
    std::optional<u64> member;
    for (u64 k = 0; k <= horizon && !member; ++k)
        if (x.bit(k)) member = k;
    if (!member || y.bit(f[*member])) return f;
    u64 a = f[*member];
    u64 fixed = 0;
    while (!y.bit(fixed)) ++fixed;
    std::vector<u64> g(horizon + 1);
    for (u64 k = 0; k <= horizon; ++k) {
        if (x.bit(k)) g[k] = fixed;
        else if (y.bit(f[k])) g[k] = a;
        else g[k] = f[k];
    }
    require_reduction(g, x, y, horizon, "class-respecting reduction");
    return g;
}

std::vector<u64> surjectivize(const std::vector<u64>& f, const SetDescriptor& x,
                              const SetDescriptor& y, u64 horizon) {
    require_reduction(f, x, y, horizon, "input reduction");
    for (u64 k = 0; k <= horizon; ++k)
        if (x.bit(k) && !y.bit(f[k]))
            throw NotAReduction("input does not map X into Y at " + std::to_string(k));
    std::vector<u64> g(horizon + 1);
    u64 bound = 0;
    u64 next_free = 0;
    for (u64 k = 0; k <= horizon; ++k) {
        bound = std::max(bound, f[k]);
        if (x.bit(k)) {
            g[k] = f[k];
            continue;
        }
        u64 y_pos = next_free;
        while (y_pos <= bound && y.bit(y_pos)) ++y_pos;
        if (y_pos > bound)
            throw NotAReduction("no unused zero of the target below " + std::to_string(bound));
        g[k] = y_pos;
        next_free = y_pos + 1;
    }
    require_reduction(g, x, y, horizon, "surjective reduction");
    return g;
}

std::vector<ImmunityVerdict> check_pre_immune(const SetDescriptor& x,
                                              const std::vector<pr::Program>& family,
                                              u64 horizon) {
    std::vector<ImmunityVerdict> out;
    for (const auto& r : family) {
        ImmunityVerdict v;
        v.program = r.text();
        std::vector<std::pair<u64, u64>> seen;  // (value, argument)
        for (u64 k = 0; k <= horizon; ++k) {
            u64 val = r.value(k);
            if (!v.hit && x.bit(val)) v.hit = k;
            seen.emplace_back(val, k);
        }
        std::sort(seen.begin(), seen.end());
        for (std::size_t i = 1; i < seen.size(); ++i) {
            if (seen[i].first != seen[i - 1].first) continue;
            std::pair<u64, u64> c{seen[i - 1].second, seen[i].second};
            if (!v.collision || c < *v.collision) v.collision = c;
            v.injective = false;
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace peq::red
