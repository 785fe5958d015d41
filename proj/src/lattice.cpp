#include "peq/lattice.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <set>

namespace peq::lat {

u64 zop(const SetDescriptor& x, u64 s, Convention c) { return x.zeros(s, c); }

std::uint64_t family_hash(const std::vector<pr::Program>& family) {
    // FNV-1a over the canonical texts, one per line.
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& p : family) {
        for (unsigned char ch : p.text() + "\n") {
            h ^= ch;
            h *= 1099511628211ull;
        }
    }
    return h;
}

EquilibriumReport equilibrium_points(const SetDescriptor& x, const SetDescriptor& y, u64 horizon,
                                     Convention c) {
    EquilibriumReport r;
    r.convention = c;
    r.horizon = horizon;
    for (u64 s = 0; s <= horizon; ++s)
        if (zop(x, s, c) == zop(y, s, c)) r.points.push_back(s);
    return r;
}

std::optional<std::vector<u64>> certify_by_profile(const SetDescriptor& x, const SetDescriptor& y,
                                                   u64 horizon, u64 ceiling) {
    if (!y.bit(0)) return std::nullopt;
    std::vector<u64> h(horizon + 1);
    u64 t = 0;
    for (u64 s = 0; s <= horizon; ++s) {
        u64 need = x.zeros_by_index(s);
        while (t <= ceiling && y.zeros_by_index(t) < need) ++t;
        if (t > ceiling) return std::nullopt;
        h[s] = t;
    }
    try {
        return red::synth_reduction_from_h(x, y, h, horizon);
    } catch (const Error&) {
        return std::nullopt;
    }
}

namespace {

void require_certificate(const std::vector<u64>* certificate, const SetDescriptor& x,
                         const SetDescriptor& y, u64 horizon) {
    if (!certificate) throw NotCertified("no reduction certificate supplied");
    try {
        red::require_reduction(*certificate, x, y, horizon, "certificate");
    } catch (const BudgetExceeded& e) {
        throw NotCertified(e.what());
    } catch (const NotAReduction& e) {
        throw NotCertified(e.what());
    }
}

std::vector<u64> running_max(const std::vector<u64>& v, bool& changed) {
    std::vector<u64> out(v.size());
    u64 best = 0;
    changed = false;
    for (std::size_t i = 0; i < v.size(); ++i) {
        best = std::max(best, v[i]);
        if (best != v[i]) changed = true;
        out[i] = best;
    }
    return out;
}

Bits bits_for_profile(const std::vector<u64>& d, Convention c) {
    Bits b;
    if (c == Convention::Index) {
        b.push_back(d[0] == 0 ? 1 : 0);
        for (std::size_t w = 1; w < d.size(); ++w) b.push_back(d[w] > d[w - 1] ? 0 : 1);
    } else {
        for (std::size_t w = 0; w + 1 < d.size(); ++w) b.push_back(d[w + 1] > d[w] ? 0 : 1);
    }
    return b;
}

struct Rebuilt {
    std::vector<u64> c, d, d_hat;
    SetDescriptor set;
};

// Rebuilds `a` so that its profile equals d(w) = min(d(w-1)+1, Z_a[c(w)]),
// where c(w) is the largest u <= w with Z_a[u] <= Z_b[w] or bound(u) < w.
Rebuilt rebuild(const SetDescriptor& a, const SetDescriptor& b, const std::vector<u64>& bound,
                u64 horizon, Convention conv) {
    std::vector<u64> za(horizon + 1), zb(horizon + 1);
    for (u64 s = 0; s <= horizon; ++s) {
        za[s] = zop(a, s, conv);
        zb[s] = zop(b, s, conv);
    }
    Rebuilt r;
    r.c.resize(horizon + 1);
    r.d.resize(horizon + 1);
    r.d_hat.resize(horizon + 1);
    for (u64 w = 0; w <= horizon; ++w) {
        u64 best = 0;
        for (u64 u = w + 1; u-- > 0;)
            if (za[u] <= zb[w] || bound[u] < w) {
                best = u;
                break;
            }
        r.c[w] = best;
        u64 cap = za[best];
        r.d[w] = w == 0 ? cap : std::min(r.d[w - 1] + 1, cap);
        u64 hat = 0;
        for (u64 u = w + 1; u-- > 0;)
            if (za[u] == r.d[w]) {
                hat = u;
                break;
            }
        r.d_hat[w] = hat;
    }
    r.set = sets::with_prefix(bits_for_profile(r.d, conv), a);
    return r;
}

}  // namespace

DiamondEvidence diamond_evidence_q(const SetDescriptor& x, const SetDescriptor& y,
                                   const std::vector<u64>& q,
                                   const std::vector<u64>* certificate, u64 horizon, u64 k,
                                   Convention c, bool relaxed) {
    require_certificate(certificate, x, y, horizon);
    if (q.size() <= horizon) throw PreconditionFailed("q table shorter than the horizon");
    DiamondEvidence e;
    e.kind = "q";
    e.convention = c;
    e.horizon = horizon;
    e.threshold = k;
    e.relaxed = relaxed;
    for (u64 t = 0; t <= horizon; ++t) {
        u64 zy = zop(y, t, c), zx = zop(x, q[t], c);
        if (relaxed ? zy <= zx : zy == zx) e.stages.push_back(t);
    }
    return e;
}

DiamondEvidence diamond_evidence_r(const SetDescriptor& x, const SetDescriptor& y,
                                   const red::UnaryMap& r, const std::vector<u64>* certificate,
                                   u64 n0, u64 n1, u64 k, u64 ceiling) {
    require_certificate(certificate, x, y, certificate ? certificate->size() - 1 : 0);
    DiamondEvidence e;
    e.kind = "r";
    e.convention = Convention::Index;
    e.horizon = n1;
    e.threshold = k;
    for (u64 n = n0; n <= n1; ++n)
        if (x.principal_zero(n, ceiling) <= r(y.principal_zero(n + 1, ceiling))) e.stages.push_back(n);
    return e;
}

DiamondWitness canonical_diamond_witness(const SetDescriptor& x, const SetDescriptor& y,
                                         const std::vector<u64>& p_in, const std::vector<u64>& q_in,
                                         u64 horizon, Convention conv, u64 min_pairs) {
    if (p_in.size() <= horizon || q_in.size() <= horizon)
        throw PreconditionFailed("p and q tables must cover the horizon");
    DiamondWitness w;
    bool p_changed = false, q_changed = false;
    std::vector<u64> p = running_max(p_in, p_changed);
    std::vector<u64> q = running_max(q_in, q_changed);
    if (p_changed) w.notes.push_back("p monotonized by running maximum");
    if (q_changed) w.notes.push_back("q monotonized by running maximum");

    // Good pairs grouped by their common zero count j, split by which of
    // p(s) >= s and q(t) >= t holds.
    std::set<u64> s_up, s_down, t_up, t_down;
    for (u64 s = 0; s <= horizon; ++s) {
        u64 j = zop(x, s, conv);
        if (zop(y, p[s], conv) == j) (p[s] >= s ? s_up : s_down).insert(j);
    }
    for (u64 t = 0; t <= horizon; ++t) {
        u64 j = zop(y, t, conv);
        if (zop(x, q[t], conv) == j) (q[t] >= t ? t_up : t_down).insert(j);
    }
    auto count_both = [](const std::set<u64>& a, const std::set<u64>& b1, const std::set<u64>& b2) {
        u64 n = 0;
        for (u64 j : a)
            if (b1.count(j) || b2.count(j)) ++n;
        return n;
    };
    u64 case1 = count_both(s_up, t_up, t_down);
    u64 case2 = count_both(t_up, s_up, s_down);
    u64 case3 = 0;
    for (u64 j : s_down)
        if (t_down.count(j)) ++case3;

    if (case1 >= min_pairs && case1 > 0) {
        w.proof_case = 1;
        w.good_pairs = case1;
        Rebuilt r = rebuild(x, y, p, horizon, conv);
        w.c = std::move(r.c);
        w.d = std::move(r.d);
        w.d_hat = std::move(r.d_hat);
        w.x_star = r.set;
        w.y_star = y;
    } else if (case2 >= min_pairs && case2 > 0) {
        w.proof_case = 2;
        w.good_pairs = case2;
        Rebuilt r = rebuild(y, x, q, horizon, conv);
        w.c = std::move(r.c);
        w.d = std::move(r.d);
        w.d_hat = std::move(r.d_hat);
        w.x_star = x;
        w.y_star = r.set;
    } else if (case3 >= min_pairs && case3 > 0) {
        w.proof_case = 3;
        w.good_pairs = case3;
        w.x_star = x;
        w.y_star = y;
    } else {
        throw CaseUndetermined("good pairs by case at horizon " + std::to_string(horizon) + ": " +
                               std::to_string(case1) + ", " + std::to_string(case2) + ", " +
                               std::to_string(case3) + " (need " + std::to_string(min_pairs) + ")");
    }
    for (u64 s = 0; s <= horizon; ++s)
        if (zop(w.x_star, s, conv) == zop(w.y_star, s, conv)) ++w.equilibria;
    return w;
}

RestrictedWitness restrict_diamond_witness(const SetDescriptor& x, const SetDescriptor& x_inner,
                                           const SetDescriptor& y_inner, const SetDescriptor& y,
                                           const std::vector<std::vector<u64>>& chain,
                                           const std::vector<u64>& q, u64 horizon, Convention c) {
    if (chain.size() != 3) throw NotCertified("need three certificates X<=X'<=Y'<=Y");
    require_certificate(&chain[0], x, x_inner, horizon);
    require_certificate(&chain[1], x_inner, y_inner, horizon);
    require_certificate(&chain[2], y_inner, y, horizon);
    const u64 ceiling = 16 * (horizon + 1);

    // f(t): least u with Z_{X'}[u] = Z_X[t]; g(t): least u with Z_Y[u] = Z_{Y'}[t].
    auto least_matching = [&](const SetDescriptor& target, u64 value) {
        for (u64 u = 0; u <= ceiling; ++u)
            if (zop(target, u, c) == value) return u;
        throw NotCertified("profile value " + std::to_string(value) + " not reached below " +
                           std::to_string(ceiling));
    };

    std::vector<u64> outer;  // stages u with Z_Y[u] = Z_X[q(u)]
    for (u64 u = 0; u < q.size(); ++u)
        if (zop(y, u, c) == zop(x, q[u], c)) outer.push_back(u);

    RestrictedWitness out;
    for (u64 u : outer)
        if (u <= horizon) ++out.outer_count;
    out.q.resize(horizon + 1);
    for (u64 t = 0; t <= horizon; ++t) {
        u64 limit = least_matching(y, zop(y_inner, t + 1, c));
        auto it = std::lower_bound(outer.begin(), outer.end(), limit);
        if (it == outer.begin()) {
            out.q[t] = t;
            continue;
        }
        u64 u = *std::prev(it);
        out.q[t] = least_matching(x_inner, zop(x, q[u], c));
    }
    out.inner = diamond_evidence_q(x_inner, y_inner, out.q, &chain[1], horizon, 0, c);
    out.lost = out.outer_count > out.inner.stages.size() ? out.outer_count - out.inner.stages.size() : 0;
    return out;
}

namespace {

// Zeros generated by a recurrence, extended on demand.
class RecurrenceSource : public sets::ClosedSource {
public:
    u64 zeros_upto(u64 s) override {
        std::lock_guard lock(mu_);
        while (zeros_.empty() || zeros_.back() <= s) extend();
        return static_cast<u64>(std::upper_bound(zeros_.begin(), zeros_.end(), s) - zeros_.begin());
    }
    std::optional<u64> nth_zero(u64 n, u64 ceiling) override {
        std::lock_guard lock(mu_);
        while (zeros_.size() <= n) {
            if (!zeros_.empty() && zeros_.back() > ceiling) return std::nullopt;
            extend();
        }
        return zeros_[n];
    }

protected:
    std::vector<u64> zeros_;
    virtual u64 next_zero() = 0;

private:
    std::mutex mu_;
    void extend() { zeros_.push_back(next_zero()); }
};

u64 max_image(const std::vector<pr::Program>& family, u64 z) {
    u64 best = 0;
    for (const auto& r : family) best = std::max(best, r.value(z));
    return best;
}

std::string family_list(const std::vector<pr::Program>& family) {
    std::string s;
    for (std::size_t i = 0; i < family.size(); ++i) {
        if (i) s += ", ";
        s += "\"" + family[i].text() + "\"";
    }
    return s;
}

class SlowSource final : public RecurrenceSource {
public:
    SlowSource(std::vector<pr::Program> family, u64 window)
        : family_(std::move(family)), window_(window) {}
    std::string dsl() const override {
        return "slow(" + family_list(family_) + ") window " + std::to_string(window_);
    }
    sets::Kind kind() const override { return sets::Kind::Derived; }

protected:
    u64 next_zero() override {
        if (zeros_.empty()) return 1;
        u64 z = zeros_.back();
        return std::max(z + 1, max_image(family_, z) + 1);
    }

private:
    std::vector<pr::Program> family_;
    u64 window_;
};

class NondiamondSource final : public RecurrenceSource {
public:
    NondiamondSource(SetDescriptor y, std::vector<pr::Program> family, u64 window, u64 ceiling)
        : y_(std::move(y)), family_(std::move(family)), window_(window), ceiling_(ceiling) {}
    std::string dsl() const override {
        return "nondiamond(" + y_.dsl() + "; " + family_list(family_) + ") window " +
               std::to_string(window_);
    }
    sets::Kind kind() const override { return sets::Kind::Derived; }

protected:
    u64 next_zero() override {
        u64 n = zeros_.size();
        u64 floor = zeros_.empty() ? 1 : zeros_.back() + 1;
        u64 z = std::max(floor, y_.principal_zero(n, ceiling_));
        if (!family_.empty()) z = std::max(z, max_image(family_, y_.principal_zero(n + 1, ceiling_)) + 1);
        return z;
    }

private:
    SetDescriptor y_;
    std::vector<pr::Program> family_;
    u64 window_;
    u64 ceiling_;
};

}  // namespace

SetDescriptor make_slow_set(const std::vector<pr::Program>& family, u64 window) {
    if (family.empty()) return sets::evens();
    return SetDescriptor(std::make_shared<SlowSource>(family, window));
}

NondiamondSet make_nondiamond_below(const SetDescriptor& y, const std::vector<pr::Program>& family,
                                    u64 window, u64 ceiling) {
    NondiamondSet out;
    out.set = SetDescriptor(std::make_shared<NondiamondSource>(y, family, window, ceiling));
    if (family.empty()) {
        out.degenerate = true;
        out.set.source()->notes.push_back("empty family: no anti-evidence requested");
    }
    return out;
}

bool SlownessCertificate::all_hold() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.holds; });
}

SlownessCertificate check_slow(const SetDescriptor& x, const std::vector<pr::Program>& family,
                               u64 n0, u64 n1, u64 ceiling) {
    SlownessCertificate cert;
    for (const auto& r : family) cert.family.push_back(r.text());
    cert.n0 = n0;
    cert.n1 = n1;
    for (u64 n = n0; n <= n1; ++n) {
        u64 here = x.principal_zero(n, ceiling);
        u64 next = x.principal_zero(n + 1, ceiling);
        for (u64 i = 0; i < family.size(); ++i) {
            u64 bound = family[i].value(here);
            cert.verdicts.push_back({i, n, next, bound, next > bound});
        }
    }
    return cert;
}

X1BoundReport x1_bound_check(const SetDescriptor& x, const SetDescriptor& y,
                             const std::vector<u64>* certificate, u64 horizon, Convention c) {
    require_certificate(certificate, y, x, horizon);
    SetDescriptor lowered = sets::drop_least_zero(x);
    X1BoundReport r;
    r.horizon = horizon;
    r.convention = c;
    for (u64 s = 0; s <= horizon; ++s) {
        u64 zy = zop(y, s, c);
        if (zy >= zop(x, s, c)) r.diamond_side.push_back(s);
        if (zy > zop(lowered, s, c) && !r.first_excess) {
            r.first_excess = s;
            r.reduction_side = false;
        }
    }
    return r;
}

std::vector<u64> shift_identity_reduction(const std::vector<u64>& g, const SetDescriptor& x,
                                          u64 ceiling) {
    u64 least = x.principal_zero(0, ceiling);
    auto it = std::find(g.begin(), g.end(), least);
    if (it == g.end()) return g;
    return std::vector<u64>(std::next(it), g.end());
}

void write_report(std::ostream& out, const EquilibriumReport& r) {
    out << "# peq-report v1 equilibrium\n";
    out << "convention\t" << sets::convention_name(r.convention) << '\n';
    out << "horizon\t" << r.horizon << '\n';
    out << "count\t" << r.points.size() << '\n';
    for (u64 s : r.points) out << "point\t" << s << '\n';
}

void write_report(std::ostream& out, const DiamondEvidence& e) {
    out << "# peq-report v1 evidence-" << e.kind << '\n';
    out << "convention\t" << sets::convention_name(e.convention) << '\n';
    out << "horizon\t" << e.horizon << '\n';
    out << "threshold\t" << e.threshold << '\n';
    out << "relaxed\t" << (e.relaxed ? 1 : 0) << '\n';
    out << "verdict\t"
        << (e.evidence() ? "evidence(" + std::to_string(e.stages.size()) + ")"
                         : std::string("no-evidence-at-horizon"))
        << '\n';
    for (u64 s : e.stages) out << "stage\t" << s << '\n';
}

void write_report(std::ostream& out, const SlownessCertificate& c, std::uint64_t hash) {
    out << "# peq-report v1 slowness\n";
    out << "family-hash\t" << std::hex << std::setw(16) << std::setfill('0') << hash << std::dec
        << std::setfill(' ') << '\n';
    for (std::size_t i = 0; i < c.family.size(); ++i) out << "member\t" << i << '\t' << c.family[i] << '\n';
    out << "window\t" << c.n0 << '\t' << c.n1 << '\n';
    for (const auto& v : c.verdicts)
        out << v.n << '\t' << v.member << '\t' << v.next_zero << '\t' << v.bound << '\t'
            << (v.holds ? "holds" : "fails") << '\n';
}

}  // namespace peq::lat
