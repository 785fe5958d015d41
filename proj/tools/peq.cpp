// Command-line front end. Reports go to stdout (or --out) as tab-separated
// text with LF endings; diagnostics go to stderr.
//
// Exit codes: 0 success, 1 misuse or failed precondition, 2 stage budget
// exhausted, 3 I/O error.

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "peq/constructions.hpp"
#include "peq/lattice.hpp"

using namespace peq;
using u64 = std::uint64_t;

namespace {

struct Options {
    u64 horizon = 100;
    u64 max_stages = 1000;
    u64 k = 0;
    u64 count = 2;
    u64 cycle_budget = 0;
    u64 n0 = 0;
    u64 n1 = 50;
    u64 window = 64;
    std::string convention = "index";
    std::string family_path;
    std::string out_path;
    std::string policy = "once";
    std::string map_term;
    std::string witness_path;
    std::string p_term;
    std::string q_term;
    bool relaxed = false;
    std::vector<std::string> sets;
    std::map<std::string, std::string> roles;
};

struct Output {
    std::ostringstream text;
    void flush_to(const std::string& path) {
        if (path.empty()) {
            std::cout << text.str();
            std::cout.flush();
            return;
        }
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot write " + path);
        f << text.str();
        if (!f) throw IoError("write failed for " + path);
    }
};

sets::SetDescriptor set_arg(const Options& o, std::size_t i, const char* what) {
    if (i >= o.sets.size()) throw PreconditionFailed(std::string("missing descriptor for ") + what);
    return sets::parse_descriptor(o.sets[i]);
}

sets::Convention convention(const Options& o) { return sets::parse_convention(o.convention); }

con::OpponentFamily family(const Options& o) {
    con::Policy policy = con::parse_policy(o.policy);
    if (o.family_path.empty()) return con::OpponentFamily{{}, policy};
    return con::load_family(o.family_path, policy);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

constexpr u64 kMapBudget = 100'000'000;

std::vector<u64> term_table(const std::string& term, u64 horizon) {
    return red::UnaryMap::from_program(pr::Program::from_text(term), kMapBudget).tabulate(horizon);
}

// The function given by --map TERM or --witness PATH, tabulated on 0..horizon.
std::vector<u64> map_table(const Options& o) {
    if (!o.map_term.empty()) return term_table(o.map_term, o.horizon);
    if (o.witness_path.empty()) throw PreconditionFailed("give --map TERM or --witness PATH");
    std::ifstream in(o.witness_path, std::ios::binary);
    if (!in) throw IoError("cannot read " + o.witness_path);
    red::Witness w = red::read_witness(in);
    if (w.values.size() < o.horizon + 1)
        throw PreconditionFailed("witness covers 0.." + std::to_string(w.values.size() - 1) +
                                 ", horizon is " + std::to_string(o.horizon));
    w.values.resize(o.horizon + 1);
    return w.values;
}

void header(Output& out, const char* kind, const Options& o) {
    out.text << "# peq-report v1 " << kind << "\n";
    for (std::size_t i = 0; i < o.sets.size(); ++i) out.text << "input\t" << i << "\t" << o.sets[i] << "\n";
    out.text << "horizon\t" << o.horizon << "\n";
}

void write_table(Output& out, red::Claim claim, const Options& o, const sets::SetDescriptor& x,
                 const sets::SetDescriptor& y, std::vector<u64> values) {
    red::Witness w{claim, o.horizon, convention(o), x.dsl(), y.dsl(), std::move(values)};
    red::write_witness(out.text, w);
}

// --- profile / lattice -------------------------------------------------------

int cmd_profile(const Options& o) {
    auto x = set_arg(o, 0, "profile");
    Output out;
    header(out, "profile", o);
    out.text << "s\tby_index\tby_steps\n";
    for (u64 s = 0; s <= o.horizon; ++s)
        out.text << s << "\t" << x.zeros_by_index(s) << "\t" << x.zeros_by_steps(s) << "\n";
    out.flush_to(o.out_path);
    return 0;
}

int cmd_lattice_binary(const Options& o, bool join) {
    auto x = set_arg(o, 0, "X"), y = set_arg(o, 1, "Y");
    auto z = join ? sets::set_join(x, y) : sets::set_meet(x, y);
    Output out;
    header(out, join ? "join" : "meet", o);
    out.text << "result\t" << z.dsl() << "\n";
    out.text << "bits\t" << sets::bits_to_string(z.prefix(o.horizon)) << "\n";
    std::string verdict = "ok";
    for (u64 s = 0; s <= o.horizon; ++s) {
        u64 a = x.zeros_by_index(s), b = y.zeros_by_index(s);
        if (z.zeros_by_index(s) != (join ? std::max(a, b) : std::min(a, b))) {
            verdict = "fails-at\t" + std::to_string(s);
            break;
        }
    }
    out.text << "profile-identity\t" << verdict << "\n";
    for (const auto& n : z.notes()) out.text << "note\t" << n << "\n";
    out.flush_to(o.out_path);
    return 0;
}

int cmd_distrib(const Options& o) {
    auto x = set_arg(o, 0, "X"), y = set_arg(o, 1, "Y"), z = set_arg(o, 2, "Z");
    auto left = sets::set_join(x, sets::set_meet(y, z));
    auto right = sets::set_meet(sets::set_join(x, y), sets::set_join(x, z));
    Output out;
    header(out, "distrib", o);
    out.text << "left\t" << left.dsl() << "\n" << "right\t" << right.dsl() << "\n";
    std::string verdict = "ok";
    for (u64 i = 0; i <= o.horizon; ++i)
        if (left.bit(i) != right.bit(i)) {
            verdict = "differs-at\t" + std::to_string(i);
            break;
        }
    out.text << "bit-exact\t" << verdict << "\n";
    out.flush_to(o.out_path);
    return 0;
}

int cmd_equilibrium(const Options& o) {
    auto x = set_arg(o, 0, "X"), y = set_arg(o, 1, "Y");
    Output out;
    lat::write_report(out.text, lat::equilibrium_points(x, y, o.horizon, convention(o)));
    out.flush_to(o.out_path);
    return 0;
}

// --- reduce -------------------------------------------------------------------

int cmd_reduce(const Options& o, const std::string& op) {
    auto x = set_arg(o, 0, "X"), y = set_arg(o, 1, "Y");
    Output out;
    if (op == "check") {
        auto f = map_table(o);
        auto cx = red::check_reduction_table(f, sets::equiv_view(x), sets::equiv_view(y), o.horizon);
        header(out, "reduction-check", o);
        if (cx)
            out.text << "verdict\tcounterexample\t" << cx->l << "\t" << cx->m << "\n";
        else
            out.text << "verdict\tok\n";
        out.flush_to(o.out_path);
        return 0;
    }
    if (op == "synth-h") {
        auto f = map_table(o);
        bool steps = convention(o) == sets::Convention::Steps;
        auto table = steps ? red::synth_p_from_reduction(f, x, y, o.horizon)
                           : red::synth_h_from_reduction(f, x, y, o.horizon);
        write_table(out, steps ? red::Claim::GrowthP : red::Claim::GrowthH, o, x, y, table);
    } else if (op == "synth-g") {
        auto h = map_table(o);
        bool steps = convention(o) == sets::Convention::Steps;
        auto g = steps ? red::synth_reduction_from_p(x, y, h, o.horizon)
                       : red::synth_reduction_from_h(x, y, h, o.horizon);
        red::require_reduction(g, x, y, o.horizon, "synthesized reduction");
        write_table(out, red::Claim::Reduction, o, x, y, g);
    } else if (op == "surjectivize") {
        write_table(out, red::Claim::Reduction, o, x, y, red::surjectivize(map_table(o), x, y, o.horizon));
    } else if (op == "respect") {
        write_table(out, red::Claim::Reduction, o, x, y,
                    red::respect_normal_form(map_table(o), x, y, o.horizon));
    }
    out.flush_to(o.out_path);
    return 0;
}

// --- diamond ------------------------------------------------------------------

std::vector<u64> certificate(const sets::SetDescriptor& x, const sets::SetDescriptor& y, u64 horizon) {
    auto c = lat::certify_by_profile(x, y, horizon, 64 * (horizon + 1));
    if (!c) throw NotCertified("no reduction from " + x.dsl() + " to " + y.dsl() + " found");
    return *c;
}

int cmd_diamond(const Options& o, const std::string& op) {
    Output out;
    if (op == "evidence-q") {
        auto x = set_arg(o, 0, "X"), y = set_arg(o, 1, "Y");
        auto cert = certificate(x, y, o.horizon);
        std::string q = o.map_term.empty() ? "P[1,1]" : o.map_term;
        auto e = lat::diamond_evidence_q(x, y, term_table(q, o.horizon), &cert, o.horizon, o.k,
                                         convention(o), o.relaxed);
        lat::write_report(out.text, e);
    } else if (op == "evidence-r") {
        auto x = set_arg(o, 0, "X"), y = set_arg(o, 1, "Y");
        std::string r = o.map_term.empty() ? "P[1,1]" : o.map_term;
        auto e = lat::diamond_evidence_r(x, y, red::UnaryMap::from_program(pr::Program::from_text(r), kMapBudget),
                                         nullptr, o.n0, o.n1, o.k);
        lat::write_report(out.text, e);
    } else if (op == "canonical") {
        auto x = set_arg(o, 0, "X"), y = set_arg(o, 1, "Y");
        std::string p = o.p_term.empty() ? "P[1,1]" : o.p_term;
        std::string q = o.q_term.empty() ? "P[1,1]" : o.q_term;
        auto w = lat::canonical_diamond_witness(x, y, term_table(p, o.horizon), term_table(q, o.horizon),
                                                o.horizon, convention(o), std::max<u64>(o.k, 1));
        header(out, "canonical-diamond", o);
        out.text << "case\t" << w.proof_case << "\n";
        out.text << "x_star\t" << w.x_star.dsl() << "\n";
        out.text << "y_star\t" << w.y_star.dsl() << "\n";
        out.text << "good_pairs\t" << w.good_pairs << "\n";
        out.text << "equilibria\t" << w.equilibria << "\n";
        for (const auto& n : w.notes) out.text << "note\t" << n << "\n";
    } else if (op == "restrict") {
        auto x = set_arg(o, 0, "X"), xi = set_arg(o, 1, "X'"), yi = set_arg(o, 2, "Y'"),
             y = set_arg(o, 3, "Y");
        std::vector<std::vector<u64>> chain{certificate(x, xi, o.horizon),
                                            certificate(xi, yi, o.horizon),
                                            certificate(yi, y, o.horizon)};
        std::string q = o.map_term.empty() ? "P[1,1]" : o.map_term;
        auto w = lat::restrict_diamond_witness(x, xi, yi, y, chain, term_table(q, o.horizon),
                                               o.horizon, convention(o));
        header(out, "restricted-diamond", o);
        out.text << "outer_count\t" << w.outer_count << "\n";
        out.text << "inner_count\t" << w.inner.stages.size() << "\n";
        out.text << "lost\t" << w.lost << "\n";
        for (std::size_t t = 0; t < w.q.size(); ++t) out.text << t << "\t" << w.q[t] << "\n";
    }
    out.flush_to(o.out_path);
    return 0;
}

// --- slow ---------------------------------------------------------------------

int cmd_slow(const Options& o, const std::string& op) {
    auto f = family(o);
    Output out;
    if (op == "make") {
        auto x = lat::make_slow_set(f.members, o.window);
        header(out, "slow-set", o);
        out.text << "descriptor\t" << x.dsl() << "\n";
        out.text << "family-hash\t" << std::hex << lat::family_hash(f.members) << std::dec << "\n";
        for (u64 n = 0;; ++n) {
            u64 zero = x.principal_zero(n, 100'000'000);
            if (zero > o.horizon) break;
            out.text << "zero\t" << n << "\t" << zero << "\n";
        }
    } else {
        auto x = set_arg(o, 0, "X");
        auto c = lat::check_slow(x, f.members, o.n0, o.n1);
        lat::write_report(out.text, c, lat::family_hash(f.members));
        out.text << "verdict\t" << (c.all_hold() ? "holds" : "fails") << "\n";
    }
    out.flush_to(o.out_path);
    return 0;
}

// --- construct / verify -------------------------------------------------------

int cmd_construct(const Options& o, const std::string& name) {
    con::ConstructionSpec spec;
    spec.kind = con::parse_construction(name);
    spec.family = family(o);
    spec.max_stages = o.max_stages;
    spec.cycle_budget = o.cycle_budget;
    spec.count = o.count;
    spec.k = o.k;
    auto roles = con::input_roles(spec.kind);
    std::size_t positional = 0;
    for (const auto& role : roles) {
        std::string key = role;
        std::transform(key.begin(), key.end(), key.begin(), ::tolower);
        auto it = o.roles.find(key);
        if (it != o.roles.end() && !it->second.empty()) {
            spec.inputs.push_back(sets::parse_descriptor(it->second));
        } else if (positional < o.sets.size()) {
            spec.inputs.push_back(sets::parse_descriptor(o.sets[positional++]));
        } else {
            throw PreconditionFailed(name + " needs an input set for role " + role);
        }
    }
    if (positional < o.sets.size())
        throw PreconditionFailed(name + " takes " + std::to_string(roles.size()) + " input sets");
    con::RunOutcome run = con::run_construction(spec);
    Output trace;
    trace.text << con::render_trace(run);
    trace.flush_to(o.out_path);

    std::ostream& report = o.out_path.empty() ? std::cerr : std::cout;
    report << "# peq-report v1 construct\n";
    report << "construction\t" << name << "\n";
    if (!o.out_path.empty()) report << "trace\t" << o.out_path << "\n";
    for (std::size_t i = 0; i < run.outputs.size(); ++i)
        report << "descriptor\t" << run.output_names[i] << "\t" << run.descriptor(i).dsl() << "\n";
    con::Validation v = con::validate(run);
    for (const auto& c : v.checks)
        report << "check\t" << c.name << "\t" << (c.ok ? "ok" : "fail") << "\t" << c.detail << "\n";
    if (run.exhausted) {
        report << "verdict\texhausted\t" << run.exhausted->cycle << "\t" << run.exhausted->phase
               << "\t" << run.exhausted->stage << "\n";
        std::cerr << "peq: " << StageBudgetExhausted(run.exhausted->cycle, run.exhausted->phase,
                                                       run.exhausted->stage, run.exhausted->detail)
                                        .what()
                  << "\n";
        return 2;
    }
    report << "verdict\t" << (v.ok() ? "ok" : "invalid") << "\n";
    return v.ok() ? 0 : 1;
}

int cmd_verify(const Options& o, const std::string& path) {
    std::string text = read_file(path);
    con::VerifyReport rep = con::verify_trace(text);
    Output out;
    out.text << "# peq-report v1 verify\n";
    out.text << "trace\t" << path << "\n";
    if (rep.divergence) {
        const auto& d = *rep.divergence;
        out.text << "replay\tdiverges\tline\t" << d.line << "\toffset\t" << d.offset_trace << "\t"
                 << d.offset_replay << "\n";
        out.text << "expected\t" << d.expected << "\n";
        out.text << "found\t" << d.found << "\n";
    } else {
        out.text << "replay\tok\n";
    }
    for (const auto& c : rep.validation.checks)
        out.text << "check\t" << c.name << "\t" << (c.ok ? "ok" : "fail") << "\t" << c.detail << "\n";
    out.text << "verdict\t" << (rep.ok() ? "ok" : "failed") << "\n";
    out.flush_to(o.out_path);
    return rep.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Punctual equivalence relations: sets, reductions, lattice operations and constructions"};
    app.require_subcommand(1);
    Options o;
    std::string which;
    std::string trace_path;

    auto common = [&](CLI::App* c) {
        c->add_option("--horizon", o.horizon, "Largest stage or index examined");
        c->add_option("--convention", o.convention, "Zero-count convention: index or steps")
            ->check(CLI::IsMember({"index", "steps"}));
        c->add_option("--out", o.out_path, "Write the main output here instead of stdout");
    };
    auto sets_arg = [&](CLI::App* c, const char* help) { c->add_option("sets", o.sets, help); };

    auto* profile = app.add_subcommand("profile", "Zero-count profile in both conventions");
    common(profile);
    sets_arg(profile, "Descriptor");

    auto* lattice = app.add_subcommand("lattice", "Join, meet, distributivity and equilibrium points");
    lattice->require_subcommand(1);
    for (const char* op : {"join", "meet", "distrib", "equilibrium"}) {
        auto* c = lattice->add_subcommand(op);
        common(c);
        sets_arg(c, "Descriptors");
        c->callback([&which, op] { which = std::string("lattice ") + op; });
    }

    auto* reduce = app.add_subcommand("reduce", "Reduction checks and growth-bound synthesis");
    reduce->require_subcommand(1);
    for (const char* op : {"check", "synth-h", "synth-g", "surjectivize", "respect"}) {
        auto* c = reduce->add_subcommand(op);
        common(c);
        sets_arg(c, "X and Y");
        c->add_option("--map", o.map_term, "Function as a term");
        c->add_option("--witness", o.witness_path, "Function as a witness table file");
        c->callback([&which, op] { which = std::string("reduce ") + op; });
    }

    auto* diamond = app.add_subcommand("diamond", "Diamond-property evidence and witnesses");
    diamond->require_subcommand(1);
    for (const char* op : {"evidence-q", "evidence-r", "canonical", "restrict"}) {
        auto* c = diamond->add_subcommand(op);
        common(c);
        sets_arg(c, "Descriptors");
        c->add_option("--map", o.map_term, "q or r as a term (default identity)");
        c->add_option("--p", o.p_term, "p as a term (canonical)");
        c->add_option("--q", o.q_term, "q as a term (canonical)");
        c->add_option("--k", o.k, "Evidence threshold");
        c->add_option("--n0", o.n0, "First n for r-evidence");
        c->add_option("--n1", o.n1, "Last n for r-evidence");
        c->add_flag("--relaxed", o.relaxed, "Accept ZOP_Y[t] <= ZOP_X[q(t)]");
        c->callback([&which, op] { which = std::string("diamond ") + op; });
    }

    auto* slow = app.add_subcommand("slow", "Slow sets and slowness certificates");
    slow->require_subcommand(1);
    for (const char* op : {"make", "check"}) {
        auto* c = slow->add_subcommand(op);
        common(c);
        sets_arg(c, "Descriptor (check)");
        c->add_option("--family", o.family_path, "Family file");
        c->add_option("--window", o.window, "Certified window (make)");
        c->add_option("--n0", o.n0, "First n checked");
        c->add_option("--n1", o.n1, "Last n checked");
        c->callback([&which, op] { which = std::string("slow ") + op; });
    }

    auto* construct = app.add_subcommand("construct", "Run a construction and write its trace");
    construct->require_subcommand(1);
    for (const char* op : {"immune", "incomparable", "antichain", "dense", "dense-incomparable",
                           "join-split", "meet-split", "diamond", "separator"}) {
        auto* c = construct->add_subcommand(op);
        c->add_option("--out", o.out_path, "Trace file (stdout if absent; the report then goes to stderr)");
        c->add_option("--family", o.family_path, "Family file");
        c->add_option("--policy", o.policy, "once or round-robin")
            ->check(CLI::IsMember({"once", "round-robin"}));
        c->add_option("--max-stages", o.max_stages, "Stage budget");
        c->add_option("--cycle-budget", o.cycle_budget, "Stages allowed per cycle (0: no limit)");
        c->add_option("--k", o.k, "Diamond: equilibrium points required");
        c->add_option("--count", o.count, "Antichain size");
        for (const char* role : {"x", "y", "z", "t", "r"})
            c->add_option(std::string("--") + role, o.roles[role], "Input set by role");
        sets_arg(c, "Input sets in role order");
        c->callback([&which, op] { which = std::string("construct ") + op; });
    }

    auto* verify = app.add_subcommand("verify", "Replay a trace and re-run its checks");
    verify->add_option("trace", trace_path, "Trace file")->required();
    verify->add_option("--out", o.out_path, "Write the report here");

    profile->callback([&] { which = "profile"; });
    verify->callback([&] { which = "verify"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        auto space = which.find(' ');
        std::string group = which.substr(0, space);
        std::string op = space == std::string::npos ? "" : which.substr(space + 1);
        if (group == "profile") return cmd_profile(o);
        if (group == "lattice") {
            if (op == "join" || op == "meet") return cmd_lattice_binary(o, op == "join");
            if (op == "distrib") return cmd_distrib(o);
            return cmd_equilibrium(o);
        }
        if (group == "reduce") return cmd_reduce(o, op);
        if (group == "diamond") return cmd_diamond(o, op);
        if (group == "slow") return cmd_slow(o, op);
        if (group == "construct") return cmd_construct(o, op);
        if (group == "verify") return cmd_verify(o, trace_path);
        std::cerr << app.help();
        return 1;
    } catch (const StageBudgetExhausted& e) {
        std::cerr << "peq: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "peq: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "peq: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "peq: " << e.what() << "\n";
        return 1;
    }
}
