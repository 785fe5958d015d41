// Recursive-descent parser for the one-line set descriptor language.

#include <cctype>
#include <fstream>
#include <sstream>

#include "peq/constructions.hpp"
#include "peq/lattice.hpp"
#include "peq/sets.hpp"

namespace peq::sets {

namespace {

class DescriptorParser {
public:
    explicit DescriptorParser(std::string_view text) : text_(text) {}

    SetDescriptor parse_all() {
        SetDescriptor d = descriptor();
        skip_space();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return d;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& what) const { throw SyntaxError(what, pos_); }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    bool peek(char c) {
        skip_space();
        return pos_ < text_.size() && text_[pos_] == c;
    }
    void expect(char c) {
        if (!peek(c)) fail(std::string("expected '") + c + "'");
        ++pos_;
    }
    bool accept(char c) {
        if (!peek(c)) return false;
        ++pos_;
        return true;
    }
    std::string word() {
        skip_space();
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '-'))
            ++pos_;
        if (start == pos_) fail("expected a keyword");
        return std::string(text_.substr(start, pos_ - start));
    }
    std::string peek_word() {
        std::size_t saved = pos_;
        skip_space();
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '-'))
            ++pos_;
        std::string w(text_.substr(start, pos_ - start));
        pos_ = saved;
        return w;
    }
    void keyword(const char* kw) {
        std::size_t at = pos_;
        if (word() != kw) {
            pos_ = at;
            skip_space();
            fail(std::string("expected '") + kw + "'");
        }
    }
    u64 number() {
        skip_space();
        std::size_t start = pos_;
        u64 v = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            u64 d = static_cast<u64>(text_[pos_] - '0');
            if (v > (~u64{0} - d) / 10) fail("number too large");
            v = v * 10 + d;
            ++pos_;
        }
        if (start == pos_) fail("expected a number");
        return v;
    }
    std::string quoted() {
        skip_space();
        if (pos_ >= text_.size() || text_[pos_] != '"') fail("expected a quoted string");
        std::size_t end = text_.find('"', pos_ + 1);
        if (end == std::string_view::npos) fail("unterminated string");
        std::string s(text_.substr(pos_ + 1, end - pos_ - 1));
        pos_ = end + 1;
        return s;
    }
    pr::TermPtr term_in(const std::string& text, std::size_t at) {
        try {
            return pr::parse_term(text);
        } catch (const SyntaxError& e) {
            throw SyntaxError(std::string("in term: ") + e.what(), at + 1 + e.position);
        }
    }
    std::vector<pr::Program> term_list(char close) {
        std::vector<pr::Program> out;
        if (peek(close)) return out;
        do {
            skip_space();
            std::size_t at = pos_;
            std::string t = quoted();
            out.emplace_back(term_in(t, at));
        } while (accept(','));
        return out;
    }

    SetDescriptor descriptor() {
        skip_space();
        std::size_t at = pos_;
        std::string kw = word();
        if (kw == "evens") return evens();
        if (kw == "id") return singleton_zero();
        if (kw == "mod") {
            u64 k = number();
            if (k < 2) fail("mod needs K >= 2");
            return mod_set(k);
        }
        if (kw == "term") {
            skip_space();
            std::size_t t_at = pos_;
            auto t = term_in(quoted(), t_at);
            keyword("bound");
            skip_space();
            std::size_t b_at = pos_;
            auto b = term_in(quoted(), b_at);
            return term_set(t, b);
        }
        if (kw == "prefix") {
            std::string bits = quoted();
            for (char c : bits)
                if (c != '0' && c != '1') fail("prefix bits must be 0 or 1");
            keyword("then");
            return with_prefix(bits_from_string(bits), descriptor());
        }
        if (kw == "join" || kw == "meet") {
            expect('(');
            SetDescriptor a = descriptor();
            expect(',');
            SetDescriptor b = descriptor();
            expect(')');
            return kw == "join" ? set_join(a, b) : set_meet(a, b);
        }
        if (kw == "drop") {
            expect('(');
            SetDescriptor a = descriptor();
            expect(')');
            return drop_least_zero(a);
        }
        if (kw == "slow") {
            expect('(');
            auto family = term_list(')');
            expect(')');
            keyword("window");
            return lat::make_slow_set(family, number());
        }
        if (kw == "nondiamond") {
            expect('(');
            SetDescriptor y = descriptor();
            expect(';');
            auto family = term_list(')');
            expect(')');
            keyword("window");
            return lat::make_nondiamond_below(y, family, number()).set;
        }
        if (kw == "trace") return trace_file();
        if (kw == "construct") return construct();
        pos_ = at;
        fail("unknown descriptor '" + kw + "'");
    }

    SetDescriptor trace_file() {
        std::string path = quoted();
        u64 output = 0;
        bool explicit_output = false;
        if (peek_word() == "output") {
            keyword("output");
            output = number();
            explicit_output = true;
        }
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot read trace file " + path);
        std::stringstream buf;
        buf << in.rdbuf();
        con::ParsedTrace t = con::parse_trace(buf.str());
        Bits bits = con::trace_output_bits(t, output);
        std::string dsl = "trace \"" + path + "\"";
        if (explicit_output) dsl += " output " + std::to_string(output);
        return con::trace_descriptor(std::move(bits), dsl);
    }

    SetDescriptor construct() {
        con::ConstructionSpec spec;
        skip_space();
        std::size_t at = pos_;
        std::string name = word();
        try {
            spec.kind = con::parse_construction(name);
        } catch (const PreconditionFailed&) {
            pos_ = at;
            fail("unknown construction '" + name + "'");
        }
        expect('[');
        if (!peek(']')) {
            do spec.inputs.push_back(descriptor());
            while (accept(';'));
        }
        expect(']');
        keyword("family");
        expect('[');
        spec.family.members = term_list(']');
        expect(']');
        keyword("policy");
        std::string policy = word();
        if (policy != "once" && policy != "round-robin") fail("policy must be once or round-robin");
        spec.family.policy = con::parse_policy(policy);
        keyword("stages");
        spec.max_stages = number();
        u64 output = 0;
        while (true) {
            std::string w = peek_word();
            if (w == "cycle-budget") {
                keyword("cycle-budget");
                spec.cycle_budget = number();
            } else if (w == "count") {
                keyword("count");
                spec.count = number();
            } else if (w == "k") {
                keyword("k");
                spec.k = number();
            } else if (w == "output") {
                keyword("output");
                output = number();
                break;
            } else {
                fail("expected 'output'");
            }
        }
        con::RunOutcome run = con::run_construction(spec);
        if (output >= run.outputs.size()) fail("construction has no output " + std::to_string(output));
        SetDescriptor d = run.descriptor(output);
        if (run.exhausted)
            d.source()->notes.push_back("construction exhausted in cycle " + run.exhausted->cycle +
                                        " at stage " + std::to_string(run.exhausted->stage));
        return d;
    }
};

}  // namespace

SetDescriptor parse_descriptor(std::string_view text) { return DescriptorParser(text).parse_all(); }

}  // namespace peq::sets
