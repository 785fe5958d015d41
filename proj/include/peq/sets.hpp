#pragma once

// Coinfinite primitive recursive sets as memoized bit generators, their
// zero-count profiles, and the string and set calculus built on them.

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "peq/errors.hpp"
#include "peq/pr_lang.hpp"

namespace peq::sets {

using u64 = std::uint64_t;
using Bits = std::vector<std::uint8_t>;

enum class Kind { Builtin, Term, Trace, Derived };
enum class Convention { Index, Steps };

const char* kind_name(Kind k);
const char* convention_name(Convention c);
Convention parse_convention(std::string_view text);

Bits bits_from_string(std::string_view text);
std::string bits_to_string(const Bits& bits);
u64 count_zeros(const Bits& bits);

// Shared machinery for every descriptor. Bits are produced in increasing order
// and cached behind a mutex, so concurrent readers agree.
class SetSource {
public:
    virtual ~SetSource() = default;

    virtual std::string dsl() const = 0;
    virtual Kind kind() const = 0;

    virtual bool bit(u64 n);
    virtual u64 zeros_upto(u64 s);
    virtual u64 zeros_by_steps(u64 s);
    virtual u64 bit_cost(u64 n);
    // Position of the (n+1)-st zero, or nothing if it lies beyond the ceiling.
    virtual std::optional<u64> nth_zero(u64 n, u64 ceiling);

    std::vector<std::string> notes;

protected:
    virtual std::uint8_t compute_bit(u64 n) = 0;
    // Cost of the bit just computed; called right after compute_bit(n).
    virtual u64 compute_cost(u64 /*n*/) { return 1; }

private:
    std::mutex mu_;
    Bits bits_;
    std::vector<u64> zeros_;
    std::vector<u64> cost_prefix_;
    void ensure(u64 n);
};

// Descriptors whose bits follow from a formula rather than a cached scan.
class ClosedSource : public SetSource {
public:
    bool bit(u64 n) override;
    u64 zeros_by_steps(u64 s) override;
    u64 bit_cost(u64) override { return 1; }

protected:
    std::uint8_t compute_bit(u64 n) override { return bit(n) ? 1 : 0; }
};

class SetDescriptor {
public:
    SetDescriptor() = default;
    explicit SetDescriptor(std::shared_ptr<SetSource> source) : src_(std::move(source)) {}

    bool valid() const { return static_cast<bool>(src_); }
    bool bit(u64 n) const { return src_->bit(n); }
    Bits prefix(u64 s) const;
    u64 zeros_by_index(u64 s) const { return src_->zeros_upto(s); }
    u64 zeros_by_steps(u64 s) const { return src_->zeros_by_steps(s); }
    u64 zeros(u64 s, Convention c) const {
        return c == Convention::Index ? zeros_by_index(s) : zeros_by_steps(s);
    }
    u64 bit_cost(u64 n) const { return src_->bit_cost(n); }
    // Zero counts for s = 0..horizon.
    std::vector<u64> profile(u64 horizon, Convention c = Convention::Index) const;
    u64 principal_zero(u64 n, u64 ceiling) const;
    std::string dsl() const { return src_->dsl(); }
    Kind kind() const { return src_->kind(); }
    const std::vector<std::string>& notes() const { return src_->notes; }
    const std::shared_ptr<SetSource>& source() const { return src_; }

private:
    std::shared_ptr<SetSource> src_;
};

SetDescriptor evens();
SetDescriptor mod_set(u64 k);
SetDescriptor singleton_zero();
// Characteristic function t (nonzero means member) with declared step bound b.
SetDescriptor term_set(const pr::TermPtr& t, const pr::TermPtr& bound);
// A set described by an explicit finite prefix followed by a tail set.
SetDescriptor with_prefix(const Bits& head, const SetDescriptor& tail);

SetDescriptor force_zero_member(const SetDescriptor& x);
SetDescriptor set_join(const SetDescriptor& x, const SetDescriptor& y);
SetDescriptor set_meet(const SetDescriptor& x, const SetDescriptor& y);
SetDescriptor drop_least_zero(const SetDescriptor& x, u64 ceiling = 1'000'000);

u64 zeros_by_index(const SetDescriptor& x, u64 s);
u64 zeros_by_steps(const SetDescriptor& x, u64 s);
u64 principal_zero(const SetDescriptor& x, u64 n, u64 ceiling);

Bits string_join(const Bits& sigma, const Bits& tau);
Bits string_meet(const Bits& sigma, const Bits& tau);

// A binary relation given as a predicate. For R_X views the carrier is kept so
// callers can take set-based shortcuts.
struct Relation {
    std::string name;
    std::function<bool(u64, u64)> related;
    std::optional<SetDescriptor> carrier;
};

Relation equiv_view(const SetDescriptor& x);
Relation identity_relation();

// Sampled equivalence check on [0, bound]; transitivity on a smaller window.
void check_equivalence(const Relation& r, u64 bound);
Bits principal_transversal(const Relation& r, u64 bound);

struct NormalForm {
    SetDescriptor carrier;   // complement of the transversal
    std::vector<u64> to_carrier;    // f : R -> R_X, f(x) = least y with y R x
    std::vector<u64> from_carrier;  // g : R_X -> R
};
NormalForm normal_form(const Relation& r, u64 horizon);

// Parses the one-line descriptor language; see README for the grammar.
SetDescriptor parse_descriptor(std::string_view text);

}  // namespace peq::sets
