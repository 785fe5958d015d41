#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace peq {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parse failures carry the byte offset of the offending token.
struct SyntaxError : Error {
    std::size_t position;
    SyntaxError(const std::string& what, std::size_t pos)
        : Error("syntax error at " + std::to_string(pos) + ": " + what), position(pos) {}
};

struct ArityError : Error {
    std::size_t position;
    ArityError(const std::string& what, std::size_t pos)
        : Error("arity error at " + std::to_string(pos) + ": " + what), position(pos) {}
};

struct PunctualityViolation : Error { using Error::Error; };
struct CeilingExceeded : Error { using Error::Error; };
struct NotEquivalence : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct NotAReduction : Error { using Error::Error; };
struct WitnessBoundViolated : Error { using Error::Error; };
struct BudgetExceeded : Error { using Error::Error; };
struct NotCertified : Error { using Error::Error; };
struct CaseUndetermined : Error { using Error::Error; };
struct PreconditionFailed : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

struct StageBudgetExhausted : Error {
    std::string cycle;
    std::string phase;
    std::uint64_t stage;
    StageBudgetExhausted(std::string cycle_id, std::string phase_name, std::uint64_t at_stage,
                         const std::string& detail = {})
        : Error("stage budget exhausted at stage " + std::to_string(at_stage) + " in cycle " +
                cycle_id + " (" + phase_name + " phase)" + (detail.empty() ? "" : ": " + detail)),
          cycle(std::move(cycle_id)),
          phase(std::move(phase_name)),
          stage(at_stage) {}
};

}  // namespace peq
