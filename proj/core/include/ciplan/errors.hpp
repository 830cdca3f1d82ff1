#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ciplan {

/// Probabilities at or below this are treated as unreachable.
inline constexpr double kAdmissible = 1e-12;
/// Equality tolerance for values and distributions.
inline constexpr double kEqual = 1e-9;
/// Default cap on (FCS node x prescription) evaluations per solve.
inline constexpr long long kDefaultBudget = 10'000'000;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed model or compression document.
class ParseError : public Error {
public:
    ParseError(const std::string& locus, const std::string& what)
        : Error(locus + ": " + what), locus_(locus) {}
    const std::string& locus() const { return locus_; }

private:
    std::string locus_;
};

/// Well-formed document that violates one or more invariants.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

/// A solve would exceed its evaluation cap.
class BudgetExceeded : public Error {
public:
    BudgetExceeded(const std::string& locus, long long needed, long long budget);
    const std::string& locus() const { return locus_; }

private:
    std::string locus_;
};

/// Bad index, mismatched domain, inadmissible history, zero-probability branch.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Compression tables that are not recursive or not total.
class CompressionError : public Error {
public:
    using Error::Error;
};

} // namespace ciplan
