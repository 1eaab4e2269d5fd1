#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>

namespace dq {

struct ExprError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Small arithmetic expression over (x1..xd, t): +, -, *, /, ^, parentheses,
/// numeric literals, pi, and the functions sin, cos, exp, abs, sqrt,
/// min(a,b), max(a,b). Enough for the coefficient presets without a
/// scripting dependency.
class Expression {
public:
    /// Parses source; d bounds the allowed state variables. Parse errors
    /// carry the character position.
    static Expression parse(const std::string& source, int d);

    double eval(std::span<const double> x, double t) const;
    const std::string& source() const { return source_; }

    Expression() = default;

    struct Node;  // defined in expr.cpp

private:
    std::shared_ptr<const Node> root_;
    std::string source_;
};

}  // namespace dq
