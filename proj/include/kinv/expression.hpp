#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "kinv/common.hpp"

namespace kinv {

/// Parse failure; offset is the 0-based position in the input string.
struct ExprParseError : ConfigError {
    ExprParseError(const std::string& msg, size_t offset)
        : ConfigError(msg + " at offset " + std::to_string(offset)), offset(offset) {}
    size_t offset;
};

/// Evaluation failure: unbound variable or a domain error (division by
/// zero, sqrt of a negative number).
struct ExprEvalError : ConfigError {
    using ConfigError::ConfigError;
};

/// Variable bindings for evaluation. Unset fields count as unbound.
struct Bindings {
    std::optional<double> x, v, t, vp;

    static Bindings xvt(double x, double v, double t) {
        Bindings b;
        b.x = x;
        b.v = v;
        b.t = t;
        return b;
    }
    static Bindings xv(double x, double v) {
        Bindings b;
        b.x = x;
        b.v = v;
        return b;
    }
};

struct ExprNode;
using ExprNodePtr = std::shared_ptr<const ExprNode>;

enum class ExprVar { x, v, t, vp };
enum class ExprFunc { neg, sin, cos, exp, sqrt, abs };

struct ExprNode {
    enum class Kind { constant, variable, unary, binary };
    Kind kind;
    double value = 0.0;  // constant
    ExprVar var{};       // variable
    ExprFunc func{};     // unary
    char op = 0;         // binary: + - * / ^
    ExprNodePtr lhs, rhs;
};

/// Immutable arithmetic expression over the variables {x, v, t, vp} with
/// the constant pi, operators + - * / ^ (usual precedence, ^ binds
/// right), unary minus, and the functions sin, cos, exp, sqrt, abs.
class Expression {
public:
    Expression() = default; // constant 0

    static Expression parse(std::string_view text);
    static Expression constant(double value);
    static Expression variable(ExprVar var);
    static Expression unary(ExprFunc func, Expression arg);
    static Expression binary(char op, Expression lhs, Expression rhs);

    double eval(const Bindings& b) const;

    /// Minimal-parenthesis rendering; parse(str()) reproduces the AST.
    std::string str() const;

    const ExprNodePtr& root() const { return root_; }

    /// True when the tree is the literal constant 0 (used to skip
    /// materializing identically-zero coefficient fields).
    bool is_zero_constant() const;

    bool same_as(const Expression& other) const;

private:
    explicit Expression(ExprNodePtr root) : root_(std::move(root)) {}
    ExprNodePtr root_;
};

} // namespace kinv
