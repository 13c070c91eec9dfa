#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stochorder {

/// Raised when an expression is evaluated outside its domain
/// (division by zero, log of a non-positive number, overflow).
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by `Expr::parse`; `offset()` is the byte offset of the offending token.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t offset);
    [[nodiscard]] std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

enum class ExprOp {
    constant,
    variable,
    add,
    sub,
    mul,
    div,
    neg,
    pow,
    exp,
    log,
    min,
    max,
    // select(p, q, u, v) = u if p <= q else v. Produced only by differentiating
    // min/max; marks the expression as non-smooth.
    select_le,
};

/// Immutable expression tree over real constants and variables x1..xd.
///
/// Every constructor goes through the canonical simplifier (constant folding,
/// additive/multiplicative identities, power flattening), so two trees built
/// from equal inputs compare structurally equal.
class Expr {
public:
    Expr();  // constant zero

    static Expr constant(double value);
    static Expr variable(int index);

    /// Parses `text`. Variables are `x1`..`xd`; when `dim == 1` the bare name
    /// `x` is accepted as well. Functions: exp, log, min, max. Powers take an
    /// integer exponent only.
    static Expr parse(std::string_view text, int dim);

    [[nodiscard]] ExprOp op() const noexcept;
    [[nodiscard]] double value() const noexcept;      // constant payload
    [[nodiscard]] int index() const noexcept;         // variable index or power exponent
    [[nodiscard]] std::span<const Expr> args() const noexcept;

    [[nodiscard]] bool is_constant() const noexcept { return op() == ExprOp::constant; }
    [[nodiscard]] bool is_zero() const noexcept { return is_constant() && value() == 0.0; }
    [[nodiscard]] bool is_one() const noexcept { return is_constant() && value() == 1.0; }
    /// False when the tree contains a piecewise node from differentiating min/max.
    [[nodiscard]] bool is_smooth() const;
    /// Largest variable index used plus one (0 for constants).
    [[nodiscard]] int arity() const;

    [[nodiscard]] double evaluate(std::span<const double> point) const;
    [[nodiscard]] double evaluate(double x) const;

    [[nodiscard]] std::string to_string() const;

    friend bool operator==(const Expr& lhs, const Expr& rhs);

    struct Node;

private:
    explicit Expr(std::shared_ptr<const Node> node);
    static Expr make(ExprOp op, double value, int index, std::vector<Expr> args);

    std::shared_ptr<const Node> node_;

    friend Expr operator+(const Expr&, const Expr&);
    friend Expr operator-(const Expr&, const Expr&);
    friend Expr operator*(const Expr&, const Expr&);
    friend Expr operator/(const Expr&, const Expr&);
    friend Expr operator-(const Expr&);
    friend Expr pow(const Expr&, int);
    friend Expr exp(const Expr&);
    friend Expr log(const Expr&);
    friend Expr min(const Expr&, const Expr&);
    friend Expr max(const Expr&, const Expr&);
    friend Expr select_le(const Expr&, const Expr&, const Expr&, const Expr&);
};

Expr operator+(const Expr& lhs, const Expr& rhs);
Expr operator-(const Expr& lhs, const Expr& rhs);
Expr operator*(const Expr& lhs, const Expr& rhs);
Expr operator/(const Expr& lhs, const Expr& rhs);
Expr operator-(const Expr& operand);
Expr pow(const Expr& base, int exponent);
Expr exp(const Expr& operand);
Expr log(const Expr& operand);
Expr min(const Expr& lhs, const Expr& rhs);
Expr max(const Expr& lhs, const Expr& rhs);
Expr select_le(const Expr& p, const Expr& q, const Expr& if_le, const Expr& otherwise);

inline Expr operator+(double c, const Expr& e) { return Expr::constant(c) + e; }
inline Expr operator*(double c, const Expr& e) { return Expr::constant(c) * e; }
inline Expr operator-(double c, const Expr& e) { return Expr::constant(c) - e; }

/// Symbolic partial derivative with respect to variable `var` (0-based).
Expr differentiate(const Expr& e, int var);
/// Repeated differentiation: `orders[i]` derivatives with respect to variable i.
Expr differentiate_multi(const Expr& e, std::span<const int> orders);

/// Exact zero test. Literal zero after simplification, or, for polynomial
/// trees, a vanishing normal form computed in exact rational arithmetic.
bool is_identically_zero(const Expr& e);

}  // namespace stochorder
