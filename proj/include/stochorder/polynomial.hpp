#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <map>
#include <optional>
#include <vector>

#include "stochorder/expr.hpp"

namespace stochorder {

using Rational = boost::multiprecision::cpp_rational;

/// Multivariate polynomial with exact rational coefficients, keyed by the
/// exponent vector of each monomial. Zero coefficients are never stored.
class Polynomial {
public:
    using Exponents = std::vector<int>;

    Polynomial() = default;
    static Polynomial constant(const Rational& c);
    static Polynomial variable(int index);

    [[nodiscard]] bool is_zero() const noexcept { return terms_.empty(); }
    [[nodiscard]] const std::map<Exponents, Rational>& terms() const noexcept { return terms_; }

    Polynomial& operator+=(const Polynomial& other);
    friend Polynomial operator+(Polynomial lhs, const Polynomial& rhs);
    friend Polynomial operator-(Polynomial lhs, const Polynomial& rhs);
    friend Polynomial operator*(const Polynomial& lhs, const Polynomial& rhs);
    friend Polynomial operator-(Polynomial p);
    friend bool operator==(const Polynomial&, const Polynomial&) = default;

    [[nodiscard]] std::optional<Rational> as_constant() const;

private:
    void add_term(Exponents exps, const Rational& c);
    std::map<Exponents, Rational> terms_;
};

/// Normal form of a polynomial expression; empty when the tree contains
/// exp/log/min/max, a negative power, or division by a non-constant.
std::optional<Polynomial> to_polynomial(const Expr& e);

}  // namespace stochorder
