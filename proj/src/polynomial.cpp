#include "stochorder/polynomial.hpp"

namespace stochorder {

namespace {

void trim(Polynomial::Exponents& exps) {
    while (!exps.empty() && exps.back() == 0) exps.pop_back();
}

}  // namespace

Polynomial Polynomial::constant(const Rational& c) {
    Polynomial p;
    p.add_term({}, c);
    return p;
}

Polynomial Polynomial::variable(int index) {
    Polynomial p;
    Exponents exps(static_cast<std::size_t>(index) + 1, 0);
    exps.back() = 1;
    p.add_term(std::move(exps), Rational(1));
    return p;
}

void Polynomial::add_term(Exponents exps, const Rational& c) {
    if (c == 0) return;
    trim(exps);
    auto [it, inserted] = terms_.try_emplace(std::move(exps), c);
    if (!inserted) {
        it->second += c;
        if (it->second == 0) terms_.erase(it);
    }
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
    for (const auto& [exps, c] : other.terms_) add_term(exps, c);
    return *this;
}

Polynomial operator+(Polynomial lhs, const Polynomial& rhs) {
    lhs += rhs;
    return lhs;
}

Polynomial operator-(Polynomial p) {
    for (auto& [exps, c] : p.terms_) c = -c;
    return p;
}

Polynomial operator-(Polynomial lhs, const Polynomial& rhs) {
    lhs += -rhs;
    return lhs;
}

Polynomial operator*(const Polynomial& lhs, const Polynomial& rhs) {
    Polynomial out;
    for (const auto& [ea, ca] : lhs.terms_) {
        for (const auto& [eb, cb] : rhs.terms_) {
            Polynomial::Exponents exps(std::max(ea.size(), eb.size()), 0);
            for (std::size_t i = 0; i < ea.size(); ++i) exps[i] += ea[i];
            for (std::size_t i = 0; i < eb.size(); ++i) exps[i] += eb[i];
            out.add_term(std::move(exps), ca * cb);
        }
    }
    return out;
}

std::optional<Rational> Polynomial::as_constant() const {
    if (terms_.empty()) return Rational(0);
    if (terms_.size() == 1 && terms_.begin()->first.empty()) return terms_.begin()->second;
    return std::nullopt;
}

std::optional<Polynomial> to_polynomial(const Expr& e) {
    auto args = e.args();
    auto unary = [&](std::size_t i) { return to_polynomial(args[i]); };
    switch (e.op()) {
        case ExprOp::constant:
            return Polynomial::constant(Rational(e.value()));
        case ExprOp::variable:
            return Polynomial::variable(e.index());
        case ExprOp::add:
        case ExprOp::sub:
        case ExprOp::mul: {
            auto lhs = unary(0);
            auto rhs = unary(1);
            if (!lhs || !rhs) return std::nullopt;
            if (e.op() == ExprOp::add) return *lhs + *rhs;
            if (e.op() == ExprOp::sub) return *lhs - *rhs;
            return *lhs * *rhs;
        }
        case ExprOp::div: {
            auto num = unary(0);
            auto den = unary(1);
            if (!num || !den) return std::nullopt;
            auto c = den->as_constant();
            if (!c || *c == 0) return std::nullopt;
            return *num * Polynomial::constant(Rational(1) / *c);
        }
        case ExprOp::neg: {
            auto inner = unary(0);
            if (!inner) return std::nullopt;
            return -*inner;
        }
        case ExprOp::pow: {
            if (e.index() < 0) return std::nullopt;
            auto base = unary(0);
            if (!base) return std::nullopt;
            Polynomial out = Polynomial::constant(Rational(1));
            for (int k = 0; k < e.index(); ++k) out = out * *base;
            return out;
        }
        default:
            return std::nullopt;
    }
}

}  // namespace stochorder
