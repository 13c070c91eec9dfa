#include "stochorder/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <string>
#include <utility>

#include "stochorder/polynomial.hpp"

namespace stochorder {

struct Expr::Node {
    ExprOp op;
    double value;
    int index;
    std::vector<Expr> args;
};

ParseError::ParseError(const std::string& message, std::size_t offset)
    : std::runtime_error(message + " at offset " + std::to_string(offset)), offset_(offset) {}

Expr::Expr() : Expr(constant(0.0)) {}

Expr::Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Expr Expr::make(ExprOp op, double value, int index, std::vector<Expr> args) {
    return Expr(std::make_shared<const Node>(Node{op, value, index, std::move(args)}));
}

Expr Expr::constant(double value) {
    if (!std::isfinite(value)) throw DomainError("non-finite constant");
    // Normalise negative zero so structural equality is not fooled by sign bits.
    return make(ExprOp::constant, value == 0.0 ? 0.0 : value, 0, {});
}

Expr Expr::variable(int index) {
    if (index < 0) throw std::invalid_argument("negative variable index");
    return make(ExprOp::variable, 0.0, index, {});
}

ExprOp Expr::op() const noexcept { return node_->op; }
double Expr::value() const noexcept { return node_->value; }
int Expr::index() const noexcept { return node_->index; }
std::span<const Expr> Expr::args() const noexcept { return node_->args; }

bool operator==(const Expr& lhs, const Expr& rhs) {
    if (lhs.node_ == rhs.node_) return true;
    const auto& a = *lhs.node_;
    const auto& b = *rhs.node_;
    if (a.op != b.op || a.args.size() != b.args.size()) return false;
    if (a.op == ExprOp::constant && a.value != b.value) return false;
    if ((a.op == ExprOp::variable || a.op == ExprOp::pow) && a.index != b.index) return false;
    for (std::size_t i = 0; i < a.args.size(); ++i) {
        if (!(a.args[i] == b.args[i])) return false;
    }
    return true;
}

bool Expr::is_smooth() const {
    if (op() == ExprOp::select_le || op() == ExprOp::min || op() == ExprOp::max) return false;
    return std::all_of(args().begin(), args().end(), [](const Expr& a) { return a.is_smooth(); });
}

int Expr::arity() const {
    int n = op() == ExprOp::variable ? index() + 1 : 0;
    for (const auto& a : args()) n = std::max(n, a.arity());
    return n;
}

// ---------------------------------------------------------------------------
// Simplifying constructors

namespace {

double checked(double v, const char* what) {
    if (!std::isfinite(v)) throw DomainError(std::string("non-finite result in ") + what);
    return v;
}

double int_power(double base, int exponent) {
    if (exponent < 0) {
        if (base == 0.0) throw DomainError("zero raised to a negative power");
        return checked(1.0 / int_power(base, -exponent), "power");
    }
    double result = 1.0;
    double factor = base;
    for (unsigned k = static_cast<unsigned>(exponent); k != 0; k >>= 1U) {
        if (k & 1U) result *= factor;
        factor *= factor;
    }
    return checked(result, "power");
}

}  // namespace

Expr operator+(const Expr& lhs, const Expr& rhs) {
    if (lhs.is_constant() && rhs.is_constant()) return Expr::constant(lhs.value() + rhs.value());
    if (lhs.is_zero()) return rhs;
    if (rhs.is_zero()) return lhs;
    return Expr::make(ExprOp::add, 0.0, 0, {lhs, rhs});
}

Expr operator-(const Expr& lhs, const Expr& rhs) {
    if (lhs.is_constant() && rhs.is_constant()) return Expr::constant(lhs.value() - rhs.value());
    if (rhs.is_zero()) return lhs;
    if (lhs.is_zero()) return -rhs;
    return Expr::make(ExprOp::sub, 0.0, 0, {lhs, rhs});
}

Expr operator*(const Expr& lhs, const Expr& rhs) {
    if (lhs.is_constant() && rhs.is_constant()) return Expr::constant(lhs.value() * rhs.value());
    if (lhs.is_zero() || rhs.is_zero()) return Expr::constant(0.0);
    if (lhs.is_one()) return rhs;
    if (rhs.is_one()) return lhs;
    return Expr::make(ExprOp::mul, 0.0, 0, {lhs, rhs});
}

Expr operator/(const Expr& lhs, const Expr& rhs) {
    if (lhs.is_constant() && rhs.is_constant() && rhs.value() != 0.0) {
        return Expr::constant(lhs.value() / rhs.value());
    }
    if (lhs.is_zero() && !rhs.is_zero()) return Expr::constant(0.0);
    if (rhs.is_one()) return lhs;
    return Expr::make(ExprOp::div, 0.0, 0, {lhs, rhs});
}

Expr operator-(const Expr& operand) {
    if (operand.is_constant()) return Expr::constant(-operand.value());
    if (operand.op() == ExprOp::neg) return operand.args()[0];
    return Expr::make(ExprOp::neg, 0.0, 0, {operand});
}

Expr pow(const Expr& base, int exponent) {
    if (exponent == 0) return Expr::constant(1.0);
    if (exponent == 1) return base;
    if (base.is_constant() && !(base.value() == 0.0 && exponent < 0)) {
        return Expr::constant(int_power(base.value(), exponent));
    }
    if (base.op() == ExprOp::pow) return pow(base.args()[0], base.index() * exponent);
    return Expr::make(ExprOp::pow, 0.0, exponent, {base});
}

Expr exp(const Expr& operand) {
    if (operand.is_constant()) return Expr::constant(checked(std::exp(operand.value()), "exp"));
    return Expr::make(ExprOp::exp, 0.0, 0, {operand});
}

Expr log(const Expr& operand) {
    if (operand.is_constant() && operand.value() > 0.0) {
        return Expr::constant(std::log(operand.value()));
    }
    return Expr::make(ExprOp::log, 0.0, 0, {operand});
}

Expr min(const Expr& lhs, const Expr& rhs) {
    if (lhs.is_constant() && rhs.is_constant()) return Expr::constant(std::min(lhs.value(), rhs.value()));
    if (lhs == rhs) return lhs;
    return Expr::make(ExprOp::min, 0.0, 0, {lhs, rhs});
}

Expr max(const Expr& lhs, const Expr& rhs) {
    if (lhs.is_constant() && rhs.is_constant()) return Expr::constant(std::max(lhs.value(), rhs.value()));
    if (lhs == rhs) return lhs;
    return Expr::make(ExprOp::max, 0.0, 0, {lhs, rhs});
}

Expr select_le(const Expr& p, const Expr& q, const Expr& if_le, const Expr& otherwise) {
    if (p.is_constant() && q.is_constant()) return p.value() <= q.value() ? if_le : otherwise;
    if (if_le == otherwise) return if_le;
    return Expr::make(ExprOp::select_le, 0.0, 0, {p, q, if_le, otherwise});
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

double eval_node(const Expr& e, std::span<const double> point) {
    auto args = e.args();
    auto at = [&](std::size_t i) { return eval_node(args[i], point); };
    switch (e.op()) {
        case ExprOp::constant: return e.value();
        case ExprOp::variable: return point[static_cast<std::size_t>(e.index())];
        case ExprOp::add: return checked(at(0) + at(1), "addition");
        case ExprOp::sub: return checked(at(0) - at(1), "subtraction");
        case ExprOp::mul: return checked(at(0) * at(1), "multiplication");
        case ExprOp::div: {
            double den = at(1);
            if (den == 0.0) throw DomainError("division by zero");
            return checked(at(0) / den, "division");
        }
        case ExprOp::neg: return -at(0);
        case ExprOp::pow: return int_power(at(0), e.index());
        case ExprOp::exp: return checked(std::exp(at(0)), "exp");
        case ExprOp::log: {
            double v = at(0);
            if (!(v > 0.0)) throw DomainError("log of a non-positive number");
            return std::log(v);
        }
        case ExprOp::min: return std::min(at(0), at(1));
        case ExprOp::max: return std::max(at(0), at(1));
        case ExprOp::select_le: return at(0) <= at(1) ? at(2) : at(3);
    }
    throw std::logic_error("unknown expression node");
}

}  // namespace

double Expr::evaluate(std::span<const double> point) const {
    if (static_cast<int>(point.size()) < arity()) {
        throw std::invalid_argument("evaluation point has dimension " + std::to_string(point.size()) +
                                    " but the expression uses x" + std::to_string(arity()));
    }
    return eval_node(*this, point);
}

double Expr::evaluate(double x) const {
    return evaluate(std::span<const double>(&x, 1));
}

// ---------------------------------------------------------------------------
// Differentiation

Expr differentiate(const Expr& e, int var) {
    auto args = e.args();
    auto d = [&](std::size_t i) { return differentiate(args[i], var); };
    switch (e.op()) {
        case ExprOp::constant: return Expr::constant(0.0);
        case ExprOp::variable: return Expr::constant(e.index() == var ? 1.0 : 0.0);
        case ExprOp::add: return d(0) + d(1);
        case ExprOp::sub: return d(0) - d(1);
        case ExprOp::mul: return d(0) * args[1] + args[0] * d(1);
        case ExprOp::div: return (d(0) * args[1] - args[0] * d(1)) / pow(args[1], 2);
        case ExprOp::neg: return -d(0);
        case ExprOp::pow: {
            int k = e.index();
            return Expr::constant(k) * pow(args[0], k - 1) * d(0);
        }
        case ExprOp::exp: return e * d(0);
        case ExprOp::log: return d(0) / args[0];
        case ExprOp::min: return select_le(args[0], args[1], d(0), d(1));
        case ExprOp::max: return select_le(args[0], args[1], d(1), d(0));
        case ExprOp::select_le: return select_le(args[0], args[1], d(2), d(3));
    }
    throw std::logic_error("unknown expression node");
}

Expr differentiate_multi(const Expr& e, std::span<const int> orders) {
    Expr out = e;
    for (std::size_t var = 0; var < orders.size(); ++var) {
        for (int k = 0; k < orders[var]; ++k) out = differentiate(out, static_cast<int>(var));
    }
    return out;
}

bool is_identically_zero(const Expr& e) {
    if (e.is_zero()) return true;
    auto poly = to_polynomial(e);
    return poly && poly->is_zero();
}

// ---------------------------------------------------------------------------
// Printing

namespace {

// Binding strength used for parenthesisation; larger binds tighter.
int precedence(const Expr& e) {
    switch (e.op()) {
        case ExprOp::add:
        case ExprOp::sub: return 1;
        case ExprOp::mul:
        case ExprOp::div: return 2;
        case ExprOp::neg: return 3;
        case ExprOp::pow: return 4;
        case ExprOp::constant: return e.value() < 0.0 ? 3 : 5;
        default: return 5;
    }
}

std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void print(const Expr& e, std::string& out);

void print_child(const Expr& child, int min_prec, std::string& out) {
    bool parens = precedence(child) < min_prec;
    if (parens) out += '(';
    print(child, out);
    if (parens) out += ')';
}

void print_call(const char* name, std::span<const Expr> args, std::string& out) {
    out += name;
    out += '(';
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i != 0) out += ", ";
        print(args[i], out);
    }
    out += ')';
}

void print(const Expr& e, std::string& out) {
    auto args = e.args();
    auto binary = [&](const char* sym, int prec) {
        print_child(args[0], prec, out);
        out += sym;
        // Right operands of equal precedence are bracketed so that the
        // left-associative parser rebuilds the same tree.
        print_child(args[1], prec + 1, out);
    };
    switch (e.op()) {
        case ExprOp::constant: out += format_number(e.value()); return;
        case ExprOp::variable: out += "x" + std::to_string(e.index() + 1); return;
        case ExprOp::add: binary(" + ", 1); return;
        case ExprOp::sub: binary(" - ", 1); return;
        case ExprOp::mul: binary("*", 2); return;
        case ExprOp::div: binary("/", 2); return;
        case ExprOp::neg:
            out += '-';
            print_child(args[0], 4, out);
            return;
        case ExprOp::pow:
            print_child(args[0], 5, out);
            out += '^';
            if (e.index() < 0) out += "(" + std::to_string(e.index()) + ")";
            else out += std::to_string(e.index());
            return;
        case ExprOp::exp: print_call("exp", args, out); return;
        case ExprOp::log: print_call("log", args, out); return;
        case ExprOp::min: print_call("min", args, out); return;
        case ExprOp::max: print_call("max", args, out); return;
        case ExprOp::select_le: print_call("select_le", args, out); return;
    }
}

}  // namespace

std::string Expr::to_string() const {
    std::string out;
    print(*this, out);
    return out;
}

// ---------------------------------------------------------------------------
// Parsing (recursive descent)
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | '+' unary | power
//   power   := primary ('^' integer | '^' '(' ['-'] integer ')' | '^' '-' integer)?
//   primary := number | variable | name '(' expr (',' expr)* ')' | '(' expr ')'

namespace {

class Parser {
public:
    Parser(std::string_view text, int dim) : text_(text), dim_(dim) {}

    Expr parse_all() {
        Expr e = parse_expr();
        skip_space();
        if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError("syntax error: " + msg, pos_); }

    void skip_space() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
                                       text_[pos_] == '\r')) {
            ++pos_;
        }
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    Expr parse_expr() {
        Expr lhs = parse_term();
        while (true) {
            if (accept('+')) lhs = lhs + parse_term();
            else if (accept('-')) lhs = lhs - parse_term();
            else return lhs;
        }
    }

    Expr parse_term() {
        Expr lhs = parse_unary();
        while (true) {
            if (accept('*')) lhs = lhs * parse_unary();
            else if (accept('/')) lhs = lhs / parse_unary();
            else return lhs;
        }
    }

    Expr parse_unary() {
        if (accept('-')) return -parse_unary();
        if (accept('+')) return parse_unary();
        return parse_power();
    }

    Expr parse_power() {
        Expr base = parse_primary();
        if (!accept('^')) return base;
        bool bracketed = accept('(');
        bool negative = accept('-');
        skip_space();
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (start == pos_) fail("expected an integer exponent");
        int exponent = 0;
        auto res = std::from_chars(text_.data() + start, text_.data() + pos_, exponent);
        if (res.ec != std::errc()) {
            pos_ = start;
            fail("exponent out of range");
        }
        if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E')) {
            fail("only integer exponents are supported");
        }
        if (bracketed) expect(')');
        return pow(base, negative ? -exponent : exponent);
    }

    Expr parse_primary() {
        skip_space();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Expr inner = parse_expr();
            expect(')');
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
        fail("unexpected character '" + std::string(1, c) + "'");
    }

    Expr parse_number() {
        std::size_t start = pos_;
        double value = 0.0;
        auto res = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value);
        if (res.ec != std::errc()) fail("malformed number");
        pos_ = static_cast<std::size_t>(res.ptr - text_.data());
        if (!std::isfinite(value)) {
            pos_ = start;
            fail("number out of range");
        }
        return Expr::constant(value);
    }

    Expr parse_name() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        std::string_view name = text_.substr(start, pos_ - start);
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == '(') {
            ++pos_;
            std::vector<Expr> args{parse_expr()};
            while (accept(',')) args.push_back(parse_expr());
            expect(')');
            auto need = [&](std::size_t n) {
                if (args.size() != n) {
                    pos_ = start;
                    fail("function '" + std::string(name) + "' takes " + std::to_string(n) + " argument(s)");
                }
            };
            if (name == "exp") { need(1); return exp(args[0]); }
            if (name == "log") { need(1); return log(args[0]); }
            if (name == "min") { need(2); return min(args[0], args[1]); }
            if (name == "max") { need(2); return max(args[0], args[1]); }
            pos_ = start;
            fail("unknown function '" + std::string(name) + "'");
        }
        if (name == "x" && dim_ == 1) return Expr::variable(0);
        if (name.size() >= 2 && name[0] == 'x') {
            int idx = 0;
            auto res = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
            if (res.ec == std::errc() && res.ptr == name.data() + name.size() && idx >= 1) {
                if (idx > dim_) {
                    throw ParseError("unknown variable '" + std::string(name) + "' (dimension is " +
                                         std::to_string(dim_) + ")",
                                     start);
                }
                return Expr::variable(idx - 1);
            }
        }
        throw ParseError("unknown variable '" + std::string(name) + "'", start);
    }

    std::string_view text_;
    int dim_;
    std::size_t pos_ = 0;
};

}  // namespace

Expr Expr::parse(std::string_view text, int dim) {
    if (dim < 1) throw std::invalid_argument("dimension must be positive");
    return Parser(text, dim).parse_all();
}

}  // namespace stochorder
