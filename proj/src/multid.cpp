#include "stochorder/multid.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace stochorder {

namespace {

constexpr double kZeroBand = 1e-12;

std::size_t idx(int i) { return static_cast<std::size_t>(i); }

int binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    int out = 1;
    for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
    return out;
}

/// Product of binomial coefficients over coordinates.
int multi_binomial(const MultiIndex& alpha, const MultiIndex& beta) {
    int out = 1;
    for (int i = 0; i < alpha.dim(); ++i) out *= binomial(alpha[i], beta[i]);
    return out;
}

Expr derivative(const Expr& e, const MultiIndex& orders) { return differentiate_multi(e, orders.entries()); }

/// All β ≤ α componentwise.
std::vector<MultiIndex> lower_set(const MultiIndex& alpha) {
    std::vector<MultiIndex> out{MultiIndex::zero(alpha.dim())};
    for (int axis = 0; axis < alpha.dim(); ++axis) {
        std::vector<MultiIndex> next;
        for (const auto& base : out) {
            for (int k = 0; k <= alpha[axis]; ++k) {
                auto entries = base.entries();
                entries[idx(axis)] = k;
                next.emplace_back(std::move(entries));
            }
        }
        out = std::move(next);
    }
    return out;
}

double radical_inverse(std::uint64_t n, std::uint64_t base) {
    double inv = 1.0 / static_cast<double>(base);
    double scale = inv;
    double out = 0.0;
    while (n > 0) {
        out += static_cast<double>(n % base) * scale;
        n /= base;
        scale *= inv;
    }
    return out;
}

std::uint64_t nth_prime(int k) {
    static const std::uint64_t primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
    if (k < 0 || k >= 16) throw std::invalid_argument("quasi-random sampling supports at most 16 dimensions");
    return primes[k];
}

struct SampleOutcome {
    double worst = 0.0;  // min for inequalities, max |v| for equalities
    std::vector<double> at;
    bool domain_error = false;
};

SampleOutcome sample(const Expr& e, const std::vector<std::vector<double>>& points, bool equality) {
    SampleOutcome out;
    out.worst = equality ? 0.0 : std::numeric_limits<double>::infinity();
    for (const auto& p : points) {
        double v = 0.0;
        try {
            v = e.evaluate(p);
        } catch (const DomainError&) {
            out.domain_error = true;
            out.at = p;
            return out;
        }
        if (equality ? std::abs(v) > std::abs(out.worst) : v < out.worst) {
            out.worst = v;
            out.at = p;
        }
    }
    if (!equality && points.empty()) out.worst = 0.0;
    return out;
}

/// Classifies one obligation and appends it to the ledger.
void settle(ObligationLedger& ledger, Obligation ob, const std::vector<std::vector<double>>& points,
            ZeroTestMode mode, const std::string& label) {
    bool equality = ob.relation == "== 0";
    if (mode == ZeroTestMode::symbolic_first && is_identically_zero(ob.expression)) {
        ob.status = ObligationStatus::proven_zero;
        ledger.report.add(label, Status::pass, 0.0, kZeroBand, {}, "symbolic zero");
        ledger.obligations.push_back(std::move(ob));
        return;
    }
    auto outcome = sample(ob.expression, points, equality);
    ob.worst_value = outcome.worst;
    ob.witness = outcome.at;
    if (outcome.domain_error) {
        ob.status = ObligationStatus::violated;
        ledger.report.add(label, Status::inconclusive, 0.0, kZeroBand, nlohmann::json{{"point", ob.witness}},
                          "expression undefined at a sample point");
    } else if (equality ? std::abs(outcome.worst) > kZeroBand : outcome.worst < -kZeroBand) {
        ob.status = ObligationStatus::violated;
        ledger.report.add(label, Status::fail, outcome.worst, kZeroBand, nlohmann::json{{"point", ob.witness}},
                          ob.expression.to_string());
    } else if (equality) {
        ob.status = ObligationStatus::numerically_zero_unproven;
        ledger.report.add(label, Status::pass, outcome.worst, kZeroBand, {}, "numerically zero (unproven)");
    } else {
        ob.status = ObligationStatus::sampled;
        ledger.report.add(label, Status::pass, outcome.worst, kZeroBand, {}, "sampled");
    }
    ledger.obligations.push_back(std::move(ob));
}

void check_dim(const SampleBox& box, int dim) {
    if (static_cast<int>(box.lower.size()) != dim || static_cast<int>(box.upper.size()) != dim)
        throw std::invalid_argument("sample box dimension does not match the coefficient field");
}

}  // namespace

Expr CoefficientField::g(const MultiIndex& gamma) const {
    if (gamma.dim() != dim) throw std::invalid_argument("multi-index dimension mismatch");
    int order = gamma.norm1();
    if (order == 0) return -c;
    std::vector<int> axes;
    for (int i = 0; i < dim; ++i)
        for (int k = 0; k < gamma[i]; ++k) axes.push_back(i);
    if (order == 1) return b[idx(axes[0])];
    if (order == 2) {
        const auto& entry = a[idx(axes[0])][idx(axes[1])];
        return axes[0] == axes[1] ? Expr::constant(0.5) * entry : entry;
    }
    return Expr{};
}

void CoefficientField::validate() const {
    if (dim <= 0) throw std::invalid_argument("dimension must be positive");
    if (a.size() != idx(dim) || b.size() != idx(dim))
        throw std::invalid_argument("coefficient field shape does not match its dimension");
    for (int i = 0; i < dim; ++i) {
        if (a[idx(i)].size() != idx(dim)) throw std::invalid_argument("diffusion matrix must be square");
        for (int j = 0; j < i; ++j) {
            if (!is_identically_zero(a[idx(i)][idx(j)] - a[idx(j)][idx(i)]))
                throw std::invalid_argument("diffusion matrix is not symmetric at (" + std::to_string(i + 1) + "," +
                                            std::to_string(j + 1) + ")");
        }
    }
    auto too_wide = [this](const Expr& e) { return e.arity() > dim; };
    if (too_wide(c)) throw std::invalid_argument("killing rate uses a variable beyond the dimension");
    for (int i = 0; i < dim; ++i) {
        if (too_wide(b[idx(i)])) throw std::invalid_argument("drift uses a variable beyond the dimension");
        for (int j = 0; j < dim; ++j)
            if (too_wide(a[idx(i)][idx(j)])) throw std::invalid_argument("diffusion uses a variable beyond the dimension");
    }
}

CoefficientField CoefficientField::from_g(int dim, const std::map<MultiIndex, Expr>& g) {
    CoefficientField out;
    out.dim = dim;
    out.a.assign(idx(dim), std::vector<Expr>(idx(dim)));
    out.b.assign(idx(dim), Expr{});
    for (const auto& [gamma, value] : g) {
        if (gamma.dim() != dim || !gamma.non_negative() || gamma.norm1() > 2)
            throw std::invalid_argument("coefficient index " + gamma.to_string() + " out of range");
        std::vector<int> axes;
        for (int i = 0; i < dim; ++i)
            for (int k = 0; k < gamma[i]; ++k) axes.push_back(i);
        switch (gamma.norm1()) {
        case 0: out.c = -value; break;
        case 1: out.b[idx(axes[0])] = value; break;
        default:
            if (axes[0] == axes[1]) {
                out.a[idx(axes[0])][idx(axes[0])] = Expr::constant(2.0) * value;
            } else {
                out.a[idx(axes[0])][idx(axes[1])] = value;
                out.a[idx(axes[1])][idx(axes[0])] = value;
            }
        }
    }
    return out;
}

SampleBox SampleBox::cube(int dim, double lo, double hi, int count) {
    return SampleBox{std::vector<double>(idx(dim), lo), std::vector<double>(idx(dim), hi), count};
}

std::vector<std::vector<double>> quasi_random_points(const SampleBox& box) {
    if (box.lower.size() != box.upper.size()) throw std::invalid_argument("sample box bounds differ in length");
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(std::max(box.count, 0)));
    for (int n = 1; n <= box.count; ++n) {
        std::vector<double> point(box.lower.size());
        for (std::size_t axis = 0; axis < point.size(); ++axis) {
            double u = radical_inverse(static_cast<std::uint64_t>(n), nth_prime(static_cast<int>(axis)));
            point[axis] = box.lower[axis] + u * (box.upper[axis] - box.lower[axis]);
        }
        out.push_back(std::move(point));
    }
    return out;
}

std::string to_string(ObligationStatus s) {
    switch (s) {
    case ObligationStatus::proven_zero: return "proven_zero";
    case ObligationStatus::sampled: return "sampled";
    case ObligationStatus::numerically_zero_unproven: return "numerically_zero_unproven";
    case ObligationStatus::violated: return "violated";
    }
    return "unknown";
}

nlohmann::json Obligation::to_json() const {
    return {{"alpha", alpha.entries()},
            {"beta", beta.entries()},
            {"gamma", gamma.entries()},
            {"relation", relation},
            {"expression", expression.to_string()},
            {"status", stochorder::to_string(status)},
            {"worst_value", worst_value},
            {"witness", witness}};
}

std::size_t ObligationLedger::violated() const {
    return static_cast<std::size_t>(std::count_if(obligations.begin(), obligations.end(), [](const Obligation& o) {
        return o.status == ObligationStatus::violated;
    }));
}

nlohmann::json ObligationLedger::to_json() const {
    auto out = report.to_json();
    out["obligations"] = nlohmann::json::array();
    for (const auto& ob : obligations) out["obligations"].push_back(ob.to_json());
    return out;
}

std::vector<MultiIndex> multi_indices_up_to(int dim, int max_norm) {
    std::vector<MultiIndex> out;
    for (const auto& m : lower_set(MultiIndex(std::vector<int>(idx(dim), 2)))) {
        if (m.norm1() <= max_norm) out.push_back(m);
    }
    std::sort(out.begin(), out.end(), [](const MultiIndex& x, const MultiIndex& y) {
        return x.norm1() != y.norm1() ? x.norm1() < y.norm1() : x < y;
    });
    return out;
}

ObligationLedger check_gammabed(const CoefficientField& coeffs, const IndexSet& index_set, const SampleBox& box,
                                ZeroTestMode mode) {
    coeffs.validate();
    if (index_set.dim() != coeffs.dim) throw std::invalid_argument("index set dimension does not match coefficients");
    if (coeffs.dim > 8) throw std::invalid_argument("obligation enumeration supports d <= 8");
    check_dim(box, coeffs.dim);
    auto points = quasi_random_points(box);
    ObligationLedger ledger;
    ledger.report = VerificationReport("gammabed");

    std::vector<MultiIndex> gammas;
    for (const auto& gamma : multi_indices_up_to(coeffs.dim, 2))
        if (gamma.norm1() >= 1) gammas.push_back(gamma);

    for (const auto& alpha : index_set.members()) {
        for (const auto& beta : lower_set(alpha)) {
            if (beta == alpha) continue;
            for (const auto& gamma : gammas) {
                if ((beta + gamma - alpha).non_negative()) continue;
                Obligation ob;
                ob.alpha = alpha;
                ob.beta = beta;
                ob.gamma = gamma;
                ob.relation = index_set.contains(beta + gamma) ? ">= 0" : "== 0";
                ob.expression = derivative(coeffs.g(gamma), alpha - beta);
                std::string label = "alpha=" + alpha.to_string() + " beta=" + beta.to_string() +
                                    " gamma=" + gamma.to_string() + " " + ob.relation;
                settle(ledger, std::move(ob), points, mode, label);
            }
        }
    }

    // Uniform ellipticity and boundedness can only be sampled.
    double kappa = std::numeric_limits<double>::infinity();
    std::vector<double> kappa_at;
    for (const auto& p : points) {
        Eigen::MatrixXd a(coeffs.dim, coeffs.dim);
        for (int i = 0; i < coeffs.dim; ++i)
            for (int j = 0; j < coeffs.dim; ++j) a(i, j) = coeffs.a[idx(i)][idx(j)].evaluate(p);
        double smallest = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues()(0);
        if (smallest < kappa) {
            kappa = smallest;
            kappa_at = p;
        }
    }
    ledger.report.add("uniform_ellipticity", kappa > 0 ? Status::pass : Status::fail, kappa, 0.0,
                      nlohmann::json{{"point", kappa_at}}, "smallest eigenvalue over samples");
    for (const auto& alpha : index_set.members()) {
        auto field = build_B_alpha(coeffs, alpha, index_set);
        double largest = 0.0;
        for (const auto& [zeta, expr] : field.g) {
            if (zeta.norm1() >= 2) continue;
            for (const auto& p : points) largest = std::max(largest, std::abs(expr.evaluate(p)));
        }
        ledger.report.add("bounded_lower_order_alpha=" + alpha.to_string(),
                          std::isfinite(largest) ? Status::pass : Status::fail, largest, 0.0, {},
                          "sampled on the box, not proven");
    }
    return ledger;
}

CoefficientField BAlphaField::as_field() const { return CoefficientField::from_g(alpha.dim(), g); }

BAlphaField build_B_alpha(const CoefficientField& coeffs, const MultiIndex& alpha, const IndexSet& index_set) {
    if (!index_set.contains(alpha))
        throw std::invalid_argument("alpha " + alpha.to_string() + " is not in the index set");
    return build_B_alpha(coeffs, alpha);
}

BAlphaField build_B_alpha(const CoefficientField& coeffs, const MultiIndex& alpha) {
    coeffs.validate();
    if (alpha.dim() != coeffs.dim || !alpha.non_negative() || alpha.norm_inf() > 2 || alpha.norm1() < 1 ||
        alpha.norm1() > 2)
        throw std::invalid_argument("alpha " + alpha.to_string() + " is not a valid order index");
    BAlphaField out;
    out.alpha = alpha;
    auto gammas = multi_indices_up_to(coeffs.dim, 2);
    for (const auto& zeta : gammas) {
        Expr total;
        for (const auto& beta : lower_set(alpha)) {
            auto gamma = zeta + alpha - beta;
            if (!gamma.non_negative() || gamma.norm1() > 2 || gamma.norm_inf() > 2) continue;
            auto term = derivative(coeffs.g(gamma), alpha - beta);
            int weight = multi_binomial(alpha, beta);
            total = total + (weight == 1 ? term : Expr::constant(weight) * term);
        }
        out.g.emplace(zeta, total);
    }
    return out;
}

ObligationLedger check_comparison_md(const CoefficientField& lower, const CoefficientField& middle,
                                     const CoefficientField& upper, const IndexSet& index_set, const SampleBox& box) {
    lower.validate();
    middle.validate();
    upper.validate();
    int dim = middle.dim;
    if (lower.dim != dim || upper.dim != dim || index_set.dim() != dim)
        throw std::invalid_argument("comparison needs coefficient fields of equal dimension");
    check_dim(box, dim);
    auto points = quasi_random_points(box);
    ObligationLedger ledger;
    ledger.report = VerificationReport("comparison_md");

    auto add_pair = [&](const std::string& name, const MultiIndex& where, const Expr& lo, const Expr& mid,
                        const Expr& hi, bool ordered) {
        std::string relation = ordered ? ">= 0" : "== 0";
        for (int side = 0; side < 2; ++side) {
            Obligation ob;
            ob.alpha = where;
            ob.beta = MultiIndex::zero(dim);
            ob.gamma = where;
            ob.relation = relation;
            ob.expression = side == 0 ? mid - lo : hi - mid;
            std::string label = name + (side == 0 ? " middle-lower " : " upper-middle ") + relation;
            settle(ledger, std::move(ob), points, ZeroTestMode::symbolic_first, label);
        }
    };

    for (int i = 0; i < dim; ++i) {
        auto unit = MultiIndex::unit(dim, i);
        add_pair("b" + std::to_string(i + 1), unit, lower.b[idx(i)], middle.b[idx(i)], upper.b[idx(i)],
                 index_set.contains(unit));
    }
    for (int i = 0; i < dim; ++i) {
        for (int j = i; j < dim; ++j) {
            auto where = MultiIndex::unit(dim, i) + MultiIndex::unit(dim, j);
            bool ordered = i != j && index_set.contains(where);
            add_pair("a" + std::to_string(i + 1) + std::to_string(j + 1), where, lower.a[idx(i)][idx(j)],
                     middle.a[idx(i)][idx(j)], upper.a[idx(i)][idx(j)], ordered);
        }
    }
    return ledger;
}

}  // namespace stochorder
