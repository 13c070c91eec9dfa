#include "stochorder/diffusion1d.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <numbers>
#include <cmath>
#include <sstream>

namespace stochorder {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

bool nearly_equal(double lhs, double rhs) {
    return std::abs(lhs - rhs) <= 1e-12 * std::max({1.0, std::abs(lhs), std::abs(rhs)});
}

}  // namespace

std::string to_string(Endpoint side) { return side == Endpoint::left ? "left" : "right"; }

std::string to_string(BoundaryKind kind) {
    switch (kind) {
        case BoundaryKind::reflecting: return "reflecting";
        case BoundaryKind::sticky: return "sticky";
        case BoundaryKind::elastic: return "elastic";
        case BoundaryKind::absorbing: return "absorbing";
        case BoundaryKind::killing: return "killing";
        case BoundaryKind::trap: return "trap";
        case BoundaryKind::natural: return "natural";
    }
    return "unknown";
}

BoundaryKind boundary_kind_from_string(const std::string& name) {
    for (auto kind : {BoundaryKind::reflecting, BoundaryKind::sticky, BoundaryKind::elastic, BoundaryKind::absorbing,
                      BoundaryKind::killing, BoundaryKind::trap, BoundaryKind::natural}) {
        if (to_string(kind) == name) return kind;
    }
    throw std::invalid_argument("unknown boundary kind '" + name + "'");
}

// ---------------------------------------------------------------------------
// γ parameterization

double kind_to_gamma(const FellerBoundary& bc, double a_e, double b_e, Endpoint side) {
    if (!(a_e > 0.0)) throw std::invalid_argument("diffusion coefficient must be positive at a regular endpoint");
    const bool left = side == Endpoint::left;
    switch (bc.kind) {
        case BoundaryKind::reflecting: return left ? inf : -inf;
        case BoundaryKind::absorbing: return -2.0 * b_e / a_e;
        case BoundaryKind::sticky: {
            if (!(bc.parameter > 0.0)) throw std::invalid_argument("sticky mass must be positive");
            double inv = 1.0 / bc.parameter;
            return left ? 2.0 * (inv - b_e) / a_e : -2.0 * (inv + b_e) / a_e;
        }
        default:
            throw std::invalid_argument("boundary kind '" + to_string(bc.kind) + "' is outside the gamma family");
    }
}

FellerBoundary gamma_to_kind(double gamma, double a_e, double b_e, Endpoint side) {
    if (!(a_e > 0.0)) throw std::invalid_argument("diffusion coefficient must be positive at a regular endpoint");
    const double absorbing = -2.0 * b_e / a_e;
    if (side == Endpoint::right) {
        if (gamma == -inf) return FellerBoundary::reflecting();
        if (nearly_equal(gamma, absorbing)) return FellerBoundary::absorbing();
        if (gamma < absorbing) return FellerBoundary::sticky(1.0 / (-0.5 * a_e * gamma - b_e));
        std::ostringstream msg;
        msg << "gamma " << gamma << " at the right endpoint exceeds -2b/a = " << absorbing
            << "; f''(r) = gamma f'(r) with gamma >= 0 is possible only if b(r) <= 0";
        throw BoundaryRangeError(msg.str());
    }
    if (gamma == inf) return FellerBoundary::reflecting();
    if (nearly_equal(gamma, absorbing)) return FellerBoundary::absorbing();
    if (gamma > absorbing) return FellerBoundary::sticky(1.0 / (0.5 * a_e * gamma + b_e));
    std::ostringstream msg;
    msg << "gamma " << gamma << " at the left endpoint is below -2b/a = " << absorbing
        << "; f''(l) = gamma f'(l) with gamma <= 0 is possible only if b(l) >= 0";
    throw BoundaryRangeError(msg.str());
}

double DiffusionModel::gamma(Endpoint side) const {
    double e = endpoint(side);
    if (!std::isfinite(e)) throw std::invalid_argument("gamma is defined at finite endpoints only");
    return kind_to_gamma(boundary(side), a.evaluate(e), b.evaluate(e), side);
}

void DiffusionModel::validate() const {
    if (!(left < right)) throw std::invalid_argument("interval endpoints must satisfy left < right");
    if (std::isnan(left) || std::isnan(right)) throw std::invalid_argument("interval endpoint is NaN");
    if (a.arity() > 1 || b.arity() > 1 || c.arity() > 1) {
        throw std::invalid_argument("1-D coefficients may only use the variable x");
    }
    for (Endpoint side : {Endpoint::left, Endpoint::right}) {
        const auto& bc = boundary(side);
        if (!std::isfinite(endpoint(side)) && bc.kind != BoundaryKind::natural &&
            bc.kind != BoundaryKind::reflecting) {
            throw std::invalid_argument("infinite endpoint admits only a natural boundary");
        }
        if ((bc.kind == BoundaryKind::sticky || bc.kind == BoundaryKind::elastic || bc.kind == BoundaryKind::trap) &&
            !(bc.parameter > 0.0)) {
            throw std::invalid_argument(to_string(bc.kind) + " boundary needs a positive parameter");
        }
    }
}

// ---------------------------------------------------------------------------
// Scale, speed, killing

ScaleSpeedKilling::ScaleSpeedKilling(const DiffusionModel& model, double base)
    : a_(model.a), b_(model.b), c_(model.c), base_(base) {
    if (!(base > model.left && base < model.right)) throw std::invalid_argument("base point must be interior");
    lambda_memo_.emplace(base, 0.0);
}

double ScaleSpeedKilling::integrate(const std::function<double(double)>& f, double from, double to) const {
    if (from == to) return 0.0;
    double error = 0.0;
    double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, from, to, 15, 1e-11, &error);
    if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "quadrature did not converge on [" << std::min(from, to) << ", " << std::max(from, to) << "]";
        throw DomainError(msg.str());
    }
    return value;
}

double ScaleSpeedKilling::Lambda(double x) const {
    double anchor = base_;
    double anchor_value = 0.0;
    {
        std::lock_guard lock(memo_mutex_);
        auto it = lambda_memo_.lower_bound(x);
        if (it != lambda_memo_.end() && it->first == x) return it->second;
        // Nearest memoized anchor on either side.
        double best = inf;
        if (it != lambda_memo_.end() && std::abs(it->first - x) < best) {
            best = std::abs(it->first - x);
            anchor = it->first;
            anchor_value = it->second;
        }
        if (it != lambda_memo_.begin()) {
            auto prev = std::prev(it);
            if (std::abs(prev->first - x) < best) {
                anchor = prev->first;
                anchor_value = prev->second;
            }
        }
    }
    double value =
        anchor_value + integrate([this](double y) { return 2.0 * b_.evaluate(y) / a_.evaluate(y); }, anchor, x);
    std::lock_guard lock(memo_mutex_);
    if (lambda_memo_.size() < 4096) lambda_memo_.emplace(x, value);
    return value;
}

double ScaleSpeedKilling::scale_density(double x) const { return std::exp(-Lambda(x)); }
double ScaleSpeedKilling::speed_density(double x) const { return 2.0 * std::exp(Lambda(x)) / a_.evaluate(x); }
double ScaleSpeedKilling::killing_density(double x) const {
    return 2.0 * c_.evaluate(x) * std::exp(Lambda(x)) / a_.evaluate(x);
}
double ScaleSpeedKilling::s(double x) const {
    return integrate([this](double y) { return scale_density(y); }, base_, x);
}
double ScaleSpeedKilling::m(double x) const {
    return integrate([this](double y) { return speed_density(y); }, base_, x);
}
double ScaleSpeedKilling::k(double x) const {
    return integrate([this](double y) { return killing_density(y); }, base_, x);
}

double default_base_point(const DiffusionModel& model) {
    if (model.bounded()) return 0.5 * (model.left + model.right);
    if (std::isfinite(model.left)) return model.left + 1.0;
    if (std::isfinite(model.right)) return model.right - 1.0;
    return 0.0;
}

// ---------------------------------------------------------------------------
// Boundary classification

std::string to_string(BoundaryClass c) {
    switch (c) {
        case BoundaryClass::exit: return "exit";
        case BoundaryClass::entrance: return "entrance";
        case BoundaryClass::regular: return "regular";
        case BoundaryClass::natural: return "natural";
        case BoundaryClass::undecided: return "undecided";
    }
    return "undecided";
}

std::string to_string(Finiteness f) {
    switch (f) {
        case Finiteness::finite: return "finite";
        case Finiteness::infinite: return "infinite";
        case Finiteness::undecided: return "undecided";
    }
    return "undecided";
}

nlohmann::json BoundaryClassification::to_json() const {
    auto trace = [](const IntegralTrace& t) {
        nlohmann::json sums = nlohmann::json::array();
        for (double v : t.partial_sums) sums.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf"));
        nlohmann::json out{{"verdict", to_string(t.verdict)}, {"mesh", t.mesh}, {"partial_sums", sums}};
        if (t.verdict == Finiteness::finite) out["estimate"] = t.estimate;
        if (!t.note.empty()) out["note"] = t.note;
        return out;
    };
    return {{"side", to_string(side)},
            {"endpoint", std::isfinite(endpoint) ? nlohmann::json(endpoint)
                                                 : nlohmann::json(endpoint > 0 ? "+inf" : "-inf")},
            {"classification", to_string(kind)},
            {"exit", u.verdict == Finiteness::finite},
            {"entrance", v.verdict == Finiteness::finite},
            {"u", trace(u)},
            {"v", trace(v)}};
}

namespace {

constexpr double divergence_threshold = 1e12;
constexpr double relative_convergence = 1e-9;
constexpr int ratio_window = 8;

/// Incremental finiteness decision for a series of non-negative increments.
class SeriesJudge {
public:
    void add(double increment) {
        increments_.push_back(increment);
        sum_ += increment;
    }
    [[nodiscard]] double sum() const { return sum_; }

    [[nodiscard]] Finiteness decide(bool final_level, std::string& note, double& estimate) const {
        if (!std::isfinite(sum_) || sum_ > divergence_threshold) {
            note = "partial sum exceeds 1e12";
            return Finiteness::infinite;
        }
        const std::size_t n = increments_.size();
        if (n < 4) return Finiteness::undecided;
        const double last = increments_.back();
        if (sum_ == 0.0 || last <= relative_convergence * sum_) {
            if (recent_ratios_below(0.9, 3) || last == 0.0) {
                estimate = sum_;
                note = "increments below 1e-9 relative";
                return Finiteness::finite;
            }
        }
        if (n > static_cast<std::size_t>(ratio_window) && recent_ratios_at_least(0.999, ratio_window)) {
            note = "mesh increments do not decay (ratio >= 0.999 over the last 8 levels)";
            return Finiteness::infinite;
        }
        if (recent_ratios_below(0.9, 4)) {
            double rho = increments_[n - 1] / increments_[n - 2];
            double tail = last * rho / (1.0 - rho);
            if (tail <= relative_convergence * sum_) {
                estimate = sum_ + tail;
                note = "geometric tail estimate below 1e-9 relative";
                return Finiteness::finite;
            }
        }
        if (final_level) note = "mesh exhausted before the partial sums settled";
        return Finiteness::undecided;
    }

private:
    [[nodiscard]] bool recent_ratios_below(double bound, int count) const {
        const auto n = static_cast<int>(increments_.size());
        if (n < count + 1) return false;
        for (int j = n - count; j < n; ++j) {
            double prev = increments_[static_cast<std::size_t>(j - 1)];
            double cur = increments_[static_cast<std::size_t>(j)];
            if (prev <= 0.0) {
                if (cur > 0.0) return false;
                continue;
            }
            if (cur / prev > bound) return false;
        }
        return true;
    }
    [[nodiscard]] bool recent_ratios_at_least(double bound, int count) const {
        const auto n = static_cast<int>(increments_.size());
        for (int j = n - count; j < n; ++j) {
            double prev = increments_[static_cast<std::size_t>(j - 1)];
            double cur = increments_[static_cast<std::size_t>(j)];
            if (!(prev > 0.0) || cur / prev < bound) return false;
        }
        return true;
    }

    std::vector<double> increments_;
    double sum_ = 0.0;
};

/// Degree-24 Chebyshev interpolant of a function on [lo, hi], evaluated in
/// barycentric form. Used for the cumulative integrals on one mesh interval,
/// where the geometric mesh keeps the nearest singularity at least a
/// half-length away and the interpolation error is at rounding level.
class ChebyshevTable {
public:
    static constexpr int degree = 24;

    ChebyshevTable(const std::function<double(double)>& f, double lo, double hi) {
        for (int k = 0; k <= degree; ++k) {
            const double node = 0.5 * (lo + hi) + 0.5 * (hi - lo) * std::cos(std::numbers::pi * k / degree);
            nodes_[static_cast<std::size_t>(k)] = node;
            values_[static_cast<std::size_t>(k)] = f(node);
        }
    }

    [[nodiscard]] double operator()(double x) const {
        double numerator = 0.0;
        double denominator = 0.0;
        for (int k = 0; k <= degree; ++k) {
            const auto i = static_cast<std::size_t>(k);
            const double gap = x - nodes_[i];
            if (gap == 0.0) return values_[i];
            double weight = (k % 2 ? -1.0 : 1.0) / gap;
            if (k == 0 || k == degree) weight *= 0.5;
            numerator += weight * values_[i];
            denominator += weight;
        }
        return numerator / denominator;
    }

private:
    std::array<double, degree + 1> nodes_{};
    std::array<double, degree + 1> values_{};
};

std::vector<double> classification_mesh(double base, double endpoint) {
    std::vector<double> mesh{base};
    if (std::isfinite(endpoint)) {
        const double gap = endpoint - base;
        const double floor_gap = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(endpoint));
        for (int j = 1; j <= 400; ++j) {
            double x = endpoint - gap * std::ldexp(1.0, -j);
            if (std::abs(endpoint - x) <= floor_gap || x == mesh.back()) break;
            mesh.push_back(x);
        }
    } else {
        const double dir = endpoint > 0 ? 1.0 : -1.0;
        for (int j = 0; j <= 64; ++j) mesh.push_back(base + dir * std::ldexp(1.0, j));
    }
    return mesh;
}

}  // namespace

BoundaryClassification classify_boundary(const DiffusionModel& model, Endpoint side) {
    return classify_boundary(model, side, default_base_point(model));
}

BoundaryClassification classify_boundary(const DiffusionModel& model, Endpoint side, double base) {
    model.validate();
    BoundaryClassification out;
    out.side = side;
    out.endpoint = model.endpoint(side);
    const auto mesh = classification_mesh(base, out.endpoint);
    out.u.mesh = mesh;
    out.v.mesh = mesh;

    using Fixed = boost::math::quadrature::gauss<double, 20>;
    const Expr& a = model.a;
    const Expr& b = model.b;
    const Expr& c = model.c;
    auto lambda_density = [&](double y) { return 2.0 * b.evaluate(y) / a.evaluate(y); };

    SeriesJudge u_judge;
    SeriesJudge v_judge;
    double lambda_j = 0.0;  // Λ at mesh[j]
    double scale_j = 0.0;   // |s((z, mesh[j]))|
    double mass_j = 0.0;    // (m + k)((z, mesh[j]))
    try {
        for (std::size_t j = 0; j + 1 < mesh.size(); ++j) {
            const double y0 = mesh[j];
            const double y1 = mesh[j + 1];
            const ChebyshevTable lambda_at(
                [&](double t) { return lambda_j + Fixed::integrate(lambda_density, y0, t); }, y0, y1);
            auto scale_density = [&](double t) { return std::exp(-lambda_at(t)); };
            auto mass_density = [&](double t) {
                double killing = std::max(c.evaluate(t), 0.0);
                return 2.0 * (1.0 + killing) * std::exp(lambda_at(t)) / a.evaluate(t);
            };
            const ChebyshevTable scale_at(
                [&](double t) { return scale_j + std::abs(Fixed::integrate(scale_density, y0, t)); }, y0, y1);
            const ChebyshevTable mass_at(
                [&](double t) { return mass_j + std::abs(Fixed::integrate(mass_density, y0, t)); }, y0, y1);

            double err = 0.0;
            using Adaptive = boost::math::quadrature::gauss_kronrod<double, 15>;
            double du = std::abs(Adaptive::integrate([&](double t) { return mass_at(t) * scale_density(t); }, y0, y1,
                                                     6, 1e-10, &err));
            double dv = std::abs(Adaptive::integrate([&](double t) { return scale_at(t) * mass_density(t); }, y0, y1,
                                                     6, 1e-10, &err));
            if (std::isnan(du)) du = inf;
            if (std::isnan(dv)) dv = inf;
            const double next_lambda = lambda_at(y1);
            scale_j = scale_at(y1);
            mass_j = mass_at(y1);
            lambda_j = next_lambda;

            u_judge.add(du);
            v_judge.add(dv);
            out.u.partial_sums.push_back(u_judge.sum());
            out.v.partial_sums.push_back(v_judge.sum());
            const bool final_level = j + 2 == mesh.size();
            if (out.u.verdict == Finiteness::undecided) {
                out.u.verdict = u_judge.decide(final_level, out.u.note, out.u.estimate);
            }
            if (out.v.verdict == Finiteness::undecided) {
                out.v.verdict = v_judge.decide(final_level, out.v.note, out.v.estimate);
            }
            if (out.u.verdict != Finiteness::undecided && out.v.verdict != Finiteness::undecided) break;
        }
    } catch (const DomainError& err) {
        for (auto* trace : {&out.u, &out.v}) {
            if (trace->verdict == Finiteness::undecided) trace->note = std::string("evaluation failed: ") + err.what();
        }
    }
    // Trim unused mesh points so the trace pairs each sum with its abscissa.
    for (auto* trace : {&out.u, &out.v}) trace->mesh.resize(trace->partial_sums.size() + 1);

    if (out.u.verdict == Finiteness::undecided || out.v.verdict == Finiteness::undecided) {
        out.kind = BoundaryClass::undecided;
    } else {
        bool exit = out.u.verdict == Finiteness::finite;
        bool entrance = out.v.verdict == Finiteness::finite;
        out.kind = exit && entrance ? BoundaryClass::regular
                   : exit           ? BoundaryClass::exit
                   : entrance       ? BoundaryClass::entrance
                                    : BoundaryClass::natural;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Intertwined operators

std::string DiffusionCoefficients::to_string() const {
    return "0.5*(" + a.to_string() + ")*f'' + (" + b.to_string() + ")*f' - (" + c.to_string() + ")*f";
}

namespace {

Expr d(const Expr& e) { return differentiate(e, 0); }

bool in_gamma_family(const FellerBoundary& bc) {
    return bc.kind == BoundaryKind::reflecting || bc.kind == BoundaryKind::sticky || bc.kind == BoundaryKind::absorbing;
}

/// Sample points strictly inside the model interval (a bounded window for
/// infinite intervals).
std::vector<double> interior_samples(const DiffusionModel& model, int count) {
    double lo = std::isfinite(model.left) ? model.left : (std::isfinite(model.right) ? model.right - 20.0 : -10.0);
    double hi = std::isfinite(model.right) ? model.right : lo + 20.0;
    std::vector<double> xs;
    for (int i = 0; i <= count; ++i) xs.push_back(lo + (hi - lo) * i / count);
    return xs;
}

void check_zero(VerificationReport& report, const std::string& check, const Expr& e, const DiffusionModel& model,
                const std::string& hypothesis) {
    if (is_identically_zero(e)) {
        report.add(check, Status::pass, 0.0, 0.0, {}, "symbolically zero");
        return;
    }
    double worst = 0.0;
    double witness = 0.0;
    for (double x : interior_samples(model, 64)) {
        double v = e.evaluate(x);
        if (std::abs(v) > std::abs(worst)) {
            worst = v;
            witness = x;
        }
    }
    if (std::abs(worst) <= 1e-12) {
        report.add(check, Status::inconclusive, worst, 1e-12, {{"x", witness}},
                   "numerically zero (unproven): " + e.to_string());
    } else {
        report.add(check, Status::fail, worst, 0.0, {{"x", witness}, {"expr", e.to_string()}},
                   hypothesis + " violated: " + e.to_string() + " = " + std::to_string(worst));
    }
}

void check_boundary_sign(VerificationReport& report, const DiffusionModel& model) {
    double bl = model.b.evaluate(model.left);
    double br = model.b.evaluate(model.right);
    report.add("drift_sign_left", bl >= 0.0 ? Status::pass : Status::fail, bl, 0.0, {{"x", model.left}},
               "requires b(l) >= 0");
    report.add("drift_sign_right", br <= 0.0 ? Status::pass : Status::fail, br, 0.0, {{"x", model.right}},
               "requires b(r) <= 0");
}

void check_second_derivative_gamma(VerificationReport& report, const DiffusionModel& model) {
    for (Endpoint side : {Endpoint::left, Endpoint::right}) {
        const auto& bc = model.boundary(side);
        std::string check = "boundary_gamma_zero_" + to_string(side);
        if (!in_gamma_family(bc)) {
            report.add(check, Status::fail, 0.0, 0.0, {{"kind", to_string(bc.kind)}},
                       "f''(e) = 0 requires a reflecting/sticky/absorbing boundary with gamma = 0");
            continue;
        }
        double gamma = model.gamma(side);
        bool ok = std::isfinite(gamma) && std::abs(gamma) <= 1e-12;
        report.add(check, ok ? Status::pass : Status::fail, gamma, 1e-12, {{"kind", to_string(bc.kind)}},
                   "domain must impose f''(e) = 0 (gamma = 0)");
    }
}

}  // namespace

IntertwinerDerivation derive_BC(const DiffusionModel& model, OrderKind order) {
    model.validate();
    IntertwinerDerivation out;
    out.order = order;
    auto& report = out.admissibility;
    const Expr& a = model.a;
    const Expr& b = model.b;
    const Expr da = d(a);
    const Expr db = d(b);

    check_zero(report, "killing_constant", d(model.c), model, "constant killing (c' = 0)");

    for (Endpoint side : {Endpoint::left, Endpoint::right}) {
        double e = model.endpoint(side);
        const auto& bc = model.boundary(side);
        bool ok = std::isfinite(e) ? in_gamma_family(bc) : bc.kind == BoundaryKind::natural ||
                                                               bc.kind == BoundaryKind::reflecting;
        report.add("boundary_family_" + to_string(side), ok ? Status::pass : Status::fail, 0.0, 0.0,
                   {{"kind", to_string(bc.kind)}}, "supported boundaries: reflecting, sticky, absorbing");
    }

    // First-derivative intertwiner: (Ãf)' = ½a f''' + (½a' + b) f'' + b' f' − (c f)'.
    DiffusionCoefficients increasing{a, 0.5 * da + b, model.c - db};
    // Second-derivative intertwiner, valid when b'' = 0.
    DiffusionCoefficients convex{a, da + b, model.c - (0.5 * d(da) + 2.0 * db)};

    auto robin_boundaries = [&] {
        std::vector<BoundaryRelation> rel;
        for (Endpoint side : {Endpoint::left, Endpoint::right}) {
            if (!std::isfinite(model.endpoint(side)) || !in_gamma_family(model.boundary(side))) continue;
            double gamma = model.gamma(side);
            if (std::isfinite(gamma)) rel.push_back({side, "robin", gamma});
            else rel.push_back({side, "dirichlet", 0.0});
        }
        return rel;
    };
    auto fixed_boundaries = [&](const std::string& relation) {
        return std::vector<BoundaryRelation>{{Endpoint::left, relation, 0.0}, {Endpoint::right, relation, 0.0}};
    };

    switch (order) {
        case OrderKind::increasing:
            out.b_operators = {increasing};
            out.c_operator = {{Expr()}};
            out.b_boundaries = {robin_boundaries()};
            break;
        case OrderKind::convex:
            report.add("bounded_interval", model.bounded() ? Status::pass : Status::fail, 0.0, 0.0, {},
                       "convex order is restricted to bounded intervals");
            if (model.bounded()) {
                check_zero(report, "affine_drift", d(db), model, "b'' = 0");
                check_boundary_sign(report, model);
                check_second_derivative_gamma(report, model);
            }
            out.b_operators = {convex};
            out.c_operator = {{Expr()}};
            out.b_boundaries = {fixed_boundaries("dirichlet")};
            break;
        case OrderKind::increasing_convex: {
            report.add("bounded_interval", model.bounded() ? Status::pass : Status::fail, 0.0, 0.0, {},
                       "increasing convex order is restricted to bounded intervals");
            const Expr ddb = d(db);
            if (model.bounded()) {
                double worst = inf;
                double witness = 0.0;
                for (double x : interior_samples(model, 64)) {
                    double v = ddb.evaluate(x);
                    if (v < worst) {
                        worst = v;
                        witness = x;
                    }
                }
                report.add("convex_drift", worst >= -1e-12 ? Status::pass : Status::fail, worst, 1e-12,
                           {{"x", witness}}, "requires b'' >= 0 on samples");
                check_boundary_sign(report, model);
                check_second_derivative_gamma(report, model);
            }
            out.b_operators = {increasing, convex};
            out.c_operator = {{Expr(), Expr()}, {ddb, Expr()}};
            out.b_boundaries = {fixed_boundaries("neumann"), fixed_boundaries("dirichlet")};
            break;
        }
        default:
            throw std::invalid_argument("derive_BC supports the 1-D orders only");
    }
    return out;
}

std::vector<Expr> intertwining_residual(const DiffusionModel& model, const IntertwinerDerivation& derivation,
                                        const Expr& f) {
    auto apply = [](const DiffusionCoefficients& op, const Expr& g) {
        return 0.5 * op.a * d(d(g)) + op.b * d(g) - op.c * g;
    };
    const Expr af = apply(DiffusionCoefficients{model.a, model.b, model.c}, f);
    std::vector<Expr> phi_f;
    std::vector<Expr> phi_af;
    if (derivation.order != OrderKind::convex) {
        phi_f.push_back(d(f));
        phi_af.push_back(d(af));
    }
    if (derivation.order != OrderKind::increasing) {
        phi_f.push_back(d(d(f)));
        phi_af.push_back(d(d(af)));
    }
    std::vector<Expr> residual;
    for (std::size_t i = 0; i < phi_f.size(); ++i) {
        Expr r = phi_af[i] - apply(derivation.b_operators.at(i), phi_f[i]);
        for (std::size_t j = 0; j < phi_f.size(); ++j) r = r - derivation.c_operator.at(i).at(j) * phi_f[j];
        residual.push_back(r);
    }
    return residual;
}

// ---------------------------------------------------------------------------
// Regularity condition

VerificationReport check_condition_proper(const DiffusionModel& model, const std::vector<double>& samples) {
    model.validate();
    VerificationReport report("condition_proper");
    constexpr double fit_window = 1048576.0;  // 2^20

    std::vector<double> xs = samples;
    if (xs.empty()) {
        const double lo = std::isfinite(model.left) ? model.left : -fit_window;
        const double hi = std::isfinite(model.right) ? model.right : fit_window;
        const double width = model.bounded() ? hi - lo : 16.0;
        const double centre = model.bounded() ? lo : default_base_point(model) - 8.0;
        for (int i = 0; i <= 200; ++i) xs.push_back(centre + width * i / 200.0);
        for (Endpoint side : {Endpoint::left, Endpoint::right}) {
            double e = model.endpoint(side);
            double dir = side == Endpoint::left ? 1.0 : -1.0;
            if (std::isfinite(e)) {
                double scale = model.bounded() ? model.right - model.left : 1.0;
                xs.push_back(e);
                for (int j = 1; j <= 40; ++j) xs.push_back(e + dir * scale * std::ldexp(1.0, -j));
            } else {
                for (int j = 0; j <= 40; ++j) xs.push_back(-dir * std::ldexp(1.0, j));
            }
        }
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    }

    struct Extremum {
        double value;
        double at;
    };
    Extremum a_min{inf, 0.0};
    Extremum a_max{-inf, 0.0};
    Extremum c_abs{0.0, 0.0};
    double b_bar = 0.0;
    std::vector<std::pair<double, double>> outer;  // (x, |b|) beyond the fit window
    for (double x : xs) {
        if (x < model.left || x > model.right) continue;
        double av = 0.0;
        double bv = 0.0;
        double cv = 0.0;
        try {
            av = model.a.evaluate(x);
            bv = model.b.evaluate(x);
            cv = model.c.evaluate(x);
        } catch (const DomainError& err) {
            report.add("evaluation", Status::fail, 0.0, 0.0, {{"x", x}}, err.what());
            continue;
        }
        if (av < a_min.value) a_min = {av, x};
        if (av > a_max.value) a_max = {av, x};
        if (std::abs(cv) > c_abs.value) c_abs = {std::abs(cv), x};
        if (std::abs(x) <= fit_window) b_bar = std::max(b_bar, std::abs(bv) / (1.0 + std::abs(x)));
        else outer.emplace_back(x, std::abs(bv));
    }

    const double a_bar = a_min.value > 0.0 ? std::max(a_max.value, 1.0 / a_min.value) : inf;
    constexpr double ellipticity_limit = 1e8;
    if (a_min.value <= 1.0 / ellipticity_limit) {
        report.add("ellipticity", Status::fail, a_min.value, 1.0 / ellipticity_limit, {{"x", a_min.at}},
                   "a(x) approaches zero: inf a = " + std::to_string(a_min.value));
    } else if (a_max.value >= ellipticity_limit) {
        report.add("ellipticity", Status::fail, a_max.value, ellipticity_limit, {{"x", a_max.at}},
                   "a(x) is unbounded on samples");
    } else {
        report.add("ellipticity", Status::pass, a_bar, ellipticity_limit, {}, "a_bar estimate");
    }

    Status growth = Status::pass;
    nlohmann::json growth_witness;
    double worst_ratio = 0.0;
    for (auto [x, bv] : outer) {
        double ratio = bv / (1.0 + std::abs(x));
        if (ratio > b_bar * (1.0 + 1e-9) + 1e-12 && ratio > worst_ratio) {
            worst_ratio = ratio;
            growth = Status::fail;
            growth_witness = {{"x", x}, {"abs_b", bv}, {"b_bar", b_bar}};
        }
    }
    report.add("bounded_growth", growth, growth == Status::pass ? b_bar : worst_ratio, b_bar, growth_witness,
               growth == Status::pass ? "b_bar estimate" : "|b(x)| > b_bar (1 + |x|) beyond the fit window");

    report.add("killing_bound", c_abs.value < ellipticity_limit ? Status::pass : Status::fail, c_abs.value,
               ellipticity_limit, {{"x", c_abs.at}}, "c_bar estimate");

    bool smooth = true;
    for (const Expr* e : {&model.a, &model.b, &model.c}) {
        if (!e->is_smooth() || !d(*e).is_smooth() || !d(d(*e)).is_smooth()) smooth = false;
    }
    report.add("twice_differentiable", smooth ? Status::pass : Status::fail, 0.0, 0.0, {},
               smooth ? "symbolic derivatives of order <= 2 exist" : "min/max makes a coefficient non-smooth");

    report.metrics()["a_bar"] = a_bar;
    report.metrics()["b_bar"] = b_bar;
    report.metrics()["c_bar"] = c_abs.value;
    return report;
}

}  // namespace stochorder
