#include "stochorder/semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

namespace stochorder {

namespace {

double sup_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

Eigen::Index argmin(const Vector& v) {
    Eigen::Index at = 0;
    v.minCoeff(&at);
    return at;
}

std::string format_number(double value) {
    std::ostringstream out;
    out << value;
    return out.str();
}

/// e^{tA} f for a square sparse A by uniformization. P = I + A/Λ is
/// non-negative when A is Metzler; other matrices still work but lose
/// the contraction property.
Vector uniformized(const SparseMatrix& matrix, double t, const Vector& f) {
    if (t < 0.0) throw std::invalid_argument("evolution time must be non-negative");
    if (matrix.rows() > expm_dimension_limit)
        throw std::invalid_argument("dimension " + std::to_string(matrix.rows()) +
                                    " exceeds the uniformization limit; use yosida_evolve");
    if (f.size() != matrix.cols()) throw std::invalid_argument("vector length does not match the operator");
    double rate = 0.0;
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) rate = std::max(rate, std::abs(matrix.coeff(i, i)));
    if (rate == 0.0) {
        double off = 0.0;
        for (Eigen::Index i = 0; i < matrix.outerSize(); ++i)
            for (SparseMatrix::InnerIterator it(matrix, i); it; ++it) off = std::max(off, std::abs(it.value()));
        if (off == 0.0 || t == 0.0) return f;
        rate = off * static_cast<double>(matrix.cols());
    }
    if (t == 0.0) return f;
    SparseMatrix step = matrix / rate;
    const int substeps = std::max(1, static_cast<int>(std::ceil(rate * t / 50.0)));
    const double mu = rate * t / substeps;
    const auto cap = static_cast<int>(mu + 40.0 + 20.0 * std::sqrt(mu));
    Vector current = f;
    for (int s = 0; s < substeps; ++s) {
        Vector power = current;
        double weight = std::exp(-mu);
        Vector total = weight * power;
        for (int k = 1; k <= cap; ++k) {
            power += step * power;
            weight *= mu / k;
            total += weight * power;
            if (k > mu && weight * mu / (k + 1 - mu) < 1e-15) break;
        }
        current = std::move(total);
    }
    return current;
}

DenseMatrix dense_resolvent(const GridOperator& op, double lambda) {
    DenseMatrix system = DenseMatrix::Identity(op.rows(), op.cols()) - lambda * op.dense();
    Eigen::PartialPivLU<DenseMatrix> lu(system);
    return lu.inverse();
}

constexpr Eigen::Index kDenseLimit = 3000;

}  // namespace

ResolventCache::ResolventCache(const GridOperator& op) : matrix_(op.matrix()) {
    if (matrix_.rows() != matrix_.cols()) throw std::invalid_argument("resolvent needs a square operator");
    matrix_.makeCompressed();
}

const ResolventCache::Factor& ResolventCache::factor(double lambda) const {
    std::lock_guard lock(mutex_);
    auto found = factors_.find(lambda);
    if (found != factors_.end()) return *found->second;
    Eigen::SparseMatrix<double> identity(matrix_.rows(), matrix_.cols());
    identity.setIdentity();
    Eigen::SparseMatrix<double> system = identity - lambda * matrix_;
    system.makeCompressed();
    auto lu = std::make_unique<Factor>();
    lu->compute(system);
    if (lu->info() != Eigen::Success) throw std::runtime_error("I - lambda A is singular at lambda = " + format_number(lambda));
    return *factors_.emplace(lambda, std::move(lu)).first->second;
}

Vector ResolventCache::solve(double lambda, const Vector& g) const {
    if (!(lambda > 0.0)) throw std::invalid_argument("resolvent parameter must be positive");
    if (g.size() != matrix_.rows()) throw std::invalid_argument("vector length does not match the operator");
    const auto& lu = factor(lambda);
    Vector f = lu.solve(g);
    if (lu.info() != Eigen::Success || !f.allFinite()) throw std::runtime_error("resolvent solve failed");
    // A few refinement sweeps bring stiff systems down to the residual target.
    const double target = 1e-12 * std::max(sup_norm(g), std::numeric_limits<double>::min());
    for (int sweep = 0; sweep < 3; ++sweep) {
        Vector residual = g - (f - lambda * (matrix_ * f));
        if (sup_norm(residual) <= target) break;
        f += lu.solve(residual);
    }
    return f;
}

Vector resolvent(const GridOperator& op, double lambda, const Vector& g) { return ResolventCache(op).solve(lambda, g); }

Vector yosida_evolve(const GridOperator& op, double t, const Vector& f, int n) {
    if (t < 0.0) throw std::invalid_argument("evolution time must be non-negative");
    if (n < 1) throw std::invalid_argument("Yosida index must be positive");
    if (t == 0.0) return f;
    ResolventCache cache(op);
    const double step = 1.0 / n;
    const double mu = t * n;
    const double log_mu = std::log(mu);
    Vector power = f;
    Vector total = Vector::Zero(f.size());
    for (long k = 0;; ++k) {
        if (k > 0) power = cache.solve(step, power);
        double log_weight = -mu + static_cast<double>(k) * log_mu - std::lgamma(static_cast<double>(k) + 1.0);
        double weight = std::exp(log_weight);
        total += weight * power;
        if (k > mu && weight * (k + 1) / (k + 1 - mu) < 1e-14) break;
    }
    return total;
}

Vector expm_apply(const GridOperator& op, double t, const Vector& f) { return uniformized(op.matrix(), t, f); }

Vector expm_apply_transpose(const GridOperator& op, double t, const Vector& mu) {
    SparseMatrix transposed = op.matrix().transpose();
    return uniformized(transposed, t, mu);
}

double lambda0_estimate(const GridOperator& B, const GridOperator& C, double lambda) {
    double c_norm = C.norm_inf();
    if (c_norm == 0.0) return std::numeric_limits<double>::infinity();
    double r_norm = 0.0;
    if (B.rows() <= kDenseLimit) {
        r_norm = dense_resolvent(B, lambda).cwiseAbs().rowwise().sum().maxCoeff();
    } else {
        // R(λ,B) ≥ 0 for resolvent-positive B, so its row sums give the norm.
        r_norm = sup_norm(ResolventCache(B).solve(lambda, Vector::Ones(B.rows())));
    }
    return 1.0 / (c_norm * r_norm);
}

Vector compute_U_lambda(const GridOperator& B, const GridOperator& C, double lambda, const Vector& g, int kmax) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    if (C.norm_inf() == 0.0) return g;
    double lambda0 = lambda0_estimate(B, C, lambda);
    if (lambda >= lambda0)
        throw DivergenceError("lambda = " + format_number(lambda) + " is not below the estimate lambda0 = " +
                                  format_number(lambda0) + "; the series for U_lambda may diverge",
                              lambda0);
    ResolventCache cache(B);
    Vector term = g;
    Vector total = g;
    const double stop = 1e-13 * sup_norm(g);
    if (stop == 0.0) return total;
    for (int k = 1; k <= kmax; ++k) {
        term = lambda * C.apply(cache.solve(lambda, term));
        total += term;
        if (sup_norm(term) < stop) return total;
    }
    throw NonConvergenceError("U_lambda series did not converge within " + std::to_string(kmax) + " terms");
}

VerificationReport verify_fundamental_bound(const GridOperator& A, const DiscreteIntertwiner& bc,
                                            const DiscreteOrderMap& phi, double lambda,
                                            std::span<const Vector> cone_samples) {
    VerificationReport report("fundamental_bound");
    report.metrics()["lambda"] = lambda;
    report.metrics()["samples"] = cone_samples.size();
    ResolventCache resolvent_A(A);
    ResolventCache resolvent_B(bc.B);

    // Dense U_λ fallback when the series estimate does not guarantee convergence.
    std::optional<Eigen::PartialPivLU<DenseMatrix>> direct;
    auto apply_U = [&](const Vector& v) -> std::pair<Vector, std::string> {
        try {
            return {compute_U_lambda(bc.B, bc.C, lambda, v), "series"};
        } catch (const DivergenceError&) {
        } catch (const NonConvergenceError&) {
        }
        if (bc.B.rows() > kDenseLimit) throw std::runtime_error("U_lambda direct solve too large");
        if (!direct) {
            DenseMatrix k = DenseMatrix::Identity(bc.B.rows(), bc.B.rows()) -
                            lambda * bc.C.dense() * dense_resolvent(bc.B, lambda);
            direct.emplace(k);
        }
        return {direct->solve(v), "direct"};
    };

    struct Worst {
        double value = std::numeric_limits<double>::infinity();
        nlohmann::json witness;
    };
    Worst cone, ordering, positivity_A, positivity_B;
    double chain = 0.0;
    nlohmann::json chain_witness;
    double eps_max = 0.0;
    std::string u_route;
    auto track = [](Worst& worst, const Vector& v, double eps, std::size_t sample) {
        if (v.size() == 0) return;
        auto at = argmin(v);
        double scaled = v[at] / eps;  // in units of the tolerance
        if (scaled < worst.value) {
            worst.value = scaled;
            worst.witness = {{"sample", sample}, {"entry", at}, {"value", v[at]}};
        }
    };

    for (std::size_t s = 0; s < cone_samples.size(); ++s) {
        const Vector& g = cone_samples[s];
        Vector phig = phi.phi.apply(g);
        double eps = 1e-9 * std::max({1.0, sup_norm(g), sup_norm(phig)});
        eps_max = std::max(eps_max, eps);
        Vector lhs = phi.phi.apply(resolvent_A.solve(lambda, g));
        Vector rhs = resolvent_B.solve(lambda, phig);
        track(cone, phig, eps, s);
        track(ordering, lhs - rhs, eps, s);
        track(positivity_A, lhs, eps, s);
        track(positivity_B, rhs, eps, s);
        auto [u, route] = apply_U(phig);
        u_route = route;
        double gap = sup_norm(resolvent_B.solve(lambda, u) - lhs) / std::max(1.0, sup_norm(lhs));
        if (gap > chain) {
            chain = gap;
            chain_witness = {{"sample", s}};
        }
    }
    auto status_of = [](const Worst& w) { return w.value >= -1.0 ? Status::pass : Status::fail; };
    auto value_of = [eps_max](const Worst& w) { return std::isfinite(w.value) ? w.value * eps_max : 0.0; };
    auto witness_of = [](const Worst& w) { return w.value >= -1.0 ? nlohmann::json() : w.witness; };

    report.add("cone_samples", status_of(cone), value_of(cone), eps_max, witness_of(cone), "Phi g >= 0 for every sample");
    report.add("positivity_A", status_of(positivity_A), value_of(positivity_A), eps_max, witness_of(positivity_A),
               "Phi R(lambda,A) g >= 0");
    report.add("ordering", status_of(ordering), value_of(ordering), eps_max, witness_of(ordering),
               bc.c_nonnegative ? "Phi R(lambda,A) g - R(lambda,B) Phi g >= 0"
                                : "C has negative entries, so the ordering is tested but not implied");
    report.add("positivity_B", status_of(positivity_B), value_of(positivity_B), eps_max, witness_of(positivity_B),
               "R(lambda,B) Phi g >= 0");
    if (bc.exact) {
        report.add("chain_identity", chain <= 1e-9 ? Status::pass : Status::fail, chain, 1e-9, chain_witness,
                   "R(lambda,B) U_lambda Phi g = Phi R(lambda,A) g via " + u_route);
    } else {
        report.add("chain_identity", Status::inconclusive, chain, 1e-9, chain_witness,
                   "intertwiner is not exact");
    }
    return report;
}

std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::certified: return "certified";
    case Verdict::refuted: return "refuted";
    case Verdict::inconclusive: return "inconclusive";
    }
    return "unknown";
}

nlohmann::json MonotonicityCertificate::to_json() const {
    nlohmann::json out{{"model_id", model_id},
                       {"order", to_string(order.kind)},
                       {"lambdas", lambdas},
                       {"times", times},
                       {"verdict", stochorder::to_string(verdict)},
                       {"reason", reason},
                       {"semigroup_margin", semigroup_margin},
                       {"witness", witness},
                       {"report", report.to_json()}};
    if (order.kind == OrderKind::multi_index) {
        out["index_set"] = nlohmann::json::array();
        for (const auto& m : order.index_set.members()) out["index_set"].push_back(m.entries());
    }
    return out;
}

MonotonicityCertificate certify_discrete(const GridOperator& generator, const DiscreteOrderMap& phi,
                                         const CertifyOptions& options, const std::string& model_id) {
    MonotonicityCertificate cert;
    cert.model_id = model_id;
    cert.order = phi.order;
    cert.lambdas = options.lambdas;
    cert.times = options.times;
    auto& report = cert.report;

    auto bc = derive_discrete_intertwiner(generator, phi, SplitPolicy::metzler);
    report.add("intertwining_residual", bc.exact ? Status::pass : Status::inconclusive, bc.residual, bc.tolerance);
    auto entry_json = [](const std::optional<MatrixEntry>& e) {
        return e ? nlohmann::json{{"row", e->row}, {"col", e->col}, {"value", e->value}} : nlohmann::json();
    };
    report.add("C_nonnegative", bc.c_nonnegative ? Status::pass : Status::fail,
               bc.negative_c ? bc.negative_c->value : 0.0, 0.0, entry_json(bc.negative_c));

    // Resolvent positivity of B on the λ grid.
    for (double lambda : options.lambdas) {
        std::string name = "resolvent_positive_B lambda=" + format_number(lambda);
        if (bc.B.rows() > kDenseLimit) {
            report.add(name, Status::inconclusive, 0.0, 0.0, {}, "dimension too large for a dense inverse");
            continue;
        }
        DenseMatrix r = dense_resolvent(bc.B, lambda);
        Eigen::Index row = 0;
        Eigen::Index col = 0;
        double smallest = r.minCoeff(&row, &col);
        double tol = 1e-12 * std::max(1.0, r.cwiseAbs().maxCoeff());
        report.add(name, smallest >= -tol ? Status::pass : Status::fail, smallest, tol,
                   smallest >= -tol ? nlohmann::json() : nlohmann::json{{"row", row}, {"col", col}});
    }

    auto family = generate_test_family(phi.order, phi.domain, options.family_size, options.seed);
    for (double lambda : options.lambdas) {
        auto bound = verify_fundamental_bound(generator, bc, phi, lambda, family.functions);
        report.merge(bound, "lambda=" + format_number(lambda));
    }

    // Semigroup spot checks on the family, plus a targeted probe along a
    // negative off-diagonal entry of M when Φ is onto.
    double margin = std::numeric_limits<double>::infinity();
    nlohmann::json counterexample;
    auto probe = [&](const Vector& f, double t, const nlohmann::json& label) {
        Vector phif = phi.phi.apply(f);
        Vector evolved = phi.phi.apply(expm_apply(generator, t, f));
        double eps = options.tolerance * std::max({1.0, sup_norm(f), sup_norm(phif)});
        auto at = argmin(evolved);
        margin = std::min(margin, evolved[at]);
        if (evolved[at] < -eps && counterexample.is_null())
            counterexample = {{"function", label}, {"t", t}, {"entry", at}, {"value", evolved[at]}, {"tolerance", eps}};
    };
    bool evolvable = generator.rows() <= expm_dimension_limit;
    if (evolvable) {
        for (double t : options.times)
            for (std::size_t m = 0; m < family.functions.size(); ++m) probe(family.functions[m], t, m);
        if (bc.negative_m && phi.surjective) {
            double scale = std::max(1.0, bc.M.cwiseAbs().rowwise().sum().maxCoeff());
            Vector f = phi.pseudo_inverse.col(bc.negative_m->col);
            probe(f, 1e-3 / scale, nlohmann::json{{"pseudo_inverse_column", bc.negative_m->col}});
        }
        report.add("semigroup_spot_checks", counterexample.is_null() ? Status::pass : Status::fail, margin,
                   options.tolerance, counterexample);
    } else {
        report.add("semigroup_spot_checks", Status::inconclusive, 0.0, 0.0, {}, "dimension too large for expm_apply");
    }
    cert.semigroup_margin = std::isfinite(margin) ? margin : 0.0;

    if (!counterexample.is_null()) {
        cert.verdict = Verdict::refuted;
        cert.witness = counterexample;
        cert.reason = "Phi e^{tA} f has a negative entry for f in the cone";
    } else if (report.passed()) {
        cert.verdict = Verdict::certified;
        cert.reason = "intertwiner exact, C >= 0, B resolvent positive, bounds hold";
    } else {
        cert.verdict = Verdict::inconclusive;
        const ReportEntry* first = report.first(Status::fail);
        if (!first) first = report.first(Status::inconclusive);
        cert.reason = first ? "unmet sufficient condition: " + first->check : "incomplete checks";
        if (first) cert.witness = first->witness;
    }
    return cert;
}

MonotonicityCertificate certify_monotonicity(const DiffusionModel& model, OrderKind order, int intervals,
                                             const CertifyOptions& options, std::optional<double> truncation) {
    auto derivation = derive_BC(model, order);
    if (!derivation.admissible()) {
        MonotonicityCertificate cert;
        cert.model_id = model.name;
        cert.order = OrderSpec::simple(order);
        cert.lambdas = options.lambdas;
        cert.times = options.times;
        cert.report.merge(derivation.admissibility, "derive_BC");
        const ReportEntry* failed = derivation.admissibility.first(Status::fail);
        if (failed) {
            cert.verdict = Verdict::refuted;
            cert.reason = "inadmissible: " + failed->check + (failed->note.empty() ? "" : " (" + failed->note + ")");
            cert.witness = {{"check", failed->check}, {"value", failed->value}, {"detail", failed->witness}};
        } else {
            const ReportEntry* open = derivation.admissibility.first(Status::inconclusive);
            cert.verdict = Verdict::inconclusive;
            cert.reason = "admissibility undecided: " + (open ? open->check : std::string("unknown"));
        }
        return cert;
    }
    auto grid = Grid::for_model(model, intervals, truncation);
    auto generator = build_generator(model, grid);
    auto phi = build_phi(order, grid);
    auto cert = certify_discrete(generator, phi, options, model.name);
    VerificationReport combined("certify_monotonicity");
    combined.merge(derivation.admissibility, "derive_BC");
    combined.merge(cert.report);
    if (grid.truncation) combined.metrics()["truncation"] = *grid.truncation;
    combined.metrics()["grid_points"] = grid.size();
    cert.report = std::move(combined);
    return cert;
}

VerificationReport verify_lower_bound(const GridOperator& A, const GridOperator& B, const DiscreteOrderMap& phi,
                                      const Vector& f, const Vector& h, double t, double tolerance) {
    Vector phif = phi.phi.apply(f);
    if (h.size() != phif.size()) throw std::invalid_argument("lower-bound vector has the wrong length");
    const double scale = std::max(1.0, sup_norm(phif));
    const double pre_tol = 1e-12 * scale;
    if ((phif - h).minCoeff() < -pre_tol) throw std::invalid_argument("precondition Phi f >= h fails");
    if (h.size() > 0 && h.minCoeff() < -pre_tol) throw std::invalid_argument("precondition h >= 0 fails");

    VerificationReport report("lower_bound");
    report.metrics()["t"] = t;
    Vector lhs = phi.phi.apply(expm_apply(A, t, f));
    Vector rhs = uniformized(B.matrix(), t, h);
    Vector gap = lhs - rhs;
    const double eps = tolerance * scale;
    auto at = argmin(gap);
    bool holds = gap.size() == 0 || gap[at] >= -eps;
    report.add("Phi_S_f_ge_T_h", holds ? Status::pass : Status::fail, gap.size() ? gap[at] : 0.0, eps,
               holds ? nlohmann::json() : nlohmann::json{{"entry", at}, {"lhs", lhs[at]}, {"rhs", rhs[at]}});
    double low = rhs.size() ? rhs.minCoeff() : 0.0;
    report.add("T_h_nonnegative", low >= -eps ? Status::pass : Status::fail, low, eps);
    return report;
}

VerificationReport verify_comparison(const GridOperator& A1, const GridOperator& A, const GridOperator& A2,
                                     const DiscreteOrderMap& phi, const TestFamily& family,
                                     const ComparisonOptions& options) {
    if (A1.rows() != A.rows() || A2.rows() != A.rows()) throw std::invalid_argument("generators differ in size");
    VerificationReport report("comparison");
    const DenseMatrix phi_dense = phi.phi.dense();
    const double scale = std::max({1.0, A.norm_inf(), A1.norm_inf(), A2.norm_inf()});

    auto decompose = [&](const DenseMatrix& difference, const std::string& name) {
        DenseMatrix c = difference * phi.pseudo_inverse;
        double residual = (difference - c * phi_dense).cwiseAbs().maxCoeff();
        double tol = 1e-10 * scale;
        Eigen::Index row = 0;
        Eigen::Index col = 0;
        double smallest = c.size() ? c.minCoeff(&row, &col) : 0.0;
        report.add(name + "_factorizes", residual <= tol ? Status::pass : Status::fail, residual, tol);
        report.add(name + "_nonnegative", smallest >= -1e-12 * scale ? Status::pass : Status::fail, smallest,
                   1e-12 * scale,
                   smallest >= -1e-12 * scale ? nlohmann::json() : nlohmann::json{{"row", row}, {"col", col}});
    };
    decompose(A2.dense() - A.dense(), "C2");
    decompose(A.dense() - A1.dense(), "C1");

    for (double t : options.times) {
        double worst = std::numeric_limits<double>::infinity();
        nlohmann::json witness;
        for (std::size_t m = 0; m < family.functions.size(); ++m) {
            const Vector& f = family.functions[m];
            Vector u1 = expm_apply(A1, t, f);
            Vector u = expm_apply(A, t, f);
            Vector u2 = expm_apply(A2, t, f);
            double norm = std::max(1.0, sup_norm(f));
            for (const auto& [gap, label] : {std::pair{Vector(u - u1), "lower"}, std::pair{Vector(u2 - u), "upper"}}) {
                auto at = argmin(gap);
                if (gap[at] / norm < worst) {
                    worst = gap[at] / norm;
                    witness = {{"function", m}, {"entry", at}, {"side", label}, {"value", gap[at]}};
                }
            }
        }
        bool holds = family.functions.empty() || worst >= -options.tolerance;
        report.add("ordering t=" + format_number(t), holds ? Status::pass : Status::fail,
                   std::isfinite(worst) ? worst : 0.0, options.tolerance, holds ? nlohmann::json() : witness);
    }

    // Dominance of the laws started from a common point.
    TestFamily law_family = family;
    if (phi.order.kind != OrderKind::multi_index && phi.order.kind != OrderKind::spin_monotone)
        law_family = generating_family(phi.order.kind, phi.domain);
    const auto states = static_cast<std::size_t>(A.rows());
    const auto count = std::min<std::size_t>(states, static_cast<std::size_t>(std::max(options.start_states, 1)));
    for (double t : options.times) {
        Status status = Status::pass;
        nlohmann::json witness;
        double worst_gap = 0.0;
        for (std::size_t k = 0; k < count; ++k) {
            std::size_t start = count == 1 ? 0 : k * (states - 1) / (count - 1);
            auto lower = semigroup_row(A1, start, t);
            auto upper = semigroup_row(A2, start, t);
            auto result = stochastic_dominance(lower, upper, phi.order, law_family);
            worst_gap = std::max(worst_gap, result.gap);
            if (result.verdict == Dominance::not_dominated) {
                status = Status::fail;
                witness = {{"start", start}, {"witness", result.witness}, {"gap", result.gap}};
                break;
            }
            if (result.verdict == Dominance::undecided) status = Status::inconclusive;
        }
        report.add("law_dominance t=" + format_number(t), status, worst_gap, 1e-10, witness);
    }
    return report;
}

Distribution semigroup_row(const GridOperator& op, std::size_t start, double t) {
    const auto n = static_cast<std::size_t>(op.rows());
    if (start >= n) throw std::invalid_argument("start state out of range");
    Vector mu = Vector::Zero(op.rows());
    mu[static_cast<Eigen::Index>(start)] = 1.0;
    Vector row = expm_apply_transpose(op, t, mu);
    Distribution out;
    out.probabilities.resize(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.probabilities[i] = std::max(0.0, row[static_cast<Eigen::Index>(i)]);
        total += out.probabilities[i];
    }
    out.killed = std::max(0.0, 1.0 - total);
    return out;
}

Distribution simulate_ctmc(const GridOperator& op, std::size_t start, double t, std::uint64_t seed,
                           std::size_t paths) {
    if (op.kind() != OperatorKind::generator) throw std::invalid_argument("simulation needs a generator");
    if (t < 0.0) throw std::invalid_argument("simulation time must be non-negative");
    const auto n = static_cast<std::size_t>(op.rows());
    if (start >= n) throw std::invalid_argument("start state out of range");

    // Per state: exit rate, jump targets and cumulative jump rates.
    struct Row {
        double exit = 0.0;
        std::vector<std::size_t> targets;
        std::vector<double> cumulative;
    };
    std::vector<Row> rows(n);
    const auto& matrix = op.matrix();
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (SparseMatrix::InnerIterator it(matrix, static_cast<Eigen::Index>(i)); it; ++it) {
            if (static_cast<std::size_t>(it.col()) == i) {
                rows[i].exit = -it.value();
            } else if (it.value() > 0.0) {
                acc += it.value();
                rows[i].targets.push_back(static_cast<std::size_t>(it.col()));
                rows[i].cumulative.push_back(acc);
            }
        }
        rows[i].exit = std::max(rows[i].exit, acc);
    }
    const std::size_t graveyard = n;

    auto run_path = [&](std::size_t path) {
        std::seed_seq sequence{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                               static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
        std::mt19937_64 rng(sequence);
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        std::size_t state = start;
        double clock = 0.0;
        while (true) {
            const Row& row = rows[state];
            if (row.exit <= 0.0) return state;
            clock += -std::log1p(-uniform(rng)) / row.exit;
            if (clock > t) return state;
            double pick = uniform(rng) * row.exit;
            auto it = std::upper_bound(row.cumulative.begin(), row.cumulative.end(), pick);
            if (it == row.cumulative.end()) return graveyard;
            state = row.targets[static_cast<std::size_t>(it - row.cumulative.begin())];
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), 16));
    std::vector<std::vector<std::uint64_t>> counts(workers, std::vector<std::uint64_t>(n + 1, 0));
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t path = w; path < paths; path += workers) ++counts[w][run_path(path)];
            });
        }
    }
    std::vector<std::uint64_t> merged(n + 1, 0);
    for (const auto& local : counts)
        for (std::size_t i = 0; i <= n; ++i) merged[i] += local[i];
    Distribution out;
    out.probabilities.resize(n);
    const double denom = paths == 0 ? 1.0 : static_cast<double>(paths);
    for (std::size_t i = 0; i < n; ++i) out.probabilities[i] = static_cast<double>(merged[i]) / denom;
    out.killed = static_cast<double>(merged[n]) / denom;
    if (paths == 0) out.probabilities[start] = 1.0;
    return out;
}

double total_variation(const Distribution& p, const Distribution& q) {
    if (p.probabilities.size() != q.probabilities.size()) throw std::invalid_argument("support mismatch");
    double acc = std::abs(p.killed - q.killed);
    for (std::size_t i = 0; i < p.probabilities.size(); ++i) acc += std::abs(p.probabilities[i] - q.probabilities[i]);
    return 0.5 * acc;
}

}  // namespace stochorder
