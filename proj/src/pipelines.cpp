#include "stochorder/pipelines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace stochorder {

using nlohmann::json;

namespace {

constexpr int curve_steps = 20;

std::string number_label(double value) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.15g", value);
    return buffer;
}

json base_report(const ModelFile& model, const std::string& command) {
    return json{{"schema_version", model_schema_version},
                {"command", command},
                {"input_hash", model.input_hash},
                {"model", model.name},
                {"kind", to_string(model.kind)}};
}

json order_json(const OrderSpec& order) {
    json out{{"kind", to_string(order.kind)}};
    if (order.kind == OrderKind::multi_index) {
        out["index_set"] = json::array();
        for (const auto& m : order.index_set.members()) out["index_set"].push_back(m.entries());
    }
    return out;
}

std::vector<double> curve_times(const std::vector<double>& times) {
    double horizon = times.empty() ? 1.0 : *std::max_element(times.begin(), times.end());
    if (!(horizon > 0.0)) horizon = 1.0;
    std::vector<double> out;
    for (int k = 0; k <= curve_steps; ++k) out.push_back(horizon * k / curve_steps);
    return out;
}

/// min over the family of the smallest entry of Φ e^{tA} f, for each t.
std::vector<CurvePoint> margin_curve(const GridOperator& generator, const DiscreteOrderMap& phi,
                                     const TestFamily& family, const std::vector<double>& times) {
    std::vector<CurvePoint> rows;
    for (double t : times) {
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& f : family.functions) {
            Vector image = phi.phi.apply(expm_apply(generator, t, f));
            if (image.size() > 0) worst = std::min(worst, image.minCoeff());
        }
        rows.push_back({t, "min_phi_S_f", std::isfinite(worst) ? worst : 0.0});
    }
    return rows;
}

Verdict verdict_of(Status status) {
    switch (status) {
    case Status::pass: return Verdict::certified;
    case Status::fail: return Verdict::refuted;
    case Status::inconclusive: return Verdict::inconclusive;
    }
    return Verdict::inconclusive;
}

// ---- classification -------------------------------------------------------

json classify_json(const DiffusionModel& model, bool& undecided) {
    json out{{"classification", json::object()},
             {"exit", json::object()},
             {"entrance", json::object()},
             {"details", json::object()}};
    for (auto side : {Endpoint::left, Endpoint::right}) {
        auto cls = classify_boundary(model, side);
        const auto key = number_label(model.endpoint(side));
        out["classification"][key] = to_string(cls.kind);
        out["exit"][key] = cls.kind == BoundaryClass::exit || cls.kind == BoundaryClass::regular;
        out["entrance"][key] = cls.kind == BoundaryClass::entrance || cls.kind == BoundaryClass::regular;
        out["details"][key] = cls.to_json();
        if (cls.kind == BoundaryClass::undecided) undecided = true;
    }
    return out;
}

// ---- 1-D check ------------------------------------------------------------

PipelineResult check_diffusion1d(const ModelFile& file, const CheckSettings& settings) {
    const auto& model = *file.diffusion;
    const OrderSpec order = settings.order.value_or(file.order);
    if (order.kind == OrderKind::multi_index || order.kind == OrderKind::spin_monotone)
        throw ModelFileError("order: 1-D diffusions support increasing, convex and increasing_convex");

    PipelineResult out;
    out.report = base_report(file, "check");
    out.report["order"] = order_json(order);

    if (degenerate_at_boundary(model)) {
        bool undecided = false;
        out.report["boundaries"] = classify_json(model, undecided);
        try {
            out.report["derivation"] = derivation_json(derive_BC(model, order.kind));
        } catch (const std::exception& e) {
            out.report["derivation"] = json{{"error", e.what()}};
        }
        out.verdict = Verdict::inconclusive;
        out.reason = "diffusion coefficient vanishes at a finite endpoint; boundaries are classified and the "
                     "intertwining operators derived, but no certificate is attempted for the degenerate operator";
        out.report["verdict"] = to_string(out.verdict);
        out.report["reason"] = out.reason;
        return out;
    }

    const auto options = certify_options(file.numeric);
    auto cert = certify_monotonicity(model, order.kind, file.numeric.intervals, options, file.numeric.truncation);
    out.verdict = cert.verdict;
    out.reason = cert.reason;
    out.report["derivation"] = derivation_json(derive_BC(model, order.kind));
    out.report["certificate"] = cert.to_json();
    out.report["verdict"] = to_string(out.verdict);
    out.report["reason"] = out.reason;

    if (settings.curves) {
        auto grid = Grid::for_model(model, file.numeric.intervals, file.numeric.truncation);
        auto generator = build_generator(model, grid);
        auto phi = build_phi(order.kind, grid);
        auto family = generate_test_family(order, phi.domain, file.numeric.family_size, file.numeric.seed);
        out.curves = margin_curve(generator, phi, family, curve_times(file.numeric.times));
    }
    return out;
}

// ---- multi-D check --------------------------------------------------------

SampleBox sampling_box(const ModelFile& file) {
    SampleBox box = *file.box;
    box.count = file.numeric.samples;
    return box;
}

PipelineResult check_diffusion_md(const ModelFile& file, const CheckSettings& settings) {
    const OrderSpec order = settings.order.value_or(file.order);
    if (order.kind != OrderKind::multi_index || order.index_set.dim() != file.field->dim)
        throw ModelFileError("order: multi-dimensional models need a multi-index order of matching dimension");
    PipelineResult out;
    out.report = base_report(file, "check");
    out.report["order"] = order_json(order);
    const auto box = sampling_box(file);
    auto cert = certify_monotonicity_md(*file.field, order.index_set, box, file.numeric.grid,
                                        certify_options(file.numeric), file.name);
    out.verdict = cert.verdict;
    out.reason = cert.reason;
    out.report["certificate"] = cert.to_json();
    out.report["verdict"] = to_string(out.verdict);
    out.report["reason"] = out.reason;

    if (settings.curves && file.field->dim <= 2) {
        try {
            auto grid = tensor_grid_for(*file.box, file.numeric.grid);
            auto generator = build_generator_md(*file.field, grid);
            auto phi = build_phi_md(order.index_set, grid);
            auto family = generate_test_family(order, phi.domain, file.numeric.family_size, file.numeric.seed);
            out.curves = margin_curve(generator, phi, family, curve_times(file.numeric.times));
        } catch (const std::domain_error&) {
            // No monotone stencil on this grid; the certificate already says so.
        }
    }
    return out;
}

// ---- spin check -----------------------------------------------------------

PreservationOptions preservation_options(const ModelFile& file) {
    PreservationOptions options;
    options.times = file.numeric.times;
    options.seed = file.numeric.seed;
    options.random_functions = std::max(file.numeric.family_size, 50);
    options.mode = file.spins->sites() <= 4 ? PreservationMode::exhaustive : PreservationMode::randomized;
    return options;
}

PipelineResult check_spin(const ModelFile& file, const CheckSettings& settings) {
    PipelineResult out;
    out.report = base_report(file, "check");
    out.report["order"] = order_json(OrderSpec::simple(OrderKind::spin_monotone));
    const auto options = preservation_options(file);
    auto cert = certify_spin_system(*file.spins, options);
    out.verdict = cert.verdict;
    out.reason = cert.reason;
    out.report["certificate"] = cert.to_json();
    out.report["verdict"] = to_string(out.verdict);
    out.report["reason"] = out.reason;

    if (settings.curves && file.spins->sites() <= ips_matrix_site_limit) {
        auto curve_options = options;
        curve_options.times = curve_times(file.numeric.times);
        auto scan = verify_monotone_preservation(*file.spins, curve_options);
        for (std::size_t k = 0; k < scan.entries().size(); ++k)
            out.curves.push_back({curve_options.times[k], "min_covering_gap", scan.entries()[k].value});
    }
    return out;
}

// ---- comparison -----------------------------------------------------------

/// Sampled `lower ≤ upper` (or equality) between two 1-D coefficients.
void compare_coefficients(VerificationReport& report, const std::string& name, const Expr& lower, const Expr& upper,
                          bool equality, const std::vector<double>& points) {
    const Expr difference = upper - lower;
    if (equality && is_identically_zero(difference)) {
        report.add(name, Status::pass, 0.0, 0.0, {}, "proven zero");
        return;
    }
    double worst = std::numeric_limits<double>::infinity();
    double at = 0.0;
    for (double x : points) {
        double v = difference.evaluate(x);
        double score = equality ? -std::abs(v) : v;
        if (score < worst) {
            worst = score;
            at = x;
        }
    }
    constexpr double tol = 1e-12;
    bool holds = worst >= -tol;
    std::string note = equality ? (holds ? "numerically zero (unproven)" : "") : "sampled on the grid";
    report.add(name, holds ? Status::pass : Status::fail, worst, tol,
               holds ? json() : json{{"x", at}, {"lower", lower.evaluate(at)}, {"upper", upper.evaluate(at)}}, note);
}

bool same_gamma(double lhs, double rhs) {
    if (std::isinf(lhs) || std::isinf(rhs)) return lhs == rhs;
    return std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs));
}

/// Verdict of a comparison report: refuted only when an ordering or law entry
/// failed (a concrete counterexample); hypothesis failures alone are inconclusive.
std::pair<Verdict, std::string> comparison_verdict(const VerificationReport& report) {
    for (const auto& entry : report.entries()) {
        if (entry.status != Status::fail) continue;
        if (entry.check.find("ordering") != std::string::npos || entry.check.find("law_dominance") != std::string::npos)
            return {Verdict::refuted, "counterexample: " + entry.check};
    }
    if (const auto* failed = report.first(Status::fail))
        return {Verdict::inconclusive, "unmet sufficient condition: " + failed->check};
    if (const auto* open = report.first(Status::inconclusive))
        return {Verdict::inconclusive, "undecided: " + open->check};
    return {Verdict::certified, ""};
}

PipelineResult compare_diffusion1d(const ModelFile& f1, const ModelFile& f, const ModelFile& f2, const OrderSpec& order) {
    const auto& lower = *f1.diffusion;
    const auto& middle = *f.diffusion;
    const auto& upper = *f2.diffusion;
    if (lower.left != middle.left || upper.left != middle.left || lower.right != middle.right ||
        upper.right != middle.right)
        throw ModelFileError("compare: the three models must share the interval");
    if (order.kind == OrderKind::multi_index || order.kind == OrderKind::spin_monotone)
        throw ModelFileError("order: 1-D diffusions support increasing, convex and increasing_convex");

    auto grid = Grid::for_model(middle, f.numeric.intervals, f.numeric.truncation);
    VerificationReport report("compare");

    // Continuum hypotheses on the coefficients, sampled at the grid points.
    const bool a_ordered = order.kind != OrderKind::increasing;
    const bool b_ordered = order.kind != OrderKind::convex;
    for (const auto& [tag, lo, hi] : {std::tuple{"lower_middle", &lower, &middle}, std::tuple{"middle_upper", &middle, &upper}}) {
        const std::string prefix = std::string(tag) + ".";
        compare_coefficients(report, prefix + (a_ordered ? "a_ordered" : "a_equal"), lo->a, hi->a, !a_ordered,
                             grid.points);
        compare_coefficients(report, prefix + (b_ordered ? "b_ordered" : "b_equal"), lo->b, hi->b, !b_ordered,
                             grid.points);
        compare_coefficients(report, prefix + "c_equal", lo->c, hi->c, true, grid.points);
        for (auto side : {Endpoint::left, Endpoint::right}) {
            if (!std::isfinite(middle.endpoint(side))) continue;
            double g_lo = lo->gamma(side);
            double g_hi = hi->gamma(side);
            bool same = same_gamma(g_lo, g_hi);
            report.add(prefix + "gamma_" + to_string(side), same ? Status::pass : Status::fail, 0.0, 1e-12,
                       same ? json() : json{{"lower", number_label(g_lo)}, {"upper", number_label(g_hi)}});
        }
    }
    auto derivation = derive_BC(middle, order.kind);
    report.merge(derivation.admissibility, "middle.derive_BC");
    if (order.kind == OrderKind::convex) {
        bool affine = is_identically_zero(differentiate(differentiate(middle.b, 0), 0));
        report.add("middle.b_affine", affine ? Status::pass : Status::fail);
    }

    // Discrete comparison on a common grid.
    auto A1 = build_generator(lower, grid);
    auto A = build_generator(middle, grid);
    auto A2 = build_generator(upper, grid);
    auto phi = build_phi(order.kind, grid);
    auto family = generate_test_family(order, phi.domain, std::max(f.numeric.family_size, 50), f.numeric.seed);
    ComparisonOptions options;
    options.times = f.numeric.times;
    options.tolerance = f.numeric.tolerance;
    report.merge(verify_comparison(A1, A, A2, phi, family, options), "discrete");
    report.metrics()["grid_points"] = grid.size();

    PipelineResult out;
    std::tie(out.verdict, out.reason) = comparison_verdict(report);
    out.report = base_report(f, "compare");
    out.report["input_hashes"] = {f1.input_hash, f.input_hash, f2.input_hash};
    out.report["models"] = {f1.name, f.name, f2.name};
    out.report["order"] = order_json(order);
    out.report["comparison"] = report.to_json();
    out.report["verdict"] = to_string(out.verdict);
    out.report["reason"] = out.reason;
    return out;
}

PipelineResult compare_diffusion_md(const ModelFile& f1, const ModelFile& f, const ModelFile& f2, const OrderSpec& order) {
    const int dim = f.field->dim;
    if (f1.field->dim != dim || f2.field->dim != dim) throw ModelFileError("compare: dimensions differ");
    if (order.kind != OrderKind::multi_index || order.index_set.dim() != dim)
        throw ModelFileError("order: multi-dimensional comparison needs a multi-index order of matching dimension");
    const auto box = sampling_box(f);
    VerificationReport report("compare");
    auto ledger = check_comparison_md(*f1.field, *f.field, *f2.field, order.index_set, box);
    report.merge(ledger.report, "coefficients");
    auto middle = check_gammabed(*f.field, order.index_set, box);
    report.merge(middle.report, "middle.gammabed");

    if (dim <= 2) {
        auto grid = tensor_grid_for(*f.box, f.numeric.grid);
        try {
            auto A1 = build_generator_md(*f1.field, grid);
            auto A = build_generator_md(*f.field, grid);
            auto A2 = build_generator_md(*f2.field, grid);
            auto phi = build_phi_md(order.index_set, grid);
            auto family = generate_test_family(order, phi.domain, std::max(f.numeric.family_size, 50), f.numeric.seed);
            ComparisonOptions options;
            options.times = f.numeric.times;
            options.tolerance = f.numeric.tolerance;
            report.merge(verify_comparison(A1, A, A2, phi, family, options), "discrete");
        } catch (const std::domain_error& e) {
            report.add("discrete.stencil", Status::inconclusive, 0.0, 0.0, {}, e.what());
        }
    }
    PipelineResult out;
    std::tie(out.verdict, out.reason) = comparison_verdict(report);
    out.report = base_report(f, "compare");
    out.report["input_hashes"] = {f1.input_hash, f.input_hash, f2.input_hash};
    out.report["models"] = {f1.name, f.name, f2.name};
    out.report["order"] = order_json(order);
    out.report["obligations"] = ledger.to_json();
    out.report["comparison"] = report.to_json();
    out.report["verdict"] = to_string(out.verdict);
    out.report["reason"] = out.reason;
    return out;
}

// ---- simulation -----------------------------------------------------------

std::size_t nearest_index(const std::vector<double>& points, double x) {
    auto it = std::lower_bound(points.begin(), points.end(), x);
    if (it == points.end()) return points.size() - 1;
    auto i = static_cast<std::size_t>(it - points.begin());
    if (i > 0 && x - points[i - 1] < *it - x) --i;
    return i;
}

void grid_simulation(PipelineResult& out, const GridOperator& generator, const std::vector<double>& coordinate,
                     std::size_t start, double t, std::size_t paths, std::uint64_t seed) {
    auto empirical = simulate_ctmc(generator, start, t, seed, paths);
    auto mean = [&](const Distribution& d) {
        double total = 0.0;
        for (std::size_t i = 0; i < d.probabilities.size(); ++i) total += d.probabilities[i] * coordinate[i];
        return total;
    };
    out.curves.push_back({t, "empirical_mean", mean(empirical)});
    out.curves.push_back({t, "empirical_killed", empirical.killed});
    json summary{{"start_index", start}, {"t", t}, {"paths", paths}, {"seed", seed},
                 {"empirical_mean", mean(empirical)}, {"empirical_killed", empirical.killed}};
    if (generator.rows() <= expm_dimension_limit) {
        auto exact = semigroup_row(generator, start, t);
        double tv = total_variation(empirical, exact);
        out.curves.push_back({t, "expm_mean", mean(exact)});
        out.curves.push_back({t, "expm_killed", exact.killed});
        out.curves.push_back({t, "total_variation", tv});
        for (std::size_t i = 0; i < exact.probabilities.size(); ++i) {
            out.curves.push_back({t, "p_empirical[" + std::to_string(i) + "]", empirical.probabilities[i]});
            out.curves.push_back({t, "p_expm[" + std::to_string(i) + "]", exact.probabilities[i]});
        }
        summary["expm_mean"] = mean(exact);
        summary["expm_killed"] = exact.killed;
        summary["total_variation"] = tv;
    } else {
        for (std::size_t i = 0; i < empirical.probabilities.size(); ++i)
            out.curves.push_back({t, "p_empirical[" + std::to_string(i) + "]", empirical.probabilities[i]});
        summary["note"] = "state space too large for the matrix exponential comparison";
    }
    out.report["simulation"] = summary;
}

}  // namespace

std::string curves_csv(const std::vector<CurvePoint>& rows) {
    std::string out = "t,quantity,value\n";
    char buffer[64];
    for (const auto& row : rows) {
        std::snprintf(buffer, sizeof buffer, "%.17g", row.t);
        out += buffer;
        out += ',';
        out += row.quantity;
        out += ',';
        std::snprintf(buffer, sizeof buffer, "%.17g", row.value);
        out += buffer;
        out += '\n';
    }
    return out;
}

int exit_code(Verdict verdict) {
    switch (verdict) {
    case Verdict::certified: return 0;
    case Verdict::refuted: return 1;
    case Verdict::inconclusive: return 3;
    }
    return 3;
}

json derivation_json(const IntertwinerDerivation& derivation) {
    json out{{"order", to_string(derivation.order)}, {"b_operators", json::array()}, {"c_operator", json::array()},
             {"b_boundaries", json::array()}};
    for (const auto& op : derivation.b_operators)
        out["b_operators"].push_back({{"a", op.a.to_string()}, {"b", op.b.to_string()}, {"c", op.c.to_string()}});
    for (const auto& row : derivation.c_operator) {
        json cells = json::array();
        for (const auto& cell : row) cells.push_back(cell.to_string());
        out["c_operator"].push_back(cells);
    }
    for (const auto& list : derivation.b_boundaries) {
        json relations = json::array();
        for (const auto& rel : list) {
            json r{{"side", to_string(rel.side)}, {"relation", rel.relation}};
            if (rel.relation == "robin") r["gamma"] = number_label(rel.gamma);
            relations.push_back(r);
        }
        out["b_boundaries"].push_back(relations);
    }
    out["admissibility"] = derivation.admissibility.to_json();
    return out;
}

bool degenerate_at_boundary(const DiffusionModel& model) {
    for (auto side : {Endpoint::left, Endpoint::right}) {
        double e = model.endpoint(side);
        if (!std::isfinite(e)) continue;
        try {
            if (std::abs(model.a.evaluate(e)) <= 1e-14) return true;
        } catch (const DomainError&) {
            return true;
        }
    }
    return false;
}

CertifyOptions certify_options(const NumericSettings& numeric) {
    CertifyOptions options;
    options.lambdas = numeric.lambdas;
    options.times = numeric.times;
    options.family_size = numeric.family_size;
    options.seed = numeric.seed;
    options.tolerance = numeric.tolerance;
    return options;
}

// ---- multi-D certificate --------------------------------------------------

TensorGrid tensor_grid_for(const SampleBox& box, const std::vector<int>& points_per_axis) {
    const auto dim = box.lower.size();
    TensorGrid grid;
    for (std::size_t i = 0; i < dim; ++i) {
        int points = 24;
        if (points_per_axis.size() == 1) points = points_per_axis[0];
        else if (points_per_axis.size() == dim) points = points_per_axis[i];
        if (points < 5) throw ModelFileError("numeric.grid: need at least 5 points per axis");
        grid.axes.push_back(Grid::uniform(box.lower[i], box.upper[i], points - 1));
    }
    return grid;
}

json MultiDCertificate::to_json() const {
    json out{{"verdict", stochorder::to_string(verdict)}, {"reason", reason}, {"obligations", ledger.to_json()}};
    out["discrete"] = discrete ? discrete->to_json() : json();
    return out;
}

MultiDCertificate certify_monotonicity_md(const CoefficientField& coeffs, const IndexSet& index_set,
                                          const SampleBox& box, const std::vector<int>& points_per_axis,
                                          const CertifyOptions& options, const std::string& model_id) {
    MultiDCertificate out;
    out.ledger = check_gammabed(coeffs, index_set, box);
    std::string stencil_note;
    if (coeffs.dim <= 2) {
        auto grid = tensor_grid_for(box, points_per_axis);
        try {
            auto generator = build_generator_md(coeffs, grid);
            auto phi = build_phi_md(index_set, grid);
            out.discrete = certify_discrete(generator, phi, options, model_id);
        } catch (const std::domain_error& e) {
            stencil_note = e.what();
        }
    }

    const auto violated = out.ledger.violated();
    const bool ledger_open = out.ledger.report.overall() != Status::pass;
    if (out.discrete && out.discrete->verdict == Verdict::refuted) {
        out.verdict = Verdict::refuted;
        out.reason = out.discrete->reason;
    } else if (violated > 0 || ledger_open) {
        const auto* entry = out.ledger.report.first(Status::fail);
        if (!entry) entry = out.ledger.report.first(Status::inconclusive);
        out.verdict = Verdict::inconclusive;
        out.reason = "unmet sufficient condition: " + (entry ? entry->check : std::string("obligation ledger"));
    } else if (out.discrete && out.discrete->verdict != Verdict::certified) {
        out.verdict = Verdict::inconclusive;
        out.reason = "discrete check: " + out.discrete->reason;
    } else if (!stencil_note.empty()) {
        out.verdict = Verdict::inconclusive;
        out.reason = "no monotone discretisation: " + stencil_note;
    } else {
        out.verdict = Verdict::certified;
        out.reason = out.discrete ? "" : "coefficient condition only (no discrete check above two dimensions)";
    }
    return out;
}

// ---- spin certificate -----------------------------------------------------

json SpinCertificate::to_json() const {
    return json{{"verdict", stochorder::to_string(verdict)},
                {"reason", reason},
                {"attractive", attractive.to_json()},
                {"intertwining_residual", intertwining_residual},
                {"rate_constants", constants.to_json()},
                {"preservation", preservation.to_json()}};
}

SpinCertificate certify_spin_system(const SpinSystem& sys, const PreservationOptions& options) {
    SpinCertificate out;
    out.attractive = check_attractive(sys);
    out.constants = rate_constants(sys);
    const bool attractive = out.attractive.passed();
    if (sys.sites() > ips_matrix_site_limit) {
        out.preservation.add("matrix_checks", Status::inconclusive, 0.0, 0.0, {},
                             "more than " + std::to_string(ips_matrix_site_limit) + " sites");
        out.verdict = attractive ? Verdict::certified : Verdict::inconclusive;
        out.reason = attractive ? "attractive rates; matrix checks skipped for this many sites"
                                : "rates are not attractive and the system is too large for matrix checks";
        return out;
    }
    auto preservation_options = options;
    if (sys.sites() > 4) preservation_options.mode = PreservationMode::randomized;
    out.preservation = verify_monotone_preservation(sys, preservation_options);
    bool exact = true;
    if (sys.sites() <= 8) {
        out.intertwining_residual = exact_intertwining_residual(build_matrices(sys));
        exact = out.intertwining_residual == 0.0;
    }
    if (const auto* failed = out.preservation.first(Status::fail)) {
        out.verdict = Verdict::refuted;
        out.reason = "monotone function loses monotonicity: " + failed->check;
    } else if (!attractive) {
        out.verdict = Verdict::inconclusive;
        out.reason = "unmet sufficient condition: attractiveness";
    } else if (!exact) {
        out.verdict = Verdict::inconclusive;
        out.reason = "intertwining residual is not zero";
    } else {
        out.verdict = verdict_of(out.preservation.overall());
    }
    return out;
}

// ---- commands -------------------------------------------------------------

PipelineResult run_classify(const ModelFile& model) {
    if (model.kind != ModelKind::diffusion1d) throw ModelFileError("classify needs a diffusion1d model");
    PipelineResult out;
    out.report = base_report(model, "classify");
    bool undecided = false;
    out.report.update(classify_json(*model.diffusion, undecided));
    out.verdict = undecided ? Verdict::inconclusive : Verdict::certified;
    out.reason = undecided ? "at least one endpoint is undecided" : "";
    return out;
}

PipelineResult run_check(const ModelFile& model, const CheckSettings& settings) {
    switch (model.kind) {
    case ModelKind::diffusion1d: return check_diffusion1d(model, settings);
    case ModelKind::diffusion_md: return check_diffusion_md(model, settings);
    case ModelKind::spin_system: return check_spin(model, settings);
    }
    throw ModelFileError("unknown model kind");
}

PipelineResult run_compare(const ModelFile& lower, const ModelFile& middle, const ModelFile& upper,
                           std::optional<OrderSpec> order) {
    if (lower.kind != middle.kind || upper.kind != middle.kind)
        throw ModelFileError("compare: the three models must be of the same kind");
    const OrderSpec chosen = order.value_or(middle.order);
    switch (middle.kind) {
    case ModelKind::diffusion1d: return compare_diffusion1d(lower, middle, upper, chosen);
    case ModelKind::diffusion_md: return compare_diffusion_md(lower, middle, upper, chosen);
    case ModelKind::spin_system: break;
    }
    throw ModelFileError("compare supports diffusion1d and diffusion_md models");
}

PipelineResult run_simulate(const ModelFile& model, const SimulateSettings& settings) {
    const double t = settings.t.value_or(model.numeric.times.empty() ? 1.0 : model.numeric.times.back());
    const std::size_t paths = settings.paths.value_or(model.numeric.paths);
    const std::uint64_t seed = settings.seed.value_or(model.numeric.seed);
    if (!(t >= 0.0)) throw ModelFileError("--t must be non-negative");
    PipelineResult out;
    out.report = base_report(model, "simulate");
    out.verdict = Verdict::certified;

    switch (model.kind) {
    case ModelKind::diffusion1d: {
        auto grid = Grid::for_model(*model.diffusion, model.numeric.intervals, model.numeric.truncation);
        auto generator = build_generator(*model.diffusion, grid);
        double where = model.numeric.start.value_or(0.5 * (grid.points.front() + grid.points.back()));
        grid_simulation(out, generator, grid.points, nearest_index(grid.points, where), t, paths, seed);
        break;
    }
    case ModelKind::diffusion_md: {
        if (model.field->dim > 2) throw ModelFileError("simulate supports at most two dimensions");
        auto grid = tensor_grid_for(*model.box, model.numeric.grid);
        auto generator = build_generator_md(*model.field, grid);
        auto shape = grid.shape();
        // Flattened row-major start at the centre cell; the curve coordinate is the first axis.
        std::size_t start = 0;
        for (std::size_t axis = 0; axis < shape.size(); ++axis) start = start * shape[axis] + shape[axis] / 2;
        std::vector<double> first_axis(grid.size());
        const std::size_t stride = grid.size() / shape[0];
        for (std::size_t i = 0; i < grid.size(); ++i) first_axis[i] = grid.axes[0].points[i / stride];
        grid_simulation(out, generator, first_axis, start, t, paths, seed);
        break;
    }
    case ModelKind::spin_system: {
        const auto& sys = *model.spins;
        auto stats = gillespie(sys, model.initial, t, seed, paths);
        json summary{{"t", t}, {"paths", paths}, {"seed", seed}, {"initial", model.initial},
                     {"marginal_mean", stats.marginal_mean}, {"marginal_stderr", stats.marginal_stderr}};
        std::vector<double> exact;
        if (sys.sites() <= ips_matrix_site_limit) {
            auto matrices = build_matrices(sys);
            auto row = semigroup_row(matrices.A, config_to_mask(model.initial), t);
            exact.assign(static_cast<std::size_t>(sys.sites()), 0.0);
            for (std::size_t mask = 0; mask < row.probabilities.size(); ++mask)
                for (int i = 0; i < sys.sites(); ++i)
                    if (mask >> i & 1U) exact[static_cast<std::size_t>(i)] += row.probabilities[mask];
            summary["expm_marginal"] = exact;
        }
        for (int i = 0; i < sys.sites(); ++i) {
            const auto k = static_cast<std::size_t>(i);
            const std::string site = "[" + std::to_string(i) + "]";
            out.curves.push_back({t, "mean_empirical" + site, stats.marginal_mean[k]});
            out.curves.push_back({t, "stderr" + site, stats.marginal_stderr[k]});
            if (!exact.empty()) out.curves.push_back({t, "mean_expm" + site, exact[k]});
        }
        out.report["simulation"] = summary;
        break;
    }
    }
    return out;
}

}  // namespace stochorder
