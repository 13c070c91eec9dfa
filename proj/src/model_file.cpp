#include "stochorder/model_file.hpp"

#include <openssl/sha.h>

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace stochorder {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ModelFileError(where + ": " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) fail(where, "missing field '" + key + "'");
    return obj.at(key);
}

double number(const json& value, const std::string& where) {
    if (value.is_number()) return value.get<double>();
    if (value.is_string()) {
        auto text = value.get<std::string>();
        if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
        if (text == "-inf") return -std::numeric_limits<double>::infinity();
    }
    fail(where, "expected a number (or \"inf\" / \"-inf\")");
}

double finite_number(const json& value, const std::string& where) {
    double out = number(value, where);
    if (!std::isfinite(out)) fail(where, "expected a finite number");
    return out;
}

std::vector<double> number_list(const json& value, const std::string& where) {
    if (!value.is_array() || value.empty()) fail(where, "expected a non-empty array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < value.size(); ++i)
        out.push_back(finite_number(value[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

Expr expression(const json& value, int dim, const std::string& where) {
    if (value.is_number()) return Expr::constant(value.get<double>());
    if (!value.is_string()) fail(where, "expected an expression string");
    try {
        return Expr::parse(value.get<std::string>(), dim);
    } catch (const std::exception& e) {
        fail(where, e.what());
    }
}

int positive_int(const json& value, const std::string& where) {
    if (!value.is_number_integer() || value.get<long long>() <= 0) fail(where, "expected a positive integer");
    return value.get<int>();
}

FellerBoundary parse_boundary(const json& raw, const std::string& where) {
    const json block = raw.is_string() ? json{{"type", raw}} : raw;
    const auto type = require(block, "type", where);
    if (!type.is_string()) fail(where + ".type", "expected a string");
    BoundaryKind kind{};
    try {
        kind = boundary_kind_from_string(type.get<std::string>());
    } catch (const std::exception& e) {
        fail(where + ".type", e.what());
    }
    switch (kind) {
    case BoundaryKind::sticky: return FellerBoundary::sticky(finite_number(require(block, "mass", where), where + ".mass"));
    case BoundaryKind::elastic: return FellerBoundary::elastic(finite_number(require(block, "rate", where), where + ".rate"));
    case BoundaryKind::trap: return FellerBoundary::trap(finite_number(require(block, "gamma", where), where + ".gamma"));
    default: return FellerBoundary{kind, 0.0};
    }
}

OrderSpec parse_order(const json& value, int dim, const std::string& where) {
    auto simple = [&](const std::string& name) -> OrderSpec {
        if (name == "componentwise") return OrderSpec::multi(IndexSet::coordinates(dim));
        if (name == "supermodular") return OrderSpec::multi(IndexSet::pairs(dim));
        try {
            return OrderSpec::simple(order_kind_from_string(name));
        } catch (const std::exception& e) {
            fail(where, e.what());
        }
    };
    if (value.is_string()) {
        auto spec = simple(value.get<std::string>());
        if (spec.kind == OrderKind::multi_index && spec.index_set.members().empty())
            fail(where, "multi_index order needs an index_set");
        return spec;
    }
    const auto& type = require(value, "type", where);
    if (!type.is_string()) fail(where + ".type", "expected a string");
    if (type.get<std::string>() != "multi_index") return simple(type.get<std::string>());
    const auto& set = require(value, "index_set", where);
    if (!set.is_array() || set.empty()) fail(where + ".index_set", "expected a non-empty array of multi-indices");
    std::vector<MultiIndex> members;
    for (const auto& entry : set) {
        if (!entry.is_array() || static_cast<int>(entry.size()) != dim)
            fail(where + ".index_set", "each multi-index needs " + std::to_string(dim) + " entries");
        std::vector<int> digits;
        for (const auto& d : entry) {
            if (!d.is_number_integer()) fail(where + ".index_set", "entries must be integers");
            digits.push_back(d.get<int>());
        }
        members.emplace_back(std::move(digits));
    }
    try {
        return OrderSpec::multi(IndexSet(dim, std::move(members)));
    } catch (const std::exception& e) {
        fail(where + ".index_set", e.what());
    }
}

NumericSettings parse_numeric(const json& root) {
    NumericSettings out;
    if (!root.contains("numeric")) return out;
    const auto& block = root.at("numeric");
    const std::string where = "numeric";
    if (!block.is_object()) fail(where, "expected an object");
    for (const auto& [key, value] : block.items()) {
        const std::string at = where + "." + key;
        if (key == "intervals") {
            out.intervals = positive_int(value, at);
        } else if (key == "grid") {
            if (value.is_number_integer()) {
                out.grid = {positive_int(value, at)};
            } else {
                if (!value.is_array()) fail(at, "expected an integer or an array of integers");
                for (const auto& v : value) out.grid.push_back(positive_int(v, at));
            }
        } else if (key == "lambdas") {
            out.lambdas = number_list(value, at);
        } else if (key == "times") {
            out.times = number_list(value, at);
        } else if (key == "family_size") {
            out.family_size = positive_int(value, at);
        } else if (key == "seed") {
            if (!value.is_number_unsigned()) fail(at, "expected a non-negative integer");
            out.seed = value.get<std::uint64_t>();
        } else if (key == "tolerance") {
            out.tolerance = finite_number(value, at);
        } else if (key == "truncation") {
            out.truncation = finite_number(value, at);
        } else if (key == "paths") {
            out.paths = static_cast<std::size_t>(positive_int(value, at));
        } else if (key == "start") {
            out.start = finite_number(value, at);
        } else if (key == "samples") {
            out.samples = positive_int(value, at);
        } else {
            fail(at, "unknown numeric setting");
        }
    }
    for (double t : out.times)
        if (t < 0.0) fail(where + ".times", "times must be non-negative");
    for (double l : out.lambdas)
        if (l <= 0.0) fail(where + ".lambdas", "lambdas must be positive");
    if (out.tolerance < 0.0) fail(where + ".tolerance", "tolerance must be non-negative");
    return out;
}

void parse_diffusion1d(const json& root, ModelFile& out) {
    DiffusionModel model;
    model.name = out.name;
    const auto& interval = require(root, "interval", "model");
    if (!interval.is_array() || interval.size() != 2) fail("interval", "expected [left, right]");
    model.left = number(interval[0], "interval[0]");
    model.right = number(interval[1], "interval[1]");
    const auto& coeffs = require(root, "coefficients", "model");
    model.a = expression(require(coeffs, "a", "coefficients"), 1, "coefficients.a");
    if (coeffs.contains("b")) model.b = expression(coeffs.at("b"), 1, "coefficients.b");
    if (coeffs.contains("c")) model.c = expression(coeffs.at("c"), 1, "coefficients.c");
    if (root.contains("boundary")) {
        const auto& bc = root.at("boundary");
        if (bc.contains("left")) model.left_bc = parse_boundary(bc.at("left"), "boundary.left");
        if (bc.contains("right")) model.right_bc = parse_boundary(bc.at("right"), "boundary.right");
    }
    if (!std::isfinite(model.left)) model.left_bc = FellerBoundary::natural();
    if (!std::isfinite(model.right)) model.right_bc = FellerBoundary::natural();
    try {
        model.validate();
    } catch (const std::exception& e) {
        fail("model", e.what());
    }
    out.order = root.contains("order") ? parse_order(root.at("order"), 1, "order")
                                       : OrderSpec::simple(OrderKind::increasing);
    if (out.order.kind == OrderKind::multi_index || out.order.kind == OrderKind::spin_monotone)
        fail("order", "1-D diffusions support increasing, convex and increasing_convex");
    out.diffusion = std::move(model);
}

void parse_diffusion_md(const json& root, ModelFile& out) {
    const int dim = positive_int(require(root, "dimension", "model"), "dimension");
    const auto& coeffs = require(root, "coefficients", "model");
    CoefficientField field;
    field.dim = dim;
    const auto& a = require(coeffs, "a", "coefficients");
    if (!a.is_array() || static_cast<int>(a.size()) != dim) fail("coefficients.a", "expected a d×d array");
    for (int i = 0; i < dim; ++i) {
        const auto& row = a[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<int>(row.size()) != dim) fail("coefficients.a", "expected a d×d array");
        std::vector<Expr> parsed;
        for (int j = 0; j < dim; ++j)
            parsed.push_back(expression(row[static_cast<std::size_t>(j)], dim,
                                        "coefficients.a[" + std::to_string(i) + "][" + std::to_string(j) + "]"));
        field.a.push_back(std::move(parsed));
    }
    if (coeffs.contains("b")) {
        const auto& b = coeffs.at("b");
        if (!b.is_array() || static_cast<int>(b.size()) != dim) fail("coefficients.b", "expected d entries");
        for (int i = 0; i < dim; ++i)
            field.b.push_back(expression(b[static_cast<std::size_t>(i)], dim, "coefficients.b[" + std::to_string(i) + "]"));
    } else {
        field.b.assign(static_cast<std::size_t>(dim), Expr::constant(0.0));
    }
    if (coeffs.contains("c")) field.c = expression(coeffs.at("c"), dim, "coefficients.c");
    try {
        field.validate();
    } catch (const std::exception& e) {
        fail("coefficients", e.what());
    }

    SampleBox box = SampleBox::cube(dim, 0.0, 1.0, out.numeric.samples);
    if (root.contains("box")) {
        const auto& block = root.at("box");
        box.lower = number_list(require(block, "lower", "box"), "box.lower");
        box.upper = number_list(require(block, "upper", "box"), "box.upper");
        if (static_cast<int>(box.lower.size()) != dim || static_cast<int>(box.upper.size()) != dim)
            fail("box", "lower and upper need one entry per dimension");
        for (int i = 0; i < dim; ++i)
            if (!(box.lower[static_cast<std::size_t>(i)] < box.upper[static_cast<std::size_t>(i)]))
                fail("box", "lower must be below upper on every axis");
    }
    if (!out.numeric.grid.empty() && out.numeric.grid.size() != 1 && static_cast<int>(out.numeric.grid.size()) != dim)
        fail("numeric.grid", "give one size or one per dimension");
    out.order = parse_order(require(root, "order", "model"), dim, "order");
    if (out.order.kind != OrderKind::multi_index) fail("order", "multi-dimensional models need a multi-index order");
    out.field = std::move(field);
    out.box = std::move(box);
}

void parse_spin_system(const json& root, ModelFile& out) {
    const int sites = positive_int(require(root, "sites", "model"), "sites");
    if (sites > 62) fail("sites", "at most 62 sites are supported");
    const auto& rule_block = require(root, "rule", "model");
    const json rule = rule_block.is_string() ? json{{"name", rule_block}} : rule_block;
    const auto& name = require(rule, "name", "rule");
    if (!name.is_string()) fail("rule.name", "expected a string");
    SpinRule kind{};
    try {
        kind = spin_rule_from_string(name.get<std::string>());
    } catch (const std::exception& e) {
        fail("rule.name", e.what());
    }

    try {
        if (kind == SpinRule::custom) {
            const auto& table = require(rule, "rates", "rule");
            if (!table.is_array() || static_cast<int>(table.size()) != sites)
                fail("rule.rates", "expected one rate list per site");
            std::vector<std::vector<double>> rates;
            for (std::size_t i = 0; i < table.size(); ++i)
                rates.push_back(number_list(table[i], "rule.rates[" + std::to_string(i) + "]"));
            out.spins = SpinSystem::custom(sites, std::move(rates));
        } else {
            SpinParameters params;
            if (rule.contains("infection")) params.infection = finite_number(rule.at("infection"), "rule.infection");
            if (rule.contains("beta")) params.beta = finite_number(rule.at("beta"), "rule.beta");
            if (rule.contains("up")) params.up = finite_number(rule.at("up"), "rule.up");
            if (rule.contains("down")) params.down = finite_number(rule.at("down"), "rule.down");
            const auto& graph = require(root, "graph", "model");
            std::vector<std::pair<int, int>> edges;
            if (graph.is_string() || (graph.is_object() && graph.contains("type"))) {
                const auto type = graph.is_string() ? graph.get<std::string>() : graph.at("type").get<std::string>();
                if (type == "path") {
                    for (int i = 0; i + 1 < sites; ++i) edges.emplace_back(i, i + 1);
                } else if (type == "cycle") {
                    for (int i = 0; i + 1 < sites; ++i) edges.emplace_back(i, i + 1);
                    if (sites > 2) edges.emplace_back(sites - 1, 0);
                } else if (type == "complete") {
                    for (int i = 0; i < sites; ++i)
                        for (int j = i + 1; j < sites; ++j) edges.emplace_back(i, j);
                } else {
                    fail("graph.type", "expected path, cycle or complete");
                }
            } else {
                const auto& list = graph.is_array() ? graph : require(graph, "edges", "graph");
                if (!list.is_array()) fail("graph.edges", "expected an array of [i, j] pairs");
                for (const auto& e : list) {
                    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
                        fail("graph.edges", "expected an array of [i, j] pairs");
                    edges.emplace_back(e[0].get<int>(), e[1].get<int>());
                }
            }
            out.spins.emplace(sites, std::move(edges), kind, params);
        }
    } catch (const ModelFileError&) {
        throw;
    } catch (const std::exception& e) {
        fail("spin system", e.what());
    }

    out.initial.assign(static_cast<std::size_t>(sites), 0);
    if (root.contains("initial")) {
        const auto& init = root.at("initial");
        if (!init.is_array() || static_cast<int>(init.size()) != sites) fail("initial", "expected one spin per site");
        for (std::size_t i = 0; i < init.size(); ++i) {
            if (!init[i].is_number_integer() || (init[i].get<int>() != 0 && init[i].get<int>() != 1))
                fail("initial", "spins must be 0 or 1");
            out.initial[i] = static_cast<std::uint8_t>(init[i].get<int>());
        }
    }
    out.order = OrderSpec::simple(OrderKind::spin_monotone);
    if (root.contains("order")) {
        auto spec = parse_order(root.at("order"), 1, "order");
        if (spec.kind != OrderKind::spin_monotone) fail("order", "spin systems use the spin_monotone order");
    }
}

}  // namespace

std::string to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::diffusion1d: return "diffusion1d";
    case ModelKind::diffusion_md: return "diffusion_md";
    case ModelKind::spin_system: return "spin_system";
    }
    return "unknown";
}

OrderSpec order_from_name(const std::string& name, int dim) {
    return parse_order(json(name), dim, "--order");
}

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
    SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest.data());
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * digest.size());
    for (unsigned char byte : digest) {
        out += hex[byte >> 4];
        out += hex[byte & 0xF];
    }
    return out;
}

ModelFile parse_model(std::string_view text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ModelFileError(std::string("invalid JSON: ") + e.what());
    }
    if (!root.is_object()) fail("model", "top level must be an object");
    const auto& version = require(root, "schema_version", "model");
    if (!version.is_number_integer() || version.get<int>() != model_schema_version)
        fail("schema_version", "unsupported version (expected " + std::to_string(model_schema_version) + ")");

    ModelFile out;
    out.input_hash = sha256_hex(text);
    const auto& kind = require(root, "kind", "model");
    if (!kind.is_string()) fail("kind", "expected a string");
    if (root.contains("name")) {
        if (!root.at("name").is_string()) fail("name", "expected a string");
        out.name = root.at("name").get<std::string>();
    }
    out.numeric = parse_numeric(root);

    const auto kind_name = kind.get<std::string>();
    try {
        if (kind_name == "diffusion1d") {
            out.kind = ModelKind::diffusion1d;
            parse_diffusion1d(root, out);
        } else if (kind_name == "diffusion_md") {
            out.kind = ModelKind::diffusion_md;
            parse_diffusion_md(root, out);
        } else if (kind_name == "spin_system") {
            out.kind = ModelKind::spin_system;
            parse_spin_system(root, out);
        } else {
            fail("kind", "expected diffusion1d, diffusion_md or spin_system");
        }
    } catch (const json::exception& e) {
        throw ModelFileError(std::string("malformed field: ") + e.what());
    }
    return out;
}

ModelFile load_model_file(const std::string& path) {
    auto ends_with = [&](std::string_view suffix) {
        return path.size() >= suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(".toml"))
        throw ModelFileError(path + ": TOML input is not read directly; convert it with tools/toml2json.py first");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelFileError(path + ": cannot open file");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_model(buffer.str());
    } catch (const ModelFileError& e) {
        throw ModelFileError(path + ": " + e.what());
    }
}

}  // namespace stochorder
