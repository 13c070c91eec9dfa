#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stochorder/diffusion1d.hpp"
#include "stochorder/ips.hpp"
#include "stochorder/multid.hpp"
#include "stochorder/order.hpp"

namespace stochorder {

/// Schema or content problem in a model file (CLI exit code 2).
class ModelFileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ModelKind { diffusion1d, diffusion_md, spin_system };
std::string to_string(ModelKind kind);

constexpr int model_schema_version = 1;

struct NumericSettings {
    int intervals = 100;                // 1-D grid intervals
    std::vector<int> grid;              // points per axis for d = 2
    std::vector<double> lambdas{0.01, 0.1, 1.0};
    std::vector<double> times{0.1, 1.0};
    int family_size = 20;
    std::uint64_t seed = 1;
    double tolerance = 1e-9;
    std::optional<double> truncation;   // cut for infinite 1-D ends
    std::size_t paths = 10000;
    std::optional<double> start;        // 1-D simulation start point
    int samples = 200;                  // quasi-random points for multi-D obligations
};

struct ModelFile {
    ModelKind kind = ModelKind::diffusion1d;
    std::string name;
    std::string input_hash;  // SHA-256 of the file bytes, hex
    OrderSpec order;
    NumericSettings numeric;

    std::optional<DiffusionModel> diffusion;  // kind = diffusion1d
    std::optional<CoefficientField> field;    // kind = diffusion_md
    std::optional<SampleBox> box;             // kind = diffusion_md
    std::optional<SpinSystem> spins;          // kind = spin_system
    SpinConfig initial;                       // kind = spin_system, simulation start
};

/// Parses JSON text; throws ModelFileError with a readable message.
ModelFile parse_model(std::string_view text);
/// Reads a .json model file. TOML files are rejected with a pointer to the converter.
ModelFile load_model_file(const std::string& path);

/// Order named on the command line: increasing, convex, increasing_convex,
/// spin_monotone, componentwise or supermodular (the last two in `dim` dimensions).
OrderSpec order_from_name(const std::string& name, int dim);

std::string sha256_hex(std::string_view bytes);

}  // namespace stochorder
