#pragma once

// Run configuration for the qlevel front end. A config is one JSON document
// holding the model, the initial state, the observable and exactly one
// command block. Parsing fills in every default, so serializing a parsed
// config and parsing it again yields an equal RunConfig.

#include <qls/qls.hpp>

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace qlevel {

using nlohmann::json;

/// Validation failure at a location in the config, e.g. "model.terms[1].operator".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& message)
        : std::runtime_error(message), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Time profile of one Hamiltonian parameter over a protocol of duration T.
struct ParamSpec {
    enum class Kind { constant, ramp, sine, samples };
    Kind kind = Kind::constant;
    double value = 0.0;      // constant
    double from = 0.0;       // ramp, linear in t / T
    double to = 0.0;
    double amplitude = 0.0;  // sine: offset + amplitude sin(omega t + phase)
    double omega = 0.0;
    double phase = 0.0;
    double offset = 0.0;
    std::vector<double> values;  // samples, one per grid point

    double at(double t, double duration) const;
    /// Largest |value| the profile reaches.
    double max_abs() const;

    friend bool operator==(const ParamSpec&, const ParamSpec&) = default;
};

struct TermSpec {
    std::string name;
    json op;
    qls::Coefficient coeff;
    qls::TermRole role = qls::TermRole::system;

    friend bool operator==(const TermSpec&, const TermSpec&) = default;
};

struct ModelSpec {
    std::size_t dim = 0;
    json base;  ///< null means the zero operator
    std::vector<TermSpec> terms;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct StateSpec {
    std::optional<std::size_t> basis;
    std::vector<std::array<double, 2>> amplitudes;
    bool normalize = false;

    friend bool operator==(const StateSpec&, const StateSpec&) = default;
};

struct ProtocolSpec {
    double duration = 1.0;
    std::optional<std::size_t> steps;  ///< default keeps |H| dt <= 0.05
    qls::StepMethod method = qls::StepMethod::exact;
    std::map<std::string, ParamSpec> parameters;  ///< by term name; absent terms are 0

    friend bool operator==(const ProtocolSpec&, const ProtocolSpec&) = default;
};

struct SimulateBlock {
    ProtocolSpec protocol;
    bool state_columns = false;

    friend bool operator==(const SimulateBlock&, const SimulateBlock&) = default;
};

struct TrackBlock {
    ProtocolSpec protocol;
    double residual_tolerance = 1e-3;
    std::optional<double> singular_threshold;
    double bracket_lo = -10.0;
    double bracket_hi = 10.0;
    double t0 = 0.0;
    double pulse_duration = 0.0;
    double observation_window = 0.0;
    double band = 0.0;

    friend bool operator==(const TrackBlock&, const TrackBlock&) = default;
};

struct OptimizeBlock {
    ProtocolSpec protocol;
    ParamSpec initial_control;
    double theta_target = 0.0;
    double w_terminal = 0.0;
    double w_running = 0.0;
    double w_fluence = 0.0;
    qls::OptimizeOptions optimizer;

    friend bool operator==(const OptimizeBlock&, const OptimizeBlock&) = default;
};

struct AxisSpec {
    std::string term;
    std::vector<double> values;

    friend bool operator==(const AxisSpec&, const AxisSpec&) = default;
};

struct MeshBlock {
    AxisSpec axis1;
    AxisSpec axis2;
    std::vector<double> labels;  ///< control values a3, one mesh each
    double duration = 1.0;
    std::optional<std::size_t> steps;
    std::map<std::string, ParamSpec> parameters;  ///< remaining terms; samples not allowed
    qls::levelset::MeshStatistic statistic = qls::levelset::MeshStatistic::terminal;
    double window = 0.0;

    friend bool operator==(const MeshBlock&, const MeshBlock&) = default;
};

struct GridSpec {
    std::vector<double> axis1;
    std::vector<double> axis2;
    std::vector<std::vector<double>> values;  ///< values[i][j] at (axis1[i], axis2[j])

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct MeshSource {
    std::optional<std::string> file;
    std::optional<GridSpec> grid;
    double label = 0.0;

    friend bool operator==(const MeshSource&, const MeshSource&) = default;
};

struct FamilyEntry {
    std::string file;
    double label = 0.0;

    friend bool operator==(const FamilyEntry&, const FamilyEntry&) = default;
};

struct FollowSpec {
    std::vector<qls::levelset::Point> path;
    double level = 0.0;
    qls::levelset::InterpolationKind interpolation = qls::levelset::InterpolationKind::bilinear;

    friend bool operator==(const FollowSpec&, const FollowSpec&) = default;
};

struct StationaritySpec {
    std::size_t index = 1;
    double theta_target = 0.0;
    double w_running = 1.0;
    qls::levelset::SurfaceCost surface;
    double level = 0.0;

    friend bool operator==(const StationaritySpec&, const StationaritySpec&) = default;
};

struct ContourBlock {
    std::optional<MeshSource> source;
    std::vector<double> levels;
    std::vector<FamilyEntry> family;
    std::optional<std::string> labels_file;  ///< labels.csv written by the mesh command
    std::optional<FollowSpec> follow;
    std::optional<StationaritySpec> stationarity;

    friend bool operator==(const ContourBlock&, const ContourBlock&) = default;
};

struct IntersectBlock {
    std::string curve_a;
    std::string curve_b;

    friend bool operator==(const IntersectBlock&, const IntersectBlock&) = default;
};

using CommandBlock = std::variant<SimulateBlock, TrackBlock, OptimizeBlock, MeshBlock, ContourBlock, IntersectBlock>;

struct RunConfig {
    std::optional<ModelSpec> model;
    std::optional<StateSpec> initial_state;
    std::optional<json> observable;
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;  ///< reserved for randomized initial guesses
    CommandBlock block;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

std::string command_name(const CommandBlock& block);

RunConfig parse_config(const json& doc);
json to_json(const RunConfig& cfg);
/// Reads and parses a file; unreadable or malformed files raise ConfigError.
RunConfig load_config(const std::filesystem::path& file);

// Construction of library objects. Failures raise ConfigError pointing at
// the offending config entry.
qls::HermitianOperator build_operator(const json& spec, std::size_t dim, const std::string& path,
                                      const std::string& name);
qls::ParameterizedHamiltonian build_model(const ModelSpec& spec);
qls::State build_state(const StateSpec& spec, std::size_t dim);
/// Upper bound on |H| given the largest |a_i| per term.
double norm_bound(const qls::ParameterizedHamiltonian& model, const std::vector<double>& max_abs_params);
qls::ParameterPath build_path(const ProtocolSpec& spec, const qls::ParameterizedHamiltonian& model,
                              const std::string& path);

}  // namespace qlevel
