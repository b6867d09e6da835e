#include "qlevel/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace qlevel {

namespace {

std::string child(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string item(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    require_object(j, path);
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            throw ConfigError(child(path, key), "unknown key");
        }
    }
}

const json& field(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) throw ConfigError(child(path, key), "missing required key");
    return j.at(key);
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(path, "expected a finite number");
    return v;
}

double number(const json& j, const std::string& path, const char* key) {
    return as_number(field(j, path, key), child(path, key));
}

double number_or(const json& j, const std::string& path, const char* key, double fallback) {
    return j.contains(key) ? number(j, path, key) : fallback;
}

std::size_t count(const json& j, const std::string& path) {
    if (!j.is_number_integer() || j.get<long long>() < 0) throw ConfigError(path, "expected a non-negative integer");
    return j.get<std::size_t>();
}

std::size_t count_or(const json& j, const std::string& path, const char* key, std::size_t fallback) {
    return j.contains(key) ? count(j.at(key), child(path, key)) : fallback;
}

std::string text(const json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(path, "expected a string");
    return j.get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], item(path, i)));
    return out;
}

template <class E>
E choose(const json& j, const std::string& path, std::initializer_list<std::pair<const char*, E>> options) {
    const std::string s = text(j, path);
    for (const auto& [name, value] : options) {
        if (s == name) return value;
    }
    std::string names;
    for (const auto& [name, _] : options) names += (names.empty() ? "" : ", ") + std::string(name);
    throw ConfigError(path, "unknown value '" + s + "' (expected one of " + names + ")");
}

// --- parameter profiles -----------------------------------------------------

ParamSpec parse_param(const json& j, const std::string& path) {
    require_object(j, path);
    ParamSpec p;
    p.kind = choose<ParamSpec::Kind>(field(j, path, "kind"), child(path, "kind"),
                                     {{"constant", ParamSpec::Kind::constant},
                                      {"ramp", ParamSpec::Kind::ramp},
                                      {"sine", ParamSpec::Kind::sine},
                                      {"samples", ParamSpec::Kind::samples}});
    switch (p.kind) {
        case ParamSpec::Kind::constant:
            check_keys(j, path, {"kind", "value"});
            p.value = number(j, path, "value");
            break;
        case ParamSpec::Kind::ramp:
            check_keys(j, path, {"kind", "from", "to"});
            p.from = number(j, path, "from");
            p.to = number(j, path, "to");
            break;
        case ParamSpec::Kind::sine:
            check_keys(j, path, {"kind", "amplitude", "omega", "phase", "offset"});
            p.amplitude = number(j, path, "amplitude");
            p.omega = number(j, path, "omega");
            p.phase = number_or(j, path, "phase", 0.0);
            p.offset = number_or(j, path, "offset", 0.0);
            break;
        case ParamSpec::Kind::samples:
            check_keys(j, path, {"kind", "values"});
            p.values = numbers(field(j, path, "values"), child(path, "values"));
            if (p.values.empty()) throw ConfigError(child(path, "values"), "needs at least one sample");
            break;
    }
    return p;
}

json param_json(const ParamSpec& p) {
    switch (p.kind) {
        case ParamSpec::Kind::constant: return {{"kind", "constant"}, {"value", p.value}};
        case ParamSpec::Kind::ramp: return {{"kind", "ramp"}, {"from", p.from}, {"to", p.to}};
        case ParamSpec::Kind::sine:
            return {{"kind", "sine"}, {"amplitude", p.amplitude}, {"omega", p.omega}, {"phase", p.phase},
                    {"offset", p.offset}};
        case ParamSpec::Kind::samples: return {{"kind", "samples"}, {"values", p.values}};
    }
    return {};
}

std::map<std::string, ParamSpec> parse_params(const json& j, const std::string& path) {
    require_object(j, path);
    std::map<std::string, ParamSpec> out;
    for (const auto& [key, value] : j.items()) out[key] = parse_param(value, child(path, key));
    return out;
}

json params_json(const std::map<std::string, ParamSpec>& ps) {
    json j = json::object();
    for (const auto& [k, v] : ps) j[k] = param_json(v);
    return j;
}

// --- model ------------------------------------------------------------------

void check_operator_shape(const json& j, const std::string& path) {
    if (!(j.is_string() || j.is_object() || j.is_array())) {
        throw ConfigError(path, "operator must be a builtin name, an object or a list of [re, im] pairs");
    }
}

ModelSpec parse_model(const json& j, const std::string& path) {
    check_keys(j, path, {"dim", "base", "terms"});
    ModelSpec m;
    m.dim = count(field(j, path, "dim"), child(path, "dim"));
    if (m.dim < 2) throw ConfigError(child(path, "dim"), "dimension must be at least 2");
    if (j.contains("base")) {
        m.base = j.at("base");
        check_operator_shape(m.base, child(path, "base"));
    }
    const std::string tpath = child(path, "terms");
    const json& terms = field(j, path, "terms");
    if (!terms.is_array()) throw ConfigError(tpath, "expected a list of terms");
    std::set<std::string> names;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const std::string p = item(tpath, i);
        const json& t = terms[i];
        check_keys(t, p, {"name", "operator", "coeff_kind", "coeff_params", "role"});
        TermSpec ts;
        ts.name = text(field(t, p, "name"), child(p, "name"));
        if (ts.name.empty()) throw ConfigError(child(p, "name"), "term name is empty");
        if (!names.insert(ts.name).second) throw ConfigError(child(p, "name"), "duplicate term name '" + ts.name + "'");
        ts.op = field(t, p, "operator");
        check_operator_shape(ts.op, child(p, "operator"));
        ts.coeff.kind = t.contains("coeff_kind")
                            ? choose<qls::Coefficient::Kind>(t.at("coeff_kind"), child(p, "coeff_kind"),
                                                             {{"linear", qls::Coefficient::Kind::linear},
                                                              {"quadratic", qls::Coefficient::Kind::quadratic}})
                            : qls::Coefficient::Kind::linear;
        if (t.contains("coeff_params")) {
            const std::string cp = child(p, "coeff_params");
            check_keys(t.at("coeff_params"), cp, {"scale"});
            ts.coeff.scale = number_or(t.at("coeff_params"), cp, "scale", 1.0);
        }
        ts.role = t.contains("role") ? choose<qls::TermRole>(t.at("role"), child(p, "role"),
                                                              {{"system", qls::TermRole::system},
                                                               {"control", qls::TermRole::control}})
                                     : qls::TermRole::system;
        m.terms.push_back(std::move(ts));
    }
    const auto controls = std::count_if(m.terms.begin(), m.terms.end(),
                                        [](const TermSpec& t) { return t.role == qls::TermRole::control; });
    if (controls != 1) throw ConfigError(tpath, "exactly one term must have role 'control'");
    return m;
}

json model_json(const ModelSpec& m) {
    json terms = json::array();
    for (const auto& t : m.terms) {
        terms.push_back({{"name", t.name},
                         {"operator", t.op},
                         {"coeff_kind", std::string(qls::to_string(t.coeff.kind))},
                         {"coeff_params", {{"scale", t.coeff.scale}}},
                         {"role", t.role == qls::TermRole::control ? "control" : "system"}});
    }
    json j = {{"dim", m.dim}, {"terms", terms}};
    if (!m.base.is_null()) j["base"] = m.base;
    return j;
}

StateSpec parse_state(const json& j, const std::string& path) {
    check_keys(j, path, {"basis", "amplitudes", "normalize"});
    StateSpec s;
    if (j.contains("basis") == j.contains("amplitudes")) {
        throw ConfigError(path, "give exactly one of 'basis' or 'amplitudes'");
    }
    if (j.contains("basis")) s.basis = count(j.at("basis"), child(path, "basis"));
    if (j.contains("amplitudes")) {
        const std::string ap = child(path, "amplitudes");
        const json& a = j.at("amplitudes");
        if (!a.is_array()) throw ConfigError(ap, "expected a list of [re, im] pairs");
        for (std::size_t i = 0; i < a.size(); ++i) {
            const auto v = numbers(a[i], item(ap, i));
            if (v.size() != 2) throw ConfigError(item(ap, i), "expected [re, im]");
            s.amplitudes.push_back({v[0], v[1]});
        }
    }
    if (j.contains("normalize")) {
        if (!j.at("normalize").is_boolean()) throw ConfigError(child(path, "normalize"), "expected true or false");
        s.normalize = j.at("normalize").get<bool>();
    }
    return s;
}

json state_json(const StateSpec& s) {
    json j = {{"normalize", s.normalize}};
    if (s.basis) j["basis"] = *s.basis;
    if (!s.amplitudes.empty()) j["amplitudes"] = s.amplitudes;
    return j;
}

// --- command blocks ---------------------------------------------------------

ProtocolSpec parse_protocol(const json& j, const std::string& path) {
    check_keys(j, path, {"duration", "steps", "method", "parameters"});
    ProtocolSpec p;
    p.duration = number(j, path, "duration");
    if (!(p.duration > 0.0)) throw ConfigError(child(path, "duration"), "duration must be positive");
    if (j.contains("steps")) {
        p.steps = count(j.at("steps"), child(path, "steps"));
        if (*p.steps == 0) throw ConfigError(child(path, "steps"), "steps must be positive");
    }
    if (j.contains("method")) {
        p.method = choose<qls::StepMethod>(j.at("method"), child(path, "method"),
                                           {{"exact", qls::StepMethod::exact}, {"rk4", qls::StepMethod::rk4}});
    }
    if (j.contains("parameters")) p.parameters = parse_params(j.at("parameters"), child(path, "parameters"));
    return p;
}

json protocol_json(const ProtocolSpec& p) {
    json j = {{"duration", p.duration},
              {"method", std::string(qls::to_string(p.method))},
              {"parameters", params_json(p.parameters)}};
    if (p.steps) j["steps"] = *p.steps;
    return j;
}

SimulateBlock parse_simulate(const json& j, const std::string& path) {
    check_keys(j, path, {"protocol", "state_columns"});
    SimulateBlock b;
    b.protocol = parse_protocol(field(j, path, "protocol"), child(path, "protocol"));
    if (j.contains("state_columns")) {
        if (!j.at("state_columns").is_boolean()) throw ConfigError(child(path, "state_columns"), "expected true or false");
        b.state_columns = j.at("state_columns").get<bool>();
    }
    return b;
}

TrackBlock parse_track(const json& j, const std::string& path) {
    check_keys(j, path, {"protocol", "residual_tolerance", "singular_threshold", "bracket", "timescales", "band"});
    TrackBlock b;
    b.protocol = parse_protocol(field(j, path, "protocol"), child(path, "protocol"));
    b.residual_tolerance = number_or(j, path, "residual_tolerance", b.residual_tolerance);
    if (j.contains("singular_threshold")) {
        b.singular_threshold = number(j, path, "singular_threshold");
        if (*b.singular_threshold < 0.0) throw ConfigError(child(path, "singular_threshold"), "must be non-negative");
    }
    if (j.contains("bracket")) {
        const auto br = numbers(j.at("bracket"), child(path, "bracket"));
        if (br.size() != 2 || !(br[0] < br[1])) throw ConfigError(child(path, "bracket"), "expected [lo, hi] with lo < hi");
        b.bracket_lo = br[0];
        b.bracket_hi = br[1];
    }
    const std::string tp = child(path, "timescales");
    const json& ts = field(j, path, "timescales");
    check_keys(ts, tp, {"t0", "pulse_duration", "observation_window"});
    b.t0 = number(ts, tp, "t0");
    b.pulse_duration = number(ts, tp, "pulse_duration");
    b.observation_window = number(ts, tp, "observation_window");
    try {
        qls::TimescaleConfig{b.t0, b.pulse_duration, b.observation_window}.validate();
    } catch (const qls::Error& e) {
        throw ConfigError(tp, e.what());
    }
    if (b.observation_window > b.protocol.duration) {
        throw ConfigError(child(tp, "observation_window"), "observation window is longer than the protocol");
    }
    b.band = number(j, path, "band");
    if (b.band < 0.0) throw ConfigError(child(path, "band"), "band tolerance must be non-negative");
    return b;
}

json track_json(const TrackBlock& b) {
    json j = {{"protocol", protocol_json(b.protocol)},
              {"residual_tolerance", b.residual_tolerance},
              {"bracket", {b.bracket_lo, b.bracket_hi}},
              {"timescales", {{"t0", b.t0}, {"pulse_duration", b.pulse_duration}, {"observation_window", b.observation_window}}},
              {"band", b.band}};
    if (b.singular_threshold) j["singular_threshold"] = *b.singular_threshold;
    return j;
}

OptimizeBlock parse_optimize(const json& j, const std::string& path) {
    check_keys(j, path, {"protocol", "initial_control", "cost", "optimizer"});
    OptimizeBlock b;
    b.protocol = parse_protocol(field(j, path, "protocol"), child(path, "protocol"));
    b.initial_control = parse_param(field(j, path, "initial_control"), child(path, "initial_control"));
    const std::string cp = child(path, "cost");
    const json& c = field(j, path, "cost");
    check_keys(c, cp, {"theta_target", "w_terminal", "w_running", "w_fluence"});
    b.theta_target = number(c, cp, "theta_target");
    b.w_terminal = number_or(c, cp, "w_terminal", 0.0);
    b.w_running = number_or(c, cp, "w_running", 0.0);
    b.w_fluence = number_or(c, cp, "w_fluence", 0.0);
    try {
        qls::CostConfig{b.theta_target, b.w_terminal, b.w_running, b.w_fluence, b.protocol.duration}.validate();
    } catch (const qls::Error& e) {
        throw ConfigError(cp, e.what());
    }
    if (j.contains("optimizer")) {
        const std::string op = child(path, "optimizer");
        const json& o = j.at("optimizer");
        check_keys(o, op, {"max_iters", "step_size", "tolerance", "gradient_tolerance", "armijo", "backtrack",
                           "max_backtracks"});
        auto& opt = b.optimizer;
        opt.max_iters = count_or(o, op, "max_iters", opt.max_iters);
        opt.step_size = number_or(o, op, "step_size", opt.step_size);
        opt.tolerance = number_or(o, op, "tolerance", opt.tolerance);
        opt.gradient_tolerance = number_or(o, op, "gradient_tolerance", opt.gradient_tolerance);
        opt.armijo = number_or(o, op, "armijo", opt.armijo);
        opt.backtrack = number_or(o, op, "backtrack", opt.backtrack);
        opt.max_backtracks = count_or(o, op, "max_backtracks", opt.max_backtracks);
        if (!(opt.step_size > 0.0)) throw ConfigError(child(op, "step_size"), "must be positive");
        if (!(opt.backtrack > 0.0 && opt.backtrack < 1.0)) throw ConfigError(child(op, "backtrack"), "must lie in (0, 1)");
        if (!(opt.armijo > 0.0 && opt.armijo < 1.0)) throw ConfigError(child(op, "armijo"), "must lie in (0, 1)");
    }
    return b;
}

json optimize_json(const OptimizeBlock& b) {
    const auto& o = b.optimizer;
    return {{"protocol", protocol_json(b.protocol)},
            {"initial_control", param_json(b.initial_control)},
            {"cost",
             {{"theta_target", b.theta_target},
              {"w_terminal", b.w_terminal},
              {"w_running", b.w_running},
              {"w_fluence", b.w_fluence}}},
            {"optimizer",
             {{"max_iters", o.max_iters},
              {"step_size", o.step_size},
              {"tolerance", o.tolerance},
              {"gradient_tolerance", o.gradient_tolerance},
              {"armijo", o.armijo},
              {"backtrack", o.backtrack},
              {"max_backtracks", o.max_backtracks}}}};
}

std::vector<double> increasing(const json& j, const std::string& path) {
    auto v = numbers(j, path);
    if (v.empty()) throw ConfigError(path, "needs at least one value");
    for (std::size_t k = 1; k < v.size(); ++k) {
        if (!(v[k] > v[k - 1])) throw ConfigError(item(path, k), "values must be strictly increasing");
    }
    return v;
}

/// Either an explicit list or {from, to, count}.
std::vector<double> axis_values(const json& j, const std::string& path) {
    if (j.contains("values")) return increasing(j.at("values"), child(path, "values"));
    const double lo = number(j, path, "from");
    const double hi = number(j, path, "to");
    const std::size_t n = count(field(j, path, "count"), child(path, "count"));
    if (n == 0) throw ConfigError(child(path, "count"), "count must be positive");
    if (n > 1 && !(hi > lo)) throw ConfigError(path, "'to' must exceed 'from'");
    return qls::levelset::linspace(lo, hi, n);
}

AxisSpec parse_axis(const json& j, const std::string& path) {
    check_keys(j, path, {"term", "values", "from", "to", "count"});
    if (j.contains("values") && (j.contains("from") || j.contains("to") || j.contains("count"))) {
        throw ConfigError(path, "give either 'values' or 'from'/'to'/'count'");
    }
    return {text(field(j, path, "term"), child(path, "term")), axis_values(j, path)};
}

MeshBlock parse_mesh(const json& j, const std::string& path) {
    check_keys(j, path, {"axis1", "axis2", "labels", "duration", "steps", "parameters", "statistic", "window"});
    MeshBlock b;
    b.axis1 = parse_axis(field(j, path, "axis1"), child(path, "axis1"));
    b.axis2 = parse_axis(field(j, path, "axis2"), child(path, "axis2"));
    if (b.axis1.term == b.axis2.term) throw ConfigError(child(path, "axis2.term"), "axes must use different terms");
    b.labels = increasing(field(j, path, "labels"), child(path, "labels"));
    b.duration = number(j, path, "duration");
    if (!(b.duration > 0.0)) throw ConfigError(child(path, "duration"), "duration must be positive");
    if (j.contains("steps")) {
        b.steps = count(j.at("steps"), child(path, "steps"));
        if (*b.steps == 0) throw ConfigError(child(path, "steps"), "steps must be positive");
    }
    if (j.contains("parameters")) {
        b.parameters = parse_params(j.at("parameters"), child(path, "parameters"));
        for (const auto& [name, p] : b.parameters) {
            if (p.kind == ParamSpec::Kind::samples) {
                throw ConfigError(child(child(path, "parameters"), name), "mesh parameters cannot be sampled lists");
            }
            if (name == b.axis1.term || name == b.axis2.term) {
                throw ConfigError(child(child(path, "parameters"), name), "term is already a mesh axis");
            }
        }
    }
    if (j.contains("statistic")) {
        b.statistic = choose<qls::levelset::MeshStatistic>(
            j.at("statistic"), child(path, "statistic"),
            {{"terminal", qls::levelset::MeshStatistic::terminal},
             {"window_average", qls::levelset::MeshStatistic::window_average}});
    }
    b.window = number_or(j, path, "window", 0.0);
    if (b.statistic == qls::levelset::MeshStatistic::window_average && !(b.window > 0.0 && b.window <= b.duration)) {
        throw ConfigError(child(path, "window"), "window must lie in (0, duration]");
    }
    return b;
}

json mesh_json(const MeshBlock& b) {
    json j = {{"axis1", {{"term", b.axis1.term}, {"values", b.axis1.values}}},
              {"axis2", {{"term", b.axis2.term}, {"values", b.axis2.values}}},
              {"labels", b.labels},
              {"duration", b.duration},
              {"parameters", params_json(b.parameters)},
              {"statistic", std::string(qls::levelset::to_string(b.statistic))},
              {"window", b.window}};
    if (b.steps) j["steps"] = *b.steps;
    return j;
}

qls::levelset::InterpolationKind parse_kind(const json& j, const std::string& path) {
    return choose<qls::levelset::InterpolationKind>(j, path,
                                                    {{"bilinear", qls::levelset::InterpolationKind::bilinear},
                                                     {"bicubic", qls::levelset::InterpolationKind::bicubic}});
}

ContourBlock parse_contour(const json& j, const std::string& path) {
    check_keys(j, path, {"source", "levels", "family", "labels_file", "follow", "stationarity"});
    ContourBlock b;
    if (j.contains("source")) {
        const std::string sp = child(path, "source");
        const json& s = j.at("source");
        check_keys(s, sp, {"file", "grid", "label"});
        MeshSource src;
        if (s.contains("file") == s.contains("grid")) throw ConfigError(sp, "give exactly one of 'file' or 'grid'");
        if (s.contains("file")) src.file = text(s.at("file"), child(sp, "file"));
        if (s.contains("grid")) {
            const std::string gp = child(sp, "grid");
            const json& g = s.at("grid");
            check_keys(g, gp, {"axis1", "axis2", "values"});
            GridSpec grid;
            grid.axis1 = increasing(field(g, gp, "axis1"), child(gp, "axis1"));
            grid.axis2 = increasing(field(g, gp, "axis2"), child(gp, "axis2"));
            const json& rows = field(g, gp, "values");
            const std::string vp = child(gp, "values");
            if (!rows.is_array() || rows.size() != grid.axis1.size()) {
                throw ConfigError(vp, "expected one row per axis1 value");
            }
            for (std::size_t i = 0; i < rows.size(); ++i) {
                grid.values.push_back(numbers(rows[i], item(vp, i)));
                if (grid.values.back().size() != grid.axis2.size()) {
                    throw ConfigError(item(vp, i), "expected one value per axis2 value");
                }
            }
            src.grid = std::move(grid);
        }
        src.label = number_or(s, sp, "label", 0.0);
        b.source = std::move(src);
    }
    if (j.contains("levels")) b.levels = numbers(j.at("levels"), child(path, "levels"));
    if (!b.levels.empty() && !b.source) throw ConfigError(child(path, "source"), "levels need a source mesh");
    if (j.contains("family") && j.contains("labels_file")) {
        throw ConfigError(path, "give at most one of 'family' or 'labels_file'");
    }
    if (j.contains("family")) {
        const std::string fp = child(path, "family");
        const json& f = j.at("family");
        if (!f.is_array()) throw ConfigError(fp, "expected a list of {file, label}");
        for (std::size_t i = 0; i < f.size(); ++i) {
            const std::string ip = item(fp, i);
            check_keys(f[i], ip, {"file", "label"});
            b.family.push_back({text(field(f[i], ip, "file"), child(ip, "file")), number(f[i], ip, "label")});
        }
    }
    if (j.contains("labels_file")) b.labels_file = text(j.at("labels_file"), child(path, "labels_file"));
    const bool has_family = !b.family.empty() || b.labels_file;
    if (j.contains("follow")) {
        const std::string fp = child(path, "follow");
        const json& f = j.at("follow");
        check_keys(f, fp, {"path", "level", "interpolation"});
        FollowSpec fs;
        const json& pts = field(f, fp, "path");
        if (!pts.is_array() || pts.empty()) throw ConfigError(child(fp, "path"), "expected a list of [a1, a2]");
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const auto v = numbers(pts[i], item(child(fp, "path"), i));
            if (v.size() != 2) throw ConfigError(item(child(fp, "path"), i), "expected [a1, a2]");
            fs.path.push_back({v[0], v[1]});
        }
        fs.level = number(f, fp, "level");
        if (f.contains("interpolation")) fs.interpolation = parse_kind(f.at("interpolation"), child(fp, "interpolation"));
        if (!has_family) throw ConfigError(fp, "follow needs a mesh family");
        b.follow = std::move(fs);
    }
    if (j.contains("stationarity")) {
        const std::string sp = child(path, "stationarity");
        const json& s = j.at("stationarity");
        check_keys(s, sp, {"index", "theta_target", "w_running", "surface_cost", "level"});
        StationaritySpec ss;
        ss.index = count(field(s, sp, "index"), child(sp, "index"));
        ss.theta_target = number(s, sp, "theta_target");
        ss.w_running = number_or(s, sp, "w_running", 1.0);
        if (ss.w_running < 0.0) throw ConfigError(child(sp, "w_running"), "must be non-negative");
        ss.level = number_or(s, sp, "level", 0.0);
        if (s.contains("surface_cost")) {
            const std::string hp = child(sp, "surface_cost");
            const json& h = s.at("surface_cost");
            check_keys(h, hp, {"w_control", "w_a1", "w_a2", "ref_a1", "ref_a2"});
            ss.surface.w_control = number_or(h, hp, "w_control", 1.0);
            ss.surface.w_a1 = number_or(h, hp, "w_a1", 0.0);
            ss.surface.w_a2 = number_or(h, hp, "w_a2", 0.0);
            ss.surface.ref_a1 = number_or(h, hp, "ref_a1", 0.0);
            ss.surface.ref_a2 = number_or(h, hp, "ref_a2", 0.0);
        }
        if (!has_family) throw ConfigError(sp, "stationarity needs a mesh family");
        b.stationarity = ss;
    }
    if (!b.source && !has_family) throw ConfigError(path, "nothing to do: give a source mesh or a family");
    return b;
}

json contour_json(const ContourBlock& b) {
    json j = {{"levels", b.levels}};
    if (b.source) {
        json s = {{"label", b.source->label}};
        if (b.source->file) s["file"] = *b.source->file;
        if (b.source->grid) {
            s["grid"] = {{"axis1", b.source->grid->axis1},
                         {"axis2", b.source->grid->axis2},
                         {"values", b.source->grid->values}};
        }
        j["source"] = s;
    }
    if (!b.family.empty()) {
        json f = json::array();
        for (const auto& e : b.family) f.push_back({{"file", e.file}, {"label", e.label}});
        j["family"] = f;
    }
    if (b.labels_file) j["labels_file"] = *b.labels_file;
    if (b.follow) {
        json pts = json::array();
        for (const auto& p : b.follow->path) pts.push_back({p.a1, p.a2});
        j["follow"] = {{"path", pts},
                       {"level", b.follow->level},
                       {"interpolation",
                        b.follow->interpolation == qls::levelset::InterpolationKind::bilinear ? "bilinear" : "bicubic"}};
    }
    if (b.stationarity) {
        const auto& s = *b.stationarity;
        j["stationarity"] = {{"index", s.index},
                             {"theta_target", s.theta_target},
                             {"w_running", s.w_running},
                             {"level", s.level},
                             {"surface_cost",
                              {{"w_control", s.surface.w_control},
                               {"w_a1", s.surface.w_a1},
                               {"w_a2", s.surface.w_a2},
                               {"ref_a1", s.surface.ref_a1},
                               {"ref_a2", s.surface.ref_a2}}}};
    }
    return j;
}

IntersectBlock parse_intersect(const json& j, const std::string& path) {
    check_keys(j, path, {"curve_a", "curve_b"});
    return {text(field(j, path, "curve_a"), child(path, "curve_a")),
            text(field(j, path, "curve_b"), child(path, "curve_b"))};
}

constexpr const char* kCommands[] = {"simulate", "track", "optimize", "mesh", "contour", "intersect"};

bool needs_model(const CommandBlock& b) {
    return std::holds_alternative<SimulateBlock>(b) || std::holds_alternative<TrackBlock>(b) ||
           std::holds_alternative<OptimizeBlock>(b) || std::holds_alternative<MeshBlock>(b);
}

}  // namespace

// --- public -----------------------------------------------------------------

double ParamSpec::at(double t, double duration) const {
    switch (kind) {
        case Kind::constant: return value;
        case Kind::ramp: return from + (to - from) * t / duration;
        case Kind::sine: return offset + amplitude * std::sin(omega * t + phase);
        case Kind::samples: break;
    }
    throw qls::InvalidArgument("sampled parameter has no closed form");
}

double ParamSpec::max_abs() const {
    switch (kind) {
        case Kind::constant: return std::abs(value);
        case Kind::ramp: return std::max(std::abs(from), std::abs(to));
        case Kind::sine: return std::abs(offset) + std::abs(amplitude);
        case Kind::samples: {
            double m = 0.0;
            for (double v : values) m = std::max(m, std::abs(v));
            return m;
        }
    }
    return 0.0;
}

std::string command_name(const CommandBlock& block) { return kCommands[block.index()]; }

RunConfig parse_config(const json& doc) {
    require_object(doc, "");
    RunConfig cfg;
    std::optional<CommandBlock> block;
    for (const auto& [key, value] : doc.items()) {
        if (key == "model") {
            cfg.model = parse_model(value, key);
        } else if (key == "initial_state") {
            cfg.initial_state = parse_state(value, key);
        } else if (key == "observable") {
            check_operator_shape(value, key);
            cfg.observable = value;
        } else if (key == "output_dir") {
            cfg.output_dir = text(value, key);
        } else if (key == "seed") {
            if (!value.is_number_unsigned()) throw ConfigError(key, "expected a non-negative integer");
            cfg.seed = value.get<std::uint64_t>();
        } else if (std::find_if(std::begin(kCommands), std::end(kCommands),
                                [&](const char* c) { return key == c; }) != std::end(kCommands)) {
            if (block) throw ConfigError(key, "more than one command block ('" + command_name(*block) + "' and '" + key + "')");
            if (key == "simulate") block = parse_simulate(value, key);
            if (key == "track") block = parse_track(value, key);
            if (key == "optimize") block = parse_optimize(value, key);
            if (key == "mesh") block = parse_mesh(value, key);
            if (key == "contour") block = parse_contour(value, key);
            if (key == "intersect") block = parse_intersect(value, key);
        } else {
            throw ConfigError(key, "unknown key");
        }
    }
    if (!block) throw ConfigError("", "no command block (expected one of simulate, track, optimize, mesh, contour, intersect)");
    cfg.block = std::move(*block);
    if (needs_model(cfg.block)) {
        if (!cfg.model) throw ConfigError("model", "missing required key");
        if (!cfg.initial_state) throw ConfigError("initial_state", "missing required key");
        if (!cfg.observable) throw ConfigError("observable", "missing required key");
    }
    return cfg;
}

json to_json(const RunConfig& cfg) {
    json j = json::object();
    if (cfg.model) j["model"] = model_json(*cfg.model);
    if (cfg.initial_state) j["initial_state"] = state_json(*cfg.initial_state);
    if (cfg.observable) j["observable"] = *cfg.observable;
    if (cfg.output_dir) j["output_dir"] = *cfg.output_dir;
    if (cfg.seed) j["seed"] = *cfg.seed;
    const std::string name = command_name(cfg.block);
    std::visit(
        [&](const auto& b) {
            using B = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<B, SimulateBlock>) {
                j[name] = {{"protocol", protocol_json(b.protocol)}, {"state_columns", b.state_columns}};
            } else if constexpr (std::is_same_v<B, TrackBlock>) {
                j[name] = track_json(b);
            } else if constexpr (std::is_same_v<B, OptimizeBlock>) {
                j[name] = optimize_json(b);
            } else if constexpr (std::is_same_v<B, MeshBlock>) {
                j[name] = mesh_json(b);
            } else if constexpr (std::is_same_v<B, ContourBlock>) {
                j[name] = contour_json(b);
            } else {
                j[name] = {{"curve_a", b.curve_a}, {"curve_b", b.curve_b}};
            }
        },
        cfg.block);
    return j;
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("", "cannot read config file '" + file.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return parse_config(doc);
}

// --- construction -----------------------------------------------------------

namespace {

std::optional<qls::HermitianOperator> builtin(const std::string& spec, std::size_t dim, const std::string& path) {
    std::string name = spec;
    std::optional<std::size_t> n;
    if (const auto open = spec.find('('); open != std::string::npos) {
        if (spec.back() != ')') throw ConfigError(path, "malformed builtin '" + spec + "'");
        name = spec.substr(0, open);
        const std::string arg = spec.substr(open + 1, spec.size() - open - 2);
        try {
            std::size_t used = 0;
            const long v = std::stol(arg, &used);
            if (used != arg.size() || v < 1) throw std::invalid_argument(arg);
            n = static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            throw ConfigError(path, "malformed dimension in builtin '" + spec + "'");
        }
    }
    const std::size_t size = n.value_or(dim);
    if (name == "pauli_x") return qls::ops::pauli_x();
    if (name == "pauli_y") return qls::ops::pauli_y();
    if (name == "pauli_z") return qls::ops::pauli_z();
    if (name == "identity") return qls::HermitianOperator::identity(size);
    if (name == "zero") return qls::HermitianOperator::zero(size);
    if (name == "number_op") return qls::ops::number_op(size);
    if (name == "position_op") return qls::ops::position_op(size);
    if (name == "momentum_op") return qls::ops::momentum_op(size);
    return std::nullopt;
}

}  // namespace

qls::HermitianOperator build_operator(const json& spec, std::size_t dim, const std::string& path,
                                      const std::string& name) {
    std::optional<qls::HermitianOperator> op;
    if (spec.is_string()) {
        op = builtin(spec.get<std::string>(), dim, path);
        if (!op) throw ConfigError(path, "operator '" + name + "': unknown builtin '" + spec.get<std::string>() + "'");
    } else if (spec.is_object() && spec.contains("sum")) {
        check_keys(spec, path, {"sum", "scale"});
        const json& terms = spec.at("sum");
        if (!terms.is_array() || terms.empty()) throw ConfigError(child(path, "sum"), "expected a non-empty list");
        qls::HermitianOperator acc = qls::HermitianOperator::zero(dim);
        for (std::size_t i = 0; i < terms.size(); ++i) {
            acc = acc + build_operator(terms[i], dim, item(child(path, "sum"), i), name);
        }
        op = number_or(spec, path, "scale", 1.0) * acc;
    } else if (spec.is_object()) {
        check_keys(spec, path, {"builtin", "scale"});
        const auto base = build_operator(field(spec, path, "builtin"), dim, child(path, "builtin"), name);
        op = number_or(spec, path, "scale", 1.0) * base;
    } else if (spec.is_array()) {
        if (spec.size() != dim * dim) {
            throw ConfigError(path, "operator '" + name + "' has " + std::to_string(spec.size()) + " entries, expected " +
                                        std::to_string(dim * dim));
        }
        const auto n = static_cast<Eigen::Index>(dim);
        qls::CMatrix m(n, n);
        for (std::size_t k = 0; k < spec.size(); ++k) {
            const auto v = numbers(spec[k], item(path, k));
            if (v.size() != 2) throw ConfigError(item(path, k), "expected [re, im]");
            m(static_cast<Eigen::Index>(k / dim), static_cast<Eigen::Index>(k % dim)) = {v[0], v[1]};
        }
        try {
            op = qls::HermitianOperator(m, "operator '" + name + "'");
        } catch (const qls::Error& e) {
            throw ConfigError(path, e.what());
        }
    } else {
        throw ConfigError(path, "operator '" + name + "' has an unsupported form");
    }
    if (op->dim() != dim) {
        throw ConfigError(path, "operator '" + name + "' has dimension " + std::to_string(op->dim()) +
                                    ", model dimension is " + std::to_string(dim));
    }
    return *op;
}

qls::ParameterizedHamiltonian build_model(const ModelSpec& spec) {
    const auto base = spec.base.is_null() ? qls::HermitianOperator::zero(spec.dim)
                                          : build_operator(spec.base, spec.dim, "model.base", "base");
    std::vector<qls::HamiltonianTerm> terms;
    for (std::size_t i = 0; i < spec.terms.size(); ++i) {
        const auto& t = spec.terms[i];
        terms.push_back({t.name, build_operator(t.op, spec.dim, "model.terms[" + std::to_string(i) + "].operator", t.name),
                         t.coeff, t.role});
    }
    try {
        return qls::ParameterizedHamiltonian(base, std::move(terms));
    } catch (const qls::Error& e) {
        throw ConfigError("model.terms", e.what());
    }
}

qls::State build_state(const StateSpec& spec, std::size_t dim) {
    if (spec.basis) {
        if (*spec.basis >= dim) {
            throw ConfigError("initial_state.basis",
                              "basis index " + std::to_string(*spec.basis) + " out of range for dimension " + std::to_string(dim));
        }
        return qls::State::basis(dim, *spec.basis);
    }
    if (spec.amplitudes.size() != dim) {
        throw ConfigError("initial_state.amplitudes", "expected " + std::to_string(dim) + " amplitudes, got " +
                                                          std::to_string(spec.amplitudes.size()));
    }
    qls::CVector v(static_cast<Eigen::Index>(dim));
    for (std::size_t k = 0; k < dim; ++k) v(static_cast<Eigen::Index>(k)) = {spec.amplitudes[k][0], spec.amplitudes[k][1]};
    try {
        return spec.normalize ? qls::State::normalized(v) : qls::State(v);
    } catch (const qls::Error& e) {
        throw ConfigError("initial_state.amplitudes", e.what());
    }
}

double norm_bound(const qls::ParameterizedHamiltonian& model, const std::vector<double>& max_abs_params) {
    double bound = model.base().spectral_norm();
    for (std::size_t i = 0; i < model.n_params(); ++i) {
        bound += std::abs(model.term(i).coeff.value(max_abs_params.at(i))) * model.term(i).op.spectral_norm();
    }
    return bound;
}

qls::ParameterPath build_path(const ProtocolSpec& spec, const qls::ParameterizedHamiltonian& model,
                              const std::string& path) {
    std::vector<double> max_abs(model.n_params(), 0.0);
    std::optional<std::size_t> sampled_steps;
    for (const auto& [name, p] : spec.parameters) {
        const auto idx = model.index_of(name);
        if (!idx) throw ConfigError(child(child(path, "parameters"), name), "no model term named '" + name + "'");
        max_abs[*idx] = p.max_abs();
        if (p.kind == ParamSpec::Kind::samples) {
            const std::size_t s = p.values.size() - 1;
            if (sampled_steps && *sampled_steps != s) {
                throw ConfigError(child(child(path, "parameters"), name), "sample lists have different lengths");
            }
            sampled_steps = s;
        }
    }
    std::size_t steps = 0;
    if (spec.steps) {
        steps = *spec.steps;
    } else if (sampled_steps) {
        steps = *sampled_steps;
    } else {
        const double bound = norm_bound(model, max_abs);
        if (!std::isfinite(bound)) throw ConfigError(child(path, "steps"), "Hamiltonian norm bound is not finite; give steps");
        steps = qls::default_step_count(bound, spec.duration);
    }
    if (sampled_steps && *sampled_steps != steps) {
        throw ConfigError(child(path, "parameters"),
                          "sample lists need steps + 1 = " + std::to_string(steps + 1) + " values");
    }
    if (steps == 0) throw ConfigError(child(path, "parameters"), "sample lists need at least two values");

    auto times = qls::ParameterPath::uniform_times(spec.duration, steps);
    qls::RMatrix values = qls::RMatrix::Zero(static_cast<Eigen::Index>(times.size()),
                                             static_cast<Eigen::Index>(model.n_params()));
    for (const auto& [name, p] : spec.parameters) {
        const auto col = static_cast<Eigen::Index>(*model.index_of(name));
        for (std::size_t k = 0; k < times.size(); ++k) {
            values(static_cast<Eigen::Index>(k), col) =
                p.kind == ParamSpec::Kind::samples ? p.values[k] : p.at(times[k], spec.duration);
        }
    }
    return qls::ParameterPath(std::move(times), std::move(values));
}

}  // namespace qlevel
