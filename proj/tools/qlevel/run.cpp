#include "qlevel/run.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace qlevel {

namespace fs = std::filesystem;

namespace {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical abort that still leaves artifacts behind.
struct Abort {
    int code;
    json record;
};

/// Writes files into the output directory and remembers their hashes.
class Artifacts {
public:
    explicit Artifacts(fs::path dir) : dir_(std::move(dir)) {}

    void add(const std::string& name, const std::string& content) {
        write(name, content);
        entries_.push_back({{"file", name}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
    }

    template <class Fn>
    void add_with(const std::string& name, Fn&& fn) {
        std::ostringstream os;
        fn(os);
        add(name, os.str());
    }

    void detail(const std::string& key, json value) { details_[key] = std::move(value); }

    void finish(const std::string& command, const std::string& status) {
        json manifest = {{"command", command}, {"status", status}, {"artifacts", entries_}};
        if (!details_.empty()) manifest["details"] = details_;
        write("manifest.json", manifest.dump(2) + "\n");
    }

private:
    void write(const std::string& name, const std::string& content) {
        std::ofstream out(dir_ / name, std::ios::binary);
        out << content;
        out.close();
        if (!out) throw IoError("cannot write '" + (dir_ / name).string() + "'");
    }

    fs::path dir_;
    json entries_ = json::array();
    json details_ = json::object();
};

std::string numbered(const char* stem, std::size_t k) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%03zu.csv", stem, k);
    return buf;
}

std::ifstream open_input(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot read '" + p.string() + "'");
    return in;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

struct Setup {
    qls::ParameterizedHamiltonian model;
    qls::State psi0;
    qls::HermitianOperator theta;
};

Setup setup(const RunConfig& cfg) {
    auto model = build_model(*cfg.model);
    auto psi0 = build_state(*cfg.initial_state, cfg.model->dim);
    auto theta = build_operator(*cfg.observable, cfg.model->dim, "observable", "observable");
    return {std::move(model), std::move(psi0), std::move(theta)};
}

void reject_control_parameter(const ProtocolSpec& p, const qls::ParameterizedHamiltonian& model,
                              const std::string& path, const char* why) {
    const std::string& name = model.control_term().name;
    if (p.parameters.count(name)) throw ConfigError(path + ".parameters." + name, why);
}

void simulate(const RunConfig& cfg, const SimulateBlock& b, Artifacts& out) {
    const auto s = setup(cfg);
    const auto path = build_path(b.protocol, s.model, "simulate.protocol");
    const auto traj = qls::propagate(s.model, path, s.psi0, s.theta, {b.protocol.method});
    out.add_with("trajectory.csv", [&](std::ostream& os) { qls::io::write_trajectory_csv(os, traj, b.state_columns); });
}

void track(const RunConfig& cfg, const TrackBlock& b, Artifacts& out) {
    const auto s = setup(cfg);
    reject_control_parameter(b.protocol, s.model, "track.protocol", "the control is solved by the tracker");
    const auto path = build_path(b.protocol, s.model, "track.protocol");
    qls::TrackOptions opts;
    opts.solve.singular_threshold = b.singular_threshold;
    opts.solve.bracket_lo = b.bracket_lo;
    opts.solve.bracket_hi = b.bracket_hi;
    opts.residual_tolerance = b.residual_tolerance;
    const auto result = qls::track(s.model, path, s.psi0, s.theta, opts);
    out.add_with("tracking.csv", [&](std::ostream& os) { qls::io::write_tracking_csv(os, result); });
    out.detail("residual_warnings", result.warnings.size());
    if (result.aborted) {
        throw Abort{kSingularControl,
                    {{"error", "singular_control"},
                     {"step", result.aborted->step},
                     {"denominator", result.aborted->denominator},
                     {"message", result.aborted->message}}};
    }
    const auto report = qls::tolerance_band(result.trajectory, {b.t0, b.pulse_duration, b.observation_window}, b.band);
    out.add_with("band_report.csv", [&](std::ostream& os) { qls::io::write_band_report_csv(os, report); });
}

void optimize(const RunConfig& cfg, const OptimizeBlock& b, Artifacts& out) {
    const auto s = setup(cfg);
    reject_control_parameter(b.protocol, s.model, "optimize.protocol", "the control is set by initial_control");
    // The initial guess rides in the control column so step-count defaults see it.
    ProtocolSpec spec = b.protocol;
    spec.parameters[s.model.control_term().name] = b.initial_control;
    const auto path = build_path(spec, s.model, "optimize.protocol");
    const qls::RVector col = path.values().col(static_cast<Eigen::Index>(s.model.control_index()));
    std::vector<double> control(col.data(), col.data() + col.size());

    qls::ControlProblem problem{s.model, path, s.psi0, s.theta,
                                {b.theta_target, b.w_terminal, b.w_running, b.w_fluence, b.protocol.duration}};
    problem.validate();
    const auto result = qls::optimize(problem, control, b.optimizer);
    out.add_with("history.csv", [&](std::ostream& os) { qls::io::write_history_csv(os, result.history); });
    out.add_with("field.csv", [&](std::ostream& os) { qls::io::write_field_csv(os, path.times(), result.control); });
    const auto final_traj = problem.forward(result.control);
    out.detail("optimizer_status", std::string(qls::to_string(result.status)));
    out.detail("accepted_iterations", result.accepted_iterations());
    out.detail("terminal_theta", final_traj.theta_values.back());
}

void mesh(const RunConfig& cfg, const MeshBlock& b, unsigned threads, Artifacts& out) {
    const auto s = setup(cfg);
    const auto axis_index = [&](const AxisSpec& ax, const std::string& path) {
        const auto idx = s.model.index_of(ax.term);
        if (!idx) throw ConfigError(path, "no model term named '" + ax.term + "'");
        if (*idx == s.model.control_index()) throw ConfigError(path, "the control term is the mesh label, not an axis");
        return *idx;
    };
    const std::size_t i1 = axis_index(b.axis1, "mesh.axis1.term");
    const std::size_t i2 = axis_index(b.axis2, "mesh.axis2.term");
    std::vector<std::pair<std::size_t, ParamSpec>> fixed;
    std::vector<double> max_abs(s.model.n_params(), 0.0);
    for (const auto& [name, p] : b.parameters) {
        const auto idx = s.model.index_of(name);
        if (!idx) throw ConfigError("mesh.parameters." + name, "no model term named '" + name + "'");
        if (*idx == s.model.control_index()) {
            throw ConfigError("mesh.parameters." + name, "the control term is set by the mesh labels");
        }
        fixed.emplace_back(*idx, p);
        max_abs[*idx] = p.max_abs();
    }
    const auto extent = [](const std::vector<double>& v) { return std::max(std::abs(v.front()), std::abs(v.back())); };
    max_abs[i1] = extent(b.axis1.values);
    max_abs[i2] = extent(b.axis2.values);
    max_abs[s.model.control_index()] = extent(b.labels);

    qls::levelset::ProtocolTemplate tmpl;
    tmpl.duration = b.duration;
    if (b.steps) {
        tmpl.steps = *b.steps;
    } else {
        const double bound = norm_bound(s.model, max_abs);
        if (!std::isfinite(bound)) throw ConfigError("mesh.steps", "Hamiltonian norm bound is not finite; give steps");
        tmpl.steps = qls::default_step_count(bound, b.duration);
    }
    const std::size_t n = s.model.n_params();
    const std::size_t ic = s.model.control_index();
    const double duration = b.duration;
    tmpl.parameters = [=](double a1, double a2, double a3, double t) {
        qls::RVector v = qls::RVector::Zero(static_cast<Eigen::Index>(n));
        for (const auto& [idx, p] : fixed) v(static_cast<Eigen::Index>(idx)) = p.at(t, duration);
        v(static_cast<Eigen::Index>(i1)) = a1;
        v(static_cast<Eigen::Index>(i2)) = a2;
        v(static_cast<Eigen::Index>(ic)) = a3;
        return v;
    };
    qls::levelset::MeshOptions mo;
    mo.statistic = b.statistic;
    mo.window = b.window;
    mo.threads = threads;

    std::ostringstream labels;
    labels << "index,a3,file\n";
    for (std::size_t k = 0; k < b.labels.size(); ++k) {
        const auto m = qls::levelset::evaluate_mesh(s.model, tmpl, s.psi0, s.theta, b.axis1.values, b.axis2.values,
                                                    b.labels[k], mo);
        const std::string file = numbered("mesh", k);
        out.add_with(file, [&](std::ostream& os) { qls::io::write_mesh_csv(os, m); });
        labels << k << ',' << qls::io::fmt(b.labels[k]) << ',' << file << '\n';
    }
    out.add("labels.csv", labels.str());
    out.detail("steps", tmpl.steps);
}

std::vector<qls::levelset::ParameterMesh> load_family(const ContourBlock& b, const fs::path& base) {
    std::vector<FamilyEntry> entries = b.family;
    fs::path dir = base;
    if (b.labels_file) {
        const fs::path lf = resolve(base, *b.labels_file);
        dir = lf.parent_path();
        auto in = open_input(lf);
        std::string line;
        if (!qls::io::detail::next_line(in, line) || line != "index,a3,file") {
            throw ConfigError("contour.labels_file", "'" + lf.string() + "' is not a labels file");
        }
        while (qls::io::detail::next_line(in, line)) {
            const auto cells = qls::io::detail::split(line);
            if (cells.size() != 3) throw ConfigError("contour.labels_file", "malformed row '" + line + "'");
            entries.push_back({cells[2], qls::io::detail::parse_double(cells[1], "labels file")});
        }
    }
    std::vector<qls::levelset::ParameterMesh> family;
    for (const auto& e : entries) {
        auto in = open_input(resolve(dir, e.file));
        family.push_back(qls::io::read_mesh_csv(in, e.label));
    }
    return family;
}

qls::levelset::ParameterMesh load_source(const MeshSource& src, const fs::path& base) {
    if (src.file) {
        auto in = open_input(resolve(base, *src.file));
        return qls::io::read_mesh_csv(in, src.label);
    }
    qls::levelset::ParameterMesh m;
    m.axis1 = src.grid->axis1;
    m.axis2 = src.grid->axis2;
    m.control_label = src.label;
    m.values.resize(static_cast<Eigen::Index>(m.axis1.size()), static_cast<Eigen::Index>(m.axis2.size()));
    for (std::size_t i = 0; i < m.axis1.size(); ++i) {
        for (std::size_t j = 0; j < m.axis2.size(); ++j) {
            m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = src.grid->values[i][j];
        }
    }
    return m;
}

void contour(const ContourBlock& b, const fs::path& base, Artifacts& out) {
    if (b.source) {
        const auto m = load_source(*b.source, base);
        std::ostringstream index;
        index << "index,level,file\n";
        for (std::size_t k = 0; k < b.levels.size(); ++k) {
            const auto curve = qls::levelset::extract_level(m, b.levels[k]);
            const std::string file = numbered("curves", k);
            out.add_with(file, [&](std::ostream& os) { qls::io::write_curve_csv(os, curve); });
            index << k << ',' << qls::io::fmt(b.levels[k]) << ',' << file << '\n';
        }
        if (!b.levels.empty()) out.add("levels.csv", index.str());
    }
    if (!b.follow && !b.stationarity) return;
    const auto family = load_family(b, base);

    if (b.stationarity) {
        const auto& st = *b.stationarity;
        std::vector<qls::levelset::ParameterMesh> costs;
        for (const auto& m : family) costs.push_back(qls::levelset::cost_surface(m.axis1, m.axis2, m.control_label, st.surface));
        qls::CostConfig cc;
        cc.theta_target = st.theta_target;
        cc.w_running = st.w_running;
        const auto r = qls::levelset::stationarity_residual(family, costs, st.index, cc);
        out.add_with("residual_mesh.csv", [&](std::ostream& os) { qls::io::write_mesh_csv(os, r); });
        const auto curve = qls::levelset::extract_level(r, st.level);
        out.add_with("stationarity_curve.csv", [&](std::ostream& os) { qls::io::write_curve_csv(os, curve); });
    }
    if (b.follow) {
        const auto& f = *b.follow;
        std::vector<double> a3;
        try {
            a3 = qls::levelset::follow_level(family, f.path, f.level, {f.interpolation});
        } catch (const qls::NoBracket& e) {
            throw Abort{kNoBracket,
                        {{"error", "no_bracket"},
                         {"sample", e.sample()},
                         {"range", {e.range_min(), e.range_max()}},
                         {"level", f.level},
                         {"message", e.what()}}};
        }
        std::ostringstream os;
        os << "sample,a1,a2,a3\n";
        for (std::size_t k = 0; k < a3.size(); ++k) {
            os << k << ',' << qls::io::fmt(f.path[k].a1) << ',' << qls::io::fmt(f.path[k].a2) << ','
               << qls::io::fmt(a3[k]) << '\n';
        }
        out.add("follow.csv", os.str());
    }
}

void intersect(const IntersectBlock& b, const fs::path& base, Artifacts& out) {
    auto ia = open_input(resolve(base, b.curve_a));
    auto ib = open_input(resolve(base, b.curve_b));
    const auto ca = qls::io::read_curve_csv(ia);
    const auto cb = qls::io::read_curve_csv(ib);
    const auto pts = qls::levelset::intersect(ca, cb);
    out.add_with("intersections.csv", [&](std::ostream& os) { qls::io::write_points_csv(os, pts); });
}

void report(std::ostream& err, const json& record) { err << record.dump() << '\n'; }

}  // namespace

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xF];
    }
    return out;
}

int run(const RunConfig& cfg, const RunOptions& opts, std::ostream& err) {
    const std::string command = command_name(cfg.block);
    std::optional<Artifacts> out;
    try {
        if (opts.threads == 0) throw ConfigError("threads", "thread count must be positive");
        fs::path dir;
        if (opts.out_dir) {
            dir = *opts.out_dir;
        } else if (cfg.output_dir) {
            dir = resolve(opts.base_dir, *cfg.output_dir);
        } else {
            throw ConfigError("output_dir", "no output directory in the config or on the command line");
        }
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
        out.emplace(dir);

        std::visit(
            [&](const auto& b) {
                using B = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<B, SimulateBlock>) simulate(cfg, b, *out);
                if constexpr (std::is_same_v<B, TrackBlock>) track(cfg, b, *out);
                if constexpr (std::is_same_v<B, OptimizeBlock>) optimize(cfg, b, *out);
                if constexpr (std::is_same_v<B, MeshBlock>) mesh(cfg, b, opts.threads, *out);
                if constexpr (std::is_same_v<B, ContourBlock>) contour(b, opts.base_dir, *out);
                if constexpr (std::is_same_v<B, IntersectBlock>) intersect(b, opts.base_dir, *out);
            },
            cfg.block);
        out->finish(command, "ok");
        return kOk;
    } catch (const Abort& a) {
        try {
            out->finish(command, a.record.at("error").get<std::string>());
        } catch (const IoError& e) {
            report(err, {{"error", "io"}, {"message", e.what()}});
            return kIoError;
        }
        report(err, a.record);
        return a.code;
    } catch (const ConfigError& e) {
        report(err, {{"error", "validation"}, {"path", e.path()}, {"message", e.what()}});
        return kValidation;
    } catch (const IoError& e) {
        report(err, {{"error", "io"}, {"message", e.what()}});
        return kIoError;
    } catch (const qls::SingularControl& e) {
        report(err, {{"error", "singular_control"}, {"denominator", e.denominator()}, {"message", e.what()}});
        return kSingularControl;
    } catch (const qls::NoBracket& e) {
        report(err, {{"error", "no_bracket"}, {"sample", e.sample()}, {"message", e.what()}});
        return kNoBracket;
    } catch (const qls::InvalidArgument& e) {
        report(err, {{"error", "validation"}, {"path", ""}, {"message", e.what()}});
        return kValidation;
    } catch (const qls::DimensionMismatch& e) {
        report(err, {{"error", "validation"}, {"path", ""}, {"message", e.what()}});
        return kValidation;
    } catch (const std::exception& e) {
        report(err, {{"error", "numerical"}, {"message", e.what()}});
        return kFailure;
    }
}

int run_file(const std::string& command, const fs::path& config, const RunOptions& opts, std::ostream& err) {
    RunConfig cfg;
    try {
        cfg = load_config(config);
        if (command_name(cfg.block) != command) {
            throw ConfigError(command_name(cfg.block), "config holds a '" + command_name(cfg.block) +
                                                           "' block but command '" + command + "' was requested");
        }
    } catch (const ConfigError& e) {
        report(err, {{"error", "validation"}, {"path", e.path()}, {"message", e.what()}});
        return kValidation;
    }
    RunOptions o = opts;
    o.base_dir = config.has_parent_path() ? config.parent_path() : fs::path(".");
    return run(cfg, o, err);
}

}  // namespace qlevel
