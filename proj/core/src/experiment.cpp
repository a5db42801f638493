#include "fedgc/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fedgc/csv.hpp"
#include "fedgc/rng.hpp"

namespace fedgc {

using nlohmann::json;

namespace {

// ---- JSON helpers -------------------------------------------------------

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
    throw std::invalid_argument("config: " + where + ": " + what);
}

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) config_error(where, "expected an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key())) config_error(where, "unknown key '" + item.key() + "'");
    }
}

double get_double(const json& obj, const char* key, double fallback, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number()) config_error(where + "." + key, "expected a number");
    return it->get<double>();
}

std::size_t get_size(const json& obj, const char* key, std::size_t fallback,
                     const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number_unsigned()) config_error(where + "." + key, "expected a non-negative integer");
    return it->get<std::size_t>();
}

Matrix matrix_of(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) config_error(where, "expected a non-empty array of rows");
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols) config_error(where, "rows differ in length");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[i][c].is_number()) config_error(where, "non-numeric entry");
            m(static_cast<Index>(i), static_cast<Index>(c)) = j[i][c].get<double>();
        }
    }
    return m;
}

Vector vector_of(const json& j, const std::string& where) {
    if (!j.is_array()) config_error(where, "expected an array");
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) config_error(where, "non-numeric entry");
        v(static_cast<Index>(i)) = j[i].get<double>();
    }
    return v;
}

json matrix_json(const Matrix& m) {
    json out = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(std::move(row));
    }
    return out;
}

json vector_json(const Vector& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

json optional_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

std::string block_key(std::size_t m, std::size_t n) {
    return std::to_string(m) + "," + std::to_string(n);
}

}  // namespace

// ---- system generation --------------------------------------------------

BlockSystem generate_system(const BlockSpec& spec, const GenerationPolicy& policy,
                            std::uint64_t seed) {
    const std::size_t M = spec.clients();
    if (!(policy.rho_max > 0.0) || !(policy.rho_max < 1.0)) {
        throw std::invalid_argument("generate_system: rho_max must lie in (0, 1)");
    }
    if (!policy.mask.empty()) {
        if (policy.mask.size() != M) throw std::invalid_argument("generate_system: mask must be M x M");
        for (const auto& row : policy.mask) {
            if (row.size() != M) throw std::invalid_argument("generate_system: mask must be M x M");
        }
    }
    auto linked = [&](std::size_t m, std::size_t n) {
        return !policy.mask.empty() && policy.mask[m][n];
    };

    CounterRng rng(seed, {static_cast<std::uint64_t>(StreamKind::generation), 0});
    const Index N = spec.state_dim();
    Matrix a = Matrix::Zero(N, N);
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t n = 0; n < M; ++n) {
            const double scale = (m == n) ? policy.diag_scale : (linked(m, n) ? policy.off_scale : 0.0);
            if (scale == 0.0) continue;
            for (Index j = 0; j < spec.dim(n); ++j) {
                for (Index i = 0; i < spec.dim(m); ++i) {
                    a(spec.state_offset(m) + i, spec.state_offset(n) + j) = scale * rng.normal();
                }
            }
        }
    }
    const double rho = spectral_radius(a);
    if (rho > policy.rho_max) a *= policy.rho_max / rho;

    std::vector<Matrix> c_blocks;
    for (std::size_t m = 0; m < M; ++m) {
        const Index rows = spec.obs_dim(m);
        const Index cols = spec.dim(m);
        const Index want = std::min(rows, cols);
        Matrix c;
        for (int attempt = 0;; ++attempt) {
            if (attempt == 100) throw std::invalid_argument("generate_system: no full-rank C block");
            CounterRng crng(seed, {static_cast<std::uint64_t>(StreamKind::generation), 1, m,
                                   static_cast<std::uint64_t>(attempt)});
            c = Matrix(rows, cols);
            for (Index j = 0; j < cols; ++j) {
                for (Index i = 0; i < rows; ++i) c(i, j) = crng.normal();
            }
            Eigen::JacobiSVD<Matrix> svd(c);
            const Vector s = svd.singularValues();
            if (s.size() == want && s(want - 1) > 1e-3 * s(0)) break;
        }
        c_blocks.push_back(std::move(c));
    }
    return BlockSystem(spec, std::move(a), block_diagonal(c_blocks), policy.q_proc, policy.r_meas);
}

// ---- config -------------------------------------------------------------

ExperimentConfig parse_config(const std::string& json_text) {
    json root = json::parse(json_text, nullptr, false);
    if (root.is_discarded()) throw std::invalid_argument("config: not valid JSON");
    allow_keys(root, "root", {"name", "seed", "system", "T", "training", "privacy", "analysis"});

    ExperimentConfig cfg;
    if (root.contains("name")) {
        if (!root["name"].is_string()) config_error("name", "expected a string");
        cfg.name = root["name"].get<std::string>();
    }
    if (root.contains("seed")) {
        if (!root["seed"].is_number_unsigned()) config_error("seed", "expected a non-negative integer");
        cfg.seed = root["seed"].get<std::uint64_t>();
    }
    cfg.T = get_size(root, "T", cfg.T, "root");

    if (!root.contains("system")) config_error("root", "missing 'system'");
    const json& sys = root["system"];
    allow_keys(sys, "system",
               {"dims", "obs_dims", "A", "C", "q_proc", "r_meas", "initial_state", "generate", "switch"});
    if (!sys.contains("dims") || !sys["dims"].is_array()) config_error("system.dims", "required array");
    std::vector<Index> dims;
    for (const auto& d : sys["dims"]) {
        if (!d.is_number_unsigned()) config_error("system.dims", "expected positive integers");
        dims.push_back(d.get<Index>());
    }
    std::vector<Index> obs = dims;
    if (sys.contains("obs_dims")) {
        obs.clear();
        for (const auto& d : sys["obs_dims"]) {
            if (!d.is_number_unsigned()) config_error("system.obs_dims", "expected positive integers");
            obs.push_back(d.get<Index>());
        }
    }
    cfg.spec = BlockSpec(dims, obs);
    cfg.generation.q_proc = get_double(sys, "q_proc", cfg.generation.q_proc, "system");
    cfg.generation.r_meas = get_double(sys, "r_meas", cfg.generation.r_meas, "system");
    if (sys.contains("A")) cfg.A = matrix_of(sys["A"], "system.A");
    if (sys.contains("C")) cfg.C = matrix_of(sys["C"], "system.C");
    if (sys.contains("initial_state")) cfg.initial_state = vector_of(sys["initial_state"], "system.initial_state");
    if (sys.contains("generate")) {
        const json& g = sys["generate"];
        allow_keys(g, "system.generate", {"mask", "diag_scale", "off_scale", "rho_max"});
        cfg.generation.diag_scale = get_double(g, "diag_scale", cfg.generation.diag_scale, "system.generate");
        cfg.generation.off_scale = get_double(g, "off_scale", cfg.generation.off_scale, "system.generate");
        cfg.generation.rho_max = get_double(g, "rho_max", cfg.generation.rho_max, "system.generate");
        if (g.contains("mask")) {
            for (const auto& row : g["mask"]) {
                if (!row.is_array()) config_error("system.generate.mask", "expected rows");
                std::vector<bool> r;
                for (const auto& x : row) {
                    if (x.is_boolean()) r.push_back(x.get<bool>());
                    else if (x.is_number()) r.push_back(x.get<double>() != 0.0);
                    else config_error("system.generate.mask", "expected booleans or 0/1");
                }
                cfg.generation.mask.push_back(std::move(r));
            }
        }
    }
    if (sys.contains("switch")) {
        const json& s = sys["switch"];
        allow_keys(s, "system.switch", {"at", "A"});
        if (!s.contains("A")) config_error("system.switch", "missing 'A'");
        cfg.regime_switch = RegimeSwitch{get_size(s, "at", 0, "system.switch"),
                                         matrix_of(s["A"], "system.switch.A")};
    }

    if (root.contains("training")) {
        const json& tr = root["training"];
        allow_keys(tr, "training",
                   {"eta1", "eta2", "gamma", "epochs", "tol", "mode", "window", "snapshot_every",
                    "pretrain_epochs", "through_wire"});
        TrainingConfig& t = cfg.training;
        t.eta1 = get_double(tr, "eta1", t.eta1, "training");
        t.eta2 = get_double(tr, "eta2", t.eta2, "training");
        t.gamma = get_double(tr, "gamma", t.gamma, "training");
        t.epochs = get_size(tr, "epochs", t.epochs, "training");
        t.tol = get_double(tr, "tol", t.tol, "training");
        t.window = get_size(tr, "window", t.window, "training");
        t.snapshot_every = get_size(tr, "snapshot_every", t.snapshot_every, "training");
        t.pretrain_epochs = get_size(tr, "pretrain_epochs", t.pretrain_epochs, "training");
        if (tr.contains("mode")) {
            if (!tr["mode"].is_string()) config_error("training.mode", "expected a string");
            t.mode = parse_mode(tr["mode"].get<std::string>());
        }
        if (tr.contains("through_wire")) {
            if (!tr["through_wire"].is_boolean()) config_error("training.through_wire", "expected a boolean");
            t.through_wire = tr["through_wire"].get<bool>();
        }
    }
    cfg.training.seed = cfg.seed;

    if (root.contains("privacy")) {
        const json& p = root["privacy"];
        allow_keys(p, "privacy",
                   {"mode", "eps_c", "delta_c", "eps_a", "delta_a", "eps_g", "delta_g", "B_y", "B_K",
                    "B_theta", "C_g"});
        PrivacyParams pp;
        pp.eps_c = get_double(p, "eps_c", pp.eps_c, "privacy");
        pp.delta_c = get_double(p, "delta_c", pp.delta_c, "privacy");
        pp.eps_a = get_double(p, "eps_a", pp.eps_a, "privacy");
        pp.delta_a = get_double(p, "delta_a", pp.delta_a, "privacy");
        pp.eps_g = get_double(p, "eps_g", pp.eps_g, "privacy");
        pp.delta_g = get_double(p, "delta_g", pp.delta_g, "privacy");
        pp.B_y = get_double(p, "B_y", pp.B_y, "privacy");
        pp.B_K = get_double(p, "B_K", pp.B_K, "privacy");
        pp.B_theta = get_double(p, "B_theta", pp.B_theta, "privacy");
        pp.C_g = get_double(p, "C_g", pp.C_g, "privacy");
        cfg.training.privacy = pp;
        const std::string mode = p.value("mode", std::string("enforce"));
        if (mode == "enforce") cfg.training.privacy_mode = PrivacyMode::enforce;
        else if (mode == "audit") cfg.training.privacy_mode = PrivacyMode::audit;
        else config_error("privacy.mode", "expected 'enforce' or 'audit'");
    }

    if (root.contains("analysis")) {
        const json& an = root["analysis"];
        allow_keys(an, "analysis", {"recurrence_t", "oracle", "lipschitz", "mu"});
        if (an.contains("recurrence_t")) {
            for (const auto& t : an["recurrence_t"]) {
                if (!t.is_number_unsigned()) config_error("analysis.recurrence_t", "expected integers");
                cfg.analysis.recurrence_times.push_back(t.get<std::size_t>());
            }
        }
        if (an.contains("oracle")) {
            if (!an["oracle"].is_boolean()) config_error("analysis.oracle", "expected a boolean");
            cfg.analysis.oracle = an["oracle"].get<bool>();
        }
        cfg.analysis.lipschitz = get_double(an, "lipschitz", cfg.analysis.lipschitz, "analysis");
        if (an.contains("mu")) cfg.analysis.mu = get_double(an, "mu", 0.0, "analysis");
    }

    cfg.training.validate();
    if (cfg.A) {
        require_shape(*cfg.A, cfg.spec.state_dim(), cfg.spec.state_dim(), "config: system.A");
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

namespace {

json config_json(const ExperimentConfig& cfg) {
    json sys;
    sys["dims"] = cfg.spec.dims();
    sys["obs_dims"] = cfg.spec.obs_dims();
    sys["q_proc"] = cfg.generation.q_proc;
    sys["r_meas"] = cfg.generation.r_meas;
    if (cfg.A) sys["A"] = matrix_json(*cfg.A);
    if (cfg.C) sys["C"] = matrix_json(*cfg.C);
    if (cfg.initial_state) sys["initial_state"] = vector_json(*cfg.initial_state);
    if (!cfg.A) {
        json g;
        g["diag_scale"] = cfg.generation.diag_scale;
        g["off_scale"] = cfg.generation.off_scale;
        g["rho_max"] = cfg.generation.rho_max;
        json mask = json::array();
        for (const auto& row : cfg.generation.mask) {
            json r = json::array();
            for (bool b : row) r.push_back(b);
            mask.push_back(r);
        }
        g["mask"] = mask;
        sys["generate"] = g;
    }
    if (cfg.regime_switch) {
        sys["switch"] = {{"at", cfg.regime_switch->at}, {"A", matrix_json(cfg.regime_switch->A_after)}};
    }
    const TrainingConfig& t = cfg.training;
    json tr = {{"eta1", t.eta1},
               {"eta2", t.eta2},
               {"gamma", t.gamma},
               {"epochs", t.epochs},
               {"tol", t.tol},
               {"mode", to_string(t.mode)},
               {"window", t.window},
               {"snapshot_every", t.snapshot_every},
               {"pretrain_epochs", t.pretrain_epochs},
               {"through_wire", t.through_wire}};
    json root = {{"name", cfg.name}, {"seed", cfg.seed}, {"T", cfg.T}, {"system", sys}, {"training", tr}};
    if (t.privacy) {
        const PrivacyParams& p = *t.privacy;
        root["privacy"] = {{"mode", t.privacy_mode == PrivacyMode::audit ? "audit" : "enforce"},
                           {"eps_c", p.eps_c}, {"delta_c", p.delta_c}, {"eps_a", p.eps_a},
                           {"delta_a", p.delta_a}, {"eps_g", p.eps_g}, {"delta_g", p.delta_g},
                           {"B_y", p.B_y}, {"B_K", p.B_K}, {"B_theta", p.B_theta}, {"C_g", p.C_g}};
    }
    json an = {{"recurrence_t", cfg.analysis.recurrence_times},
               {"oracle", cfg.analysis.oracle},
               {"lipschitz", cfg.analysis.lipschitz}};
    if (cfg.analysis.mu) an["mu"] = *cfg.analysis.mu;
    root["analysis"] = an;
    return root;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& config) { return config_json(config).dump(2); }

// ---- running ------------------------------------------------------------

MetricsOutput run_experiment(const ExperimentConfig& config) {
    config.training.validate();
    const BlockSpec& spec = config.spec;
    const std::size_t M = spec.clients();

    BlockSystem system = [&] {
        if (!config.A) {
            BlockSystem generated = generate_system(spec, config.generation, config.seed);
            if (!config.C) return generated;
            return BlockSystem(spec, generated.A(), *config.C, config.generation.q_proc,
                               config.generation.r_meas);
        }
        Matrix c;
        if (config.C) {
            c = *config.C;
        } else {
            std::vector<Matrix> blocks;
            for (std::size_t m = 0; m < M; ++m) {
                if (spec.dim(m) != spec.obs_dim(m)) {
                    throw std::invalid_argument(
                        "config: system.C is required when measurement and state dimensions differ");
                }
                blocks.push_back(Matrix::Identity(spec.dim(m), spec.dim(m)));
            }
            c = block_diagonal(blocks);
        }
        return BlockSystem(spec, *config.A, std::move(c), config.generation.q_proc,
                           config.generation.r_meas);
    }();

    MetricsOutput out;
    out.config = config;
    out.A_true = system.A();
    out.C_true = system.C();

    const Vector h0 = config.initial_state ? *config.initial_state : Vector::Zero(spec.state_dim());
    const Trajectory traj = simulate(system, config.T, config.seed, h0, config.regime_switch);
    const FederationSetup setup = prepare_federation(system, traj);
    for (std::size_t m = 0; m < M; ++m) {
        out.gain_radii.push_back(closed_loop_radius(setup.a_diag[m], setup.gains[m], setup.c_diag[m]));
    }

    TrainingConfig training = config.training;
    training.seed = config.seed;
    TrainingResult result = run_training(setup, training);
    out.log = std::move(result.log);
    out.thetas = std::move(result.thetas);
    out.A_hat = std::move(result.A_hat);
    if (!out.log.rounds.empty()) {
        const RoundRecord& last = out.log.rounds.back();
        out.final_epoch = last.epoch;
        out.final_t = last.t;
        out.final_k = last.k;
    }

    const BlockGrid a_hat0 = training.initial_A_hat ? *training.initial_A_hat : zero_off_diagonal(spec);
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t n = 0; n < M; ++n) {
            if (m == n) continue;
            const Matrix truth = system.A_block(m, n);
            out.parameter_errors.push_back(
                {m, n, (a_hat0[m][n] - truth).norm(), (out.A_hat[m][n] - truth).norm()});
        }
    }

    const std::size_t window = std::min(training.window, config.T);
    if (config.analysis.oracle && config.T >= 1) {
        const OracleTrace oracle = run_oracle(system, traj.measurements);
        out.oracle_radius = oracle.closed_loop_radius;
        const AlignedTrajectories aligned = align_trajectories(
            spec, oracle, setup.traces, setup.a_diag, out.thetas, setup.measurements);
        out.oracle_gap = oracle_gap(spec, aligned, window);
        const ServerModel final_server(spec, setup.a_diag, training.gamma, out.A_hat);
        out.granger_bounds = granger_error_bound(spec, final_server.assembled(), system.A(),
                                                 out.oracle_gap->delta_max, oracle.estimates, window);
    }
    if (config.T >= 1) out.optimality = optimality_residuals(setup, out.thetas, out.A_hat, window);

    if (config.T >= 1) {
        std::vector<std::size_t> times = config.analysis.recurrence_times;
        if (times.empty()) times.push_back(config.T);
        for (std::size_t t : times) {
            if (t < 1 || t > config.T) {
                throw std::invalid_argument("config: analysis.recurrence_t entry " + std::to_string(t) +
                                            " outside [1, T]");
            }
            for (std::size_t m = 0; m < M; ++m) {
                const RecurrenceSystem rs = build_recurrence(spec, m, t, recurrence_inputs(setup, m, t),
                                                             training.eta1, training.eta2, training.gamma);
                const ConvergenceVerdict v = convergence_verdict(rs.H, rs.J);
                const RateCheck rc = rate_check(rs.H, config.analysis.lipschitz, config.analysis.mu);
                out.recurrence.push_back(
                    {m, t, v.rho, v.convergent, v.near_singular, rc.norm, rc.sublinear_ok, rc.linear_ok});
            }
        }
    }

    try {
        out.covariance = steady_state_covariance(system.A(), system.q_proc());
        out.non_iid = non_iid_diagnostics(*out.covariance, spec);
    } catch (const NumericalError&) {
        // Unstable or ill-conditioned ground truth: no steady state to report.
    }
    return out;
}

// ---- output ---------------------------------------------------------------

std::string losses_csv(const MetricsOutput& metrics) {
    const std::size_t M = metrics.config.spec.clients();
    const bool has_server = metrics.log.mode != TrainingMode::no_server;
    std::ostringstream out;
    CsvRow header{"epoch", "t", "k", "phase"};
    if (has_server) header.push_back("L_s");
    for (std::size_t m = 0; m < M; ++m) header.push_back("L_a_" + std::to_string(m));
    header.push_back("grad_A_norm");
    header.push_back("c2s");
    header.push_back("s2c");
    write_csv_row(out, header);
    for (const RoundRecord& r : metrics.log.rounds) {
        CsvRow row{std::to_string(r.epoch), std::to_string(r.t), std::to_string(r.k),
                   r.pretraining ? "pretrain" : "train"};
        if (has_server) row.push_back(r.server_loss ? format_double(*r.server_loss) : "");
        for (double l : r.client_losses) row.push_back(format_double(l));
        row.push_back(format_double(r.grad_A_norm));
        row.push_back(std::to_string(r.c2s));
        row.push_back(std::to_string(r.s2c));
        write_csv_row(out, row);
    }
    return out.str();
}

std::string params_csv(const MetricsOutput& metrics) {
    std::ostringstream out;
    write_csv_row(out, {"epoch", "t", "k", "param", "i", "j", "value"});
    auto emit = [&](const ParameterSnapshot& s, const std::string& name, const Matrix& x) {
        for (Index i = 0; i < x.rows(); ++i) {
            for (Index j = 0; j < x.cols(); ++j) {
                write_csv_row(out, {std::to_string(s.epoch), std::to_string(s.t), std::to_string(s.k),
                                    name, std::to_string(i), std::to_string(j), format_double(x(i, j))});
            }
        }
    };
    for (const ParameterSnapshot& s : metrics.log.snapshots) {
        for (std::size_t m = 0; m < s.thetas.size(); ++m) emit(s, "theta_" + std::to_string(m), s.thetas[m]);
        for (std::size_t m = 0; m < s.A_hat.size(); ++m) {
            for (std::size_t n = 0; n < s.A_hat[m].size(); ++n) {
                if (m != n) emit(s, "A_hat_" + std::to_string(m) + "_" + std::to_string(n), s.A_hat[m][n]);
            }
        }
    }
    return out.str();
}

std::string metrics_json(const MetricsOutput& mx) {
    const BlockSpec& spec = mx.config.spec;
    json root;
    root["config"] = config_json(mx.config);
    root["system"] = {{"A", matrix_json(mx.A_true)}, {"C", matrix_json(mx.C_true)}};
    const json provenance = {{"epoch", mx.final_epoch}, {"t", mx.final_t}, {"k", mx.final_k}};
    root["provenance"] = provenance;

    json epochs = json::array();
    for (const EpochRecord& e : mx.log.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"phase", e.pretraining ? "pretrain" : "train"},
                          {"mean_L_s", optional_json(e.mean_server_loss)},
                          {"mean_L_a", e.mean_client_losses}});
    }
    root["training"] = {{"mode", to_string(mx.log.mode)},
                        {"rounds", mx.log.rounds.size()},
                        {"stopped_on_tol", mx.log.stopped_on_tol},
                        {"messages",
                         {{"setup", mx.log.messages.setup},
                          {"c2s", mx.log.messages.c2s},
                          {"s2c", mx.log.messages.s2c}}},
                        {"epochs", epochs}};

    json thetas = json::array();
    for (const Matrix& th : mx.thetas) thetas.push_back(matrix_json(th));
    json a_hat = json::object();
    for (std::size_t m = 0; m < mx.A_hat.size(); ++m) {
        for (std::size_t n = 0; n < mx.A_hat[m].size(); ++n) {
            if (m != n) a_hat[block_key(m, n)] = matrix_json(mx.A_hat[m][n]);
        }
    }
    root["final"] = {{"theta", thetas}, {"A_hat", a_hat}};

    json errors = json::array();
    for (const ParameterError& e : mx.parameter_errors) {
        const double drop = e.initial > 0.0 ? 1.0 - e.final / e.initial : 0.0;
        errors.push_back({{"m", e.m}, {"n", e.n}, {"initial", e.initial}, {"final", e.final},
                          {"relative_drop", drop}});
    }
    root["parameter_errors"] = errors;

    json checks;
    checks["provenance"] = provenance;
    json filters = {{"client_closed_loop_radius", mx.gain_radii},
                    {"oracle_closed_loop_radius", mx.oracle_radius}};
    checks["filters"] = filters;
    if (mx.oracle_gap) {
        json means = json::array();
        for (const Vector& g : mx.oracle_gap->state_gap_means) means.push_back(vector_json(g));
        checks["oracle_gap"] = {{"window", mx.oracle_gap->window},
                                {"state_gap_means", means},
                                {"delta_max", mx.oracle_gap->delta_max},
                                {"gap_norm", mx.oracle_gap->gap_norm},
                                {"mean_oracle_norm", mx.oracle_gap->mean_oracle_norm},
                                {"relative_gap", mx.oracle_gap->relative_gap}};
    }
    json bounds = json::array();
    for (std::size_t m = 0; m < mx.granger_bounds.size(); ++m) {
        const GrangerBound& b = mx.granger_bounds[m];
        json rec = {{"m", m}, {"lhs", b.lhs}, {"rhs", b.rhs}, {"holds", b.holds}};
        if (b.corollary_applicable) {
            rec["corollary"] = {{"lhs", b.corollary_lhs}, {"rhs", b.corollary_rhs},
                                {"sigma_min", b.sigma_min}, {"holds", b.corollary_holds}};
        } else {
            rec["corollary"] = "not applicable";
        }
        bounds.push_back(rec);
    }
    checks["granger_bound"] = bounds;
    if (mx.optimality) {
        json cond2 = json::array();
        for (std::size_t m = 0; m < mx.optimality->cond2.size(); ++m) {
            for (std::size_t n = 0; n < mx.optimality->cond2[m].size(); ++n) {
                if (m != n) cond2.push_back({{"m", m}, {"n", n}, {"norm", mx.optimality->cond2[m][n]}});
            }
        }
        checks["optimality"] = {{"cond1", mx.optimality->cond1}, {"cond2", cond2}};
    }
    json rec = json::array();
    for (const RecurrenceRecord& r : mx.recurrence) {
        json x = {{"m", r.m}, {"t", r.t}, {"rho", r.rho}, {"convergent", r.convergent},
                  {"near_singular", r.near_singular}, {"norm_I_minus_H", r.rate_norm},
                  {"sublinear_ok", r.sublinear_ok}};
        x["linear_ok"] = r.linear_ok ? json(*r.linear_ok) : json(nullptr);
        rec.push_back(x);
    }
    checks["recurrence"] = rec;
    if (mx.non_iid) {
        json blocks = json::array();
        for (std::size_t m = 0; m < spec.clients(); ++m) {
            blocks.push_back(matrix_json(mx.covariance->block(spec, m, m)));
        }
        checks["non_iid"] = {{"identical", mx.non_iid->identical},
                             {"independent", mx.non_iid->independent},
                             {"variance_gap", mx.non_iid->variance_gap},
                             {"cross_norm", mx.non_iid->cross_norm},
                             {"steady_state_covariance", matrix_json(mx.covariance->sigma)},
                             {"lyapunov_relative_residual", mx.covariance->relative_residual}};
    }
    root["checks"] = checks;

    if (mx.log.privacy) {
        const PrivacyParams& p = *mx.log.privacy;
        const PrivacyBudget per = composed_client_budget(p);
        const PrivacyBudget run = run_budget(per, mx.log.rounds.size());
        json pj = {{"mode", mx.log.audit ? "audit" : "enforce"},
                   {"sigma_c", p.sigma_c}, {"sigma_a", p.sigma_a}, {"sigma_g", p.sigma_g},
                   {"B_y", p.B_y}, {"B_K", p.B_K}, {"B_theta", p.B_theta}, {"C_g", p.C_g},
                   {"client_budget_per_message", {{"eps", per.eps}, {"delta", per.delta}}},
                   {"gradient_budget_per_message", {{"eps", p.eps_g}, {"delta", p.delta_g}}},
                   {"client_budget_naive_run_total", {{"eps", run.eps}, {"delta", run.delta}}},
                   {"warning", composition_warning()}};
        if (mx.log.audit) {
            pj["observed"] = {{"max_y", mx.log.audit->max_y}, {"max_K", mx.log.audit->max_K},
                              {"max_theta", mx.log.audit->max_theta},
                              {"max_grad", mx.log.audit->max_grad}};
        }
        root["privacy"] = pj;
    }
    return root.dump(2) + "\n";
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

OutputPaths emit_outputs(const MetricsOutput& metrics, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
    OutputPaths paths{dir / "losses.csv", dir / "params.csv", dir / "metrics.json", dir / "runtime.json"};
    write_file(paths.losses_csv, losses_csv(metrics));
    write_file(paths.params_csv, params_csv(metrics));
    write_file(paths.metrics_json, metrics_json(metrics));
    json runtime = {{"wall_clock_seconds", metrics.log.wall_clock_seconds},
                    {"rounds", metrics.log.rounds.size()}};
    write_file(paths.runtime_json, runtime.dump(2) + "\n");
    return paths;
}

void emit_failure(const std::filesystem::path& dir, const std::string& stage,
                  const std::string& message) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    json j = {{"status", "failed"}, {"stage", stage}, {"error", message}};
    std::ofstream out(dir / "FAILED.json", std::ios::binary);
    out << j.dump(2) << "\n";
}

std::filesystem::path default_output_dir() {
    if (const char* env = std::getenv("FEDGC_OUT_DIR"); env && *env) return env;
    return "fedgc-out";
}

// ---- self-checks ------------------------------------------------------------

std::vector<CheckResult> run_verification(std::uint64_t seed) {
    std::vector<CheckResult> out;
    CounterRng rng(seed, {static_cast<std::uint64_t>(StreamKind::test), 1});
    auto random_matrix = [&](Index r, Index c) {
        Matrix m(r, c);
        for (Index j = 0; j < c; ++j) {
            for (Index i = 0; i < r; ++i) m(i, j) = rng.normal();
        }
        return m;
    };
    auto dim = [&] { return static_cast<Index>(1 + rng() % 4); };

    double kron_err = 0.0;
    for (int i = 0; i < 200; ++i) {
        const Index a = dim(), b = dim(), c = dim(), d = dim();
        const Matrix X = random_matrix(a, b), Y = random_matrix(b, c), Z = random_matrix(c, d);
        kron_err = std::max(kron_err, (vec(X * Y * Z) - kron(Z.transpose(), X) * vec(Y)).cwiseAbs().maxCoeff());
    }
    out.push_back({"vec/kron identity (max abs error)", kron_err, 1e-12, kron_err < 1e-12});

    const double lyap = std::abs(steady_state_covariance(Matrix::Constant(1, 1, 0.5), 1.0).sigma(0, 0) - 4.0 / 3.0);
    out.push_back({"scalar Lyapunov 4/3 (abs error)", lyap, 1e-12, lyap < 1e-12});

    // Recurrence against a direct federation round on a random 2-client system.
    const BlockSpec spec({1, 2}, {1, 2});
    GenerationPolicy policy;
    policy.mask = {{false, true}, {true, false}};
    const BlockSystem sys = generate_system(spec, policy, seed);
    const Trajectory traj = simulate(sys, 20, seed, Vector::Ones(spec.state_dim()));
    const FederationSetup setup = prepare_federation(sys, traj);
    std::vector<Matrix> thetas{random_matrix(1, 1), random_matrix(2, 2)};
    BlockGrid grid = zero_off_diagonal(spec);
    grid[0][1] = random_matrix(1, 2);
    grid[1][0] = random_matrix(2, 1);
    const ServerModel server(spec, setup.a_diag, 0.03, grid);
    const std::size_t t = 10;
    const RoundUpdate upd = federation_round(setup, thetas, server, t, 0.02, 0.01);
    double eq_err = 0.0;
    for (std::size_t m = 0; m < 2; ++m) {
        const RecurrenceSystem rs = build_recurrence(spec, m, t, recurrence_inputs(setup, m, t), 0.02, 0.01, 0.03);
        const Vector lhs = stack_delta(rs.layout, upd.A_hat, upd.thetas[m]);
        const Vector rhs = recurrence_step(rs.H, rs.J, stack_delta(rs.layout, grid, thetas[m]));
        eq_err = std::max(eq_err, (lhs - rhs).cwiseAbs().maxCoeff());
    }
    out.push_back({"recurrence vs federation round (max abs error)", eq_err, 1e-10, eq_err < 1e-10});

    const Matrix g = random_matrix(3, 3) * 10.0;
    const double clipped = clip(g, 1.0).norm();
    out.push_back({"clip bound (Frobenius norm)", clipped, 1.0, clipped <= 1.0});
    return out;
}

}  // namespace fedgc
