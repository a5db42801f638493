#include "fedgc/federation.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "fedgc/kalman.hpp"

namespace fedgc {

std::string to_string(TrainingMode mode) {
    switch (mode) {
        case TrainingMode::full: return "full";
        case TrainingMode::no_augmentation: return "no_augmentation";
        case TrainingMode::no_server: return "no_server";
        case TrainingMode::pretrained_clients: return "pretrained_clients";
    }
    return "unknown";
}

TrainingMode parse_mode(const std::string& name) {
    if (name == "full") return TrainingMode::full;
    if (name == "no_augmentation") return TrainingMode::no_augmentation;
    if (name == "no_server") return TrainingMode::no_server;
    if (name == "pretrained_clients") return TrainingMode::pretrained_clients;
    throw std::invalid_argument("unknown training mode '" + name +
                                "' (expected full, no_augmentation, no_server, pretrained_clients)");
}

void TrainingConfig::validate() const {
    if (!(tol > 0.0)) throw std::invalid_argument("TrainingConfig: tol must be positive");
    if (epochs < 1) throw std::invalid_argument("TrainingConfig: epochs must be at least 1");
    if (eta1 < 0.0 || eta2 < 0.0 || gamma < 0.0) {
        throw std::invalid_argument("TrainingConfig: learning rates must be non-negative");
    }
    if (window < 1) throw std::invalid_argument("TrainingConfig: window must be at least 1");
}

std::size_t FederationSetup::horizon() const {
    return measurements.empty() || measurements[0].empty() ? 0 : measurements[0].size() - 1;
}

FederationSetup prepare_federation(const BlockSystem& system, const Trajectory& trajectory,
                                   const std::optional<std::vector<Matrix>>& gains) {
    const BlockSpec& spec = system.spec();
    FederationSetup setup{spec, system.A_diagonal(), system.C_diagonal(), {}, {}, {}};
    if (gains) {
        if (gains->size() != spec.clients()) {
            throw std::invalid_argument("prepare_federation: one gain per client required");
        }
        setup.gains = *gains;
    } else {
        for (std::size_t m = 0; m < spec.clients(); ++m) {
            setup.gains.push_back(
                steady_state_gain(setup.a_diag[m], setup.c_diag[m], system.q_proc(), system.r_meas())
                    .gain);
        }
    }
    setup.measurements = split_measurements(spec, trajectory.measurements);
    for (std::size_t m = 0; m < spec.clients(); ++m) {
        ClientModel model(m, setup.a_diag[m], setup.c_diag[m], setup.gains[m]);
        setup.traces.push_back(run_client(std::move(model), setup.measurements[m]));
    }
    return setup;
}

CounterRng privacy_stream(std::uint64_t seed, StreamKind kind, std::size_t client, std::size_t k) {
    return CounterRng(seed, {static_cast<std::uint64_t>(kind), client, k});
}

namespace {

constexpr std::chrono::milliseconds kBarrierTimeout{10000};

void check_setup(const FederationSetup& setup) {
    const std::size_t M = setup.spec.clients();
    if (setup.a_diag.size() != M || setup.c_diag.size() != M || setup.gains.size() != M ||
        setup.measurements.size() != M || setup.traces.size() != M) {
        throw std::invalid_argument("federation: setup must hold one entry per client");
    }
    const std::size_t len = setup.measurements[0].size();
    for (std::size_t m = 0; m < M; ++m) {
        if (setup.measurements[m].size() != len || setup.traces[m].estimates.size() != len) {
            std::ostringstream msg;
            msg << "federation: inconsistent stream lengths for client " << m << " ("
                << setup.measurements[m].size() << " measurements, "
                << setup.traces[m].estimates.size() << " estimates, expected " << len << ")";
            throw std::invalid_argument(msg.str());
        }
    }
}

std::vector<Matrix> initial_thetas(const FederationSetup& setup, const TrainingConfig& config) {
    const BlockSpec& spec = setup.spec;
    std::vector<Matrix> thetas;
    for (std::size_t m = 0; m < spec.clients(); ++m) {
        thetas.push_back(Matrix::Zero(spec.dim(m), spec.obs_dim(m)));
    }
    if (config.initial_theta) {
        if (config.initial_theta->size() != spec.clients()) {
            throw std::invalid_argument("federation: initial_theta needs one matrix per client");
        }
        for (std::size_t m = 0; m < spec.clients(); ++m) {
            require_shape((*config.initial_theta)[m], spec.dim(m), spec.obs_dim(m),
                          "federation: initial theta");
            thetas[m] = (*config.initial_theta)[m];
        }
    }
    return thetas;
}

double grid_norm(const BlockGrid& grid) {
    double sq = 0.0;
    for (std::size_t m = 0; m < grid.size(); ++m) {
        for (std::size_t n = 0; n < grid[m].size(); ++n) {
            if (m != n) sq += grid[m][n].squaredNorm();
        }
    }
    return std::sqrt(sq);
}

// Client-side actor. Owns theta; the filter outputs come from the pre-pass.
class ClientActor {
public:
    ClientActor(std::size_t id, const FederationSetup& setup, Matrix theta, double eta1, double eta2)
        : id_(id), setup_(setup),
          model_(ClientModel(id, setup.a_diag[id], setup.c_diag[id], setup.gains[id]), eta1, eta2,
                 std::move(theta)) {}

    void set_learning(bool on) { learning_ = on; }
    const Matrix& theta() const { return model_.theta(); }
    double last_loss() const { return last_loss_; }
    double last_grad_norm() const { return grad_client_.norm(); }

    SetupMsg setup_message() const { return SetupMsg{id_, model_.base().A()}; }

    /// Local part of round t: augmented estimate for t-1, prediction for t,
    /// client loss and its gradient at the current theta.
    ClientToServerMsg emit(std::size_t t, std::size_t k) {
        const Vector& h_c = setup_.traces[id_].estimates[t - 1];
        const Vector& y_prev = setup_.measurements[id_][t - 1];
        const Vector& y_t = setup_.measurements[id_][t];
        model_.augmented_estimate(h_c, y_prev);
        model_.augmented_predict();
        last_loss_ = model_.loss(y_t);
        grad_client_ = model_.grad_theta(y_t, y_prev, h_c);
        return ClientToServerMsg{id_, t, k, model_.h_hat_a(), h_c};
    }

    void absorb(const Vector& server_grad, std::size_t t) {
        if (learning_) model_.update(grad_client_, server_grad, setup_.measurements[id_][t - 1]);
    }

    /// No server: the eta2 term is dropped.
    void local_update(std::size_t t) {
        if (!learning_) return;
        model_.update(grad_client_, Vector::Zero(model_.base().dim()),
                      setup_.measurements[id_][t - 1]);
    }

private:
    std::size_t id_;
    const FederationSetup& setup_;
    AugmentedClientModel model_;
    bool learning_ = true;
    double last_loss_ = 0.0;
    Matrix grad_client_;
};

// Server-side actor.
class ServerActor {
public:
    ServerActor(const BlockSpec& spec, std::vector<Matrix> a_diag, double gamma, BlockGrid a_hat)
        : model_(spec, std::move(a_diag), gamma, std::move(a_hat)) {}

    const ServerModel& model() const { return model_; }

    struct Outcome {
        double loss = 0.0;
        double grad_A_norm = 0.0;
        std::vector<Vector> state_grads;
    };

    Outcome round(std::vector<ClientToServerMsg> msgs, std::size_t t) {
        std::vector<Vector> h_c;
        std::vector<Vector> h_a;
        for (auto& msg : msgs) {
            h_c.push_back(std::move(msg.h_hat_c));
            h_a.push_back(std::move(msg.h_hat_a));
        }
        const ServerRound r = make_round(model_, t, std::move(h_c), std::move(h_a));
        ServerGradients grads = server_gradients(model_, r);
        A_update(model_, grads.grad_A);
        return Outcome{r.loss, grid_norm(grads.grad_A), std::move(grads.grad_state)};
    }

private:
    ServerModel model_;
};

}  // namespace

TrainingResult run_training(const FederationSetup& setup, const TrainingConfig& config) {
    config.validate();
    check_setup(setup);
    const auto started = std::chrono::steady_clock::now();

    const BlockSpec& spec = setup.spec;
    const std::size_t M = spec.clients();
    const std::size_t T = setup.horizon();
    const TrainingMode mode = config.mode;
    const bool has_server = mode != TrainingMode::no_server;

    std::vector<Matrix> thetas0 = initial_thetas(setup, config);
    BlockGrid a_hat0 = config.initial_A_hat ? *config.initial_A_hat : zero_off_diagonal(spec);

    TrainingResult result;
    TrainingLog& log = result.log;
    log.mode = mode;

    std::optional<PrivacyParams> privacy;
    SensitivityAudit audit;
    const bool auditing = config.privacy && config.privacy_mode == PrivacyMode::audit;
    const bool enforcing = config.privacy && config.privacy_mode == PrivacyMode::enforce;
    if (enforcing) privacy = calibrate(*config.privacy);

    std::vector<ClientActor> clients;
    clients.reserve(M);
    for (std::size_t m = 0; m < M; ++m) {
        clients.emplace_back(m, setup, thetas0[m], config.eta1, config.eta2);
        if (mode == TrainingMode::no_augmentation) clients[m].set_learning(false);
    }

    InProcessBus bus(M, config.through_wire);
    std::optional<ServerActor> server;
    if (has_server) {
        for (auto& c : clients) bus.send(c.setup_message());
        std::vector<Matrix> a_diag;
        for (auto& msg : bus.gather_setup(kBarrierTimeout)) a_diag.push_back(std::move(msg.a_mm));
        server.emplace(spec, std::move(a_diag), config.gamma, a_hat0);
    }

    if (auditing) {
        for (std::size_t m = 0; m < M; ++m) {
            audit.observe_gain(setup.gains[m]);
            for (const auto& y : setup.measurements[m]) audit.observe_measurement(y);
            audit.observe_theta(thetas0[m]);
        }
    }

    const std::size_t every =
        config.snapshot_every > 0 ? config.snapshot_every : (spec.scalar() ? 1 : std::max<std::size_t>(T, 1));

    std::size_t k = 0;
    auto snapshot = [&](std::size_t epoch, std::size_t t) {
        ParameterSnapshot s{epoch, t, k, {}, server ? server->model().A_hat_grid() : a_hat0};
        for (const auto& c : clients) s.thetas.push_back(c.theta());
        log.snapshots.push_back(std::move(s));
    };

    // Client-only rounds: the no_server mode, and the pretraining phase.
    auto local_epoch = [&](std::size_t epoch, bool pretraining) {
        EpochRecord er{epoch, pretraining, std::nullopt, std::vector<double>(M, 0.0)};
        for (std::size_t t = 1; t <= T; ++t) {
            RoundRecord rec{epoch, t, k, pretraining, std::nullopt, {}, 0.0, {}, 0, 0};
            for (auto& c : clients) {
                c.emit(t, k);  // local computation only; nothing is sent
                c.local_update(t);
                rec.client_losses.push_back(c.last_loss());
                rec.theta_grad_norms.push_back(c.last_grad_norm());
                if (auditing) audit.observe_theta(c.theta());
            }
            for (std::size_t m = 0; m < M; ++m) er.mean_client_losses[m] += rec.client_losses[m] / T;
            log.rounds.push_back(std::move(rec));
            ++k;
            if (k % every == 0) snapshot(epoch, t);
        }
        log.epochs.push_back(std::move(er));
    };

    if (T > 0 && mode == TrainingMode::pretrained_clients) {
        // Clients first fit theta alone (eta2 dropped), then theta is frozen.
        const std::size_t pre = config.pretrain_epochs > 0 ? config.pretrain_epochs : config.epochs;
        for (std::size_t e = 0; e < pre; ++e) local_epoch(e, true);
        for (auto& c : clients) c.set_learning(false);
    }

    if (T > 0) {
        for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
            if (!has_server) {
                local_epoch(epoch, false);
                continue;
            }
            EpochRecord er{epoch, false, 0.0, std::vector<double>(M, 0.0)};
            for (std::size_t t = 1; t <= T; ++t) {
                const BusStats before = bus.stats();
                RoundRecord rec{epoch, t, k, false, std::nullopt, {}, 0.0, {}, 0, 0};

                for (std::size_t m = 0; m < M; ++m) {
                    ClientToServerMsg msg = clients[m].emit(t, k);
                    if (enforcing) {
                        CounterRng rc = privacy_stream(config.seed, StreamKind::client_state_privacy, m, k);
                        CounterRng ra = privacy_stream(config.seed, StreamKind::augmented_state_privacy, m, k);
                        auto [c, a] = perturb_states(msg.h_hat_c, msg.h_hat_a, *privacy, rc, ra);
                        msg.h_hat_c = std::move(c);
                        msg.h_hat_a = std::move(a);
                    }
                    bus.send(msg);
                    rec.client_losses.push_back(clients[m].last_loss());
                    rec.theta_grad_norms.push_back(clients[m].last_grad_norm());
                }

                ServerActor::Outcome out = server->round(bus.gather(t, k, kBarrierTimeout), t);
                rec.server_loss = out.loss;
                rec.grad_A_norm = out.grad_A_norm;
                for (std::size_t m = 0; m < M; ++m) {
                    Vector g = std::move(out.state_grads[m]);
                    if (auditing) audit.observe_gradient(g);
                    if (enforcing) {
                        CounterRng rg = privacy_stream(config.seed, StreamKind::gradient_privacy, m, k);
                        g = perturb_gradient(g, *privacy, rg);
                    }
                    bus.send(ServerToClientMsg{m, t, k, std::move(g)});
                }

                for (std::size_t m = 0; m < M; ++m) {
                    const ServerToClientMsg msg = bus.receive(m, kBarrierTimeout);
                    if (msg.t != t || msg.k != k) {
                        throw BusError("client received a gradient for the wrong round", {m});
                    }
                    clients[m].absorb(msg.state_grad, t);
                    if (auditing) audit.observe_theta(clients[m].theta());
                }

                const BusStats after = bus.stats();
                rec.c2s = after.c2s - before.c2s;
                rec.s2c = after.s2c - before.s2c;
                *er.mean_server_loss += out.loss / T;
                for (std::size_t m = 0; m < M; ++m) er.mean_client_losses[m] += rec.client_losses[m] / T;
                log.rounds.push_back(std::move(rec));
                ++k;
                if (k % every == 0) snapshot(epoch, t);
            }
            const double epoch_loss = *er.mean_server_loss;
            log.epochs.push_back(std::move(er));
            if (epoch_loss <= config.tol) {
                log.stopped_on_tol = true;
                break;
            }
        }
    }

    for (const auto& c : clients) result.thetas.push_back(c.theta());
    result.A_hat = server ? server->model().A_hat_grid() : a_hat0;
    log.messages = bus.stats();
    if (enforcing) log.privacy = privacy;
    if (auditing) {
        log.audit = audit;
        log.privacy = audit.implied(*config.privacy);
    }
    log.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

TrainingResult run_baseline(TrainingMode mode, const FederationSetup& setup, TrainingConfig config) {
    if (mode == TrainingMode::full) {
        throw std::invalid_argument("run_baseline: mode must be a baseline, not full");
    }
    config.mode = mode;
    return run_training(setup, config);
}

RoundUpdate federation_round(const FederationSetup& setup, const std::vector<Matrix>& thetas,
                             const ServerModel& server, std::size_t t, double eta1, double eta2) {
    check_setup(setup);
    const std::size_t M = setup.spec.clients();
    if (thetas.size() != M) throw std::invalid_argument("federation_round: one theta per client");
    if (t < 1 || t > setup.horizon()) {
        std::ostringstream msg;
        msg << "federation_round: t=" << t << " outside [1, " << setup.horizon() << "]";
        throw std::invalid_argument(msg.str());
    }

    RoundUpdate out;
    std::vector<Vector> h_c;
    std::vector<Vector> h_a;
    for (std::size_t m = 0; m < M; ++m) {
        const Vector& hc = setup.traces[m].estimates[t - 1];
        const Vector& y_prev = setup.measurements[m][t - 1];
        const Vector& y_t = setup.measurements[m][t];
        h_c.push_back(hc);
        h_a.push_back(augmented_estimate(hc, thetas[m], y_prev));
        out.client_losses.push_back(
            client_loss(setup.a_diag[m], setup.c_diag[m], thetas[m], y_t, y_prev, hc));
        out.client_grads.push_back(
            grad_theta_client(setup.a_diag[m], setup.c_diag[m], thetas[m], y_t, y_prev, hc));
    }
    out.round = make_round(server, t, std::move(h_c), std::move(h_a));
    out.server_grads = server_gradients(server, out.round);

    ServerModel next = server;
    A_update(next, out.server_grads.grad_A);
    out.A_hat = next.A_hat_grid();
    for (std::size_t m = 0; m < M; ++m) {
        out.thetas.push_back(theta_update(thetas[m], out.client_grads[m], out.server_grads.grad_state[m],
                                          setup.measurements[m][t - 1], eta1, eta2));
    }
    return out;
}

double evaluate_server_loss(const FederationSetup& setup, const std::vector<Matrix>& thetas,
                            const ServerModel& server, std::size_t t_begin, std::size_t t_end) {
    check_setup(setup);
    if (t_begin < 1 || t_end < t_begin || t_end > setup.horizon()) {
        std::ostringstream msg;
        msg << "evaluate_server_loss: range [" << t_begin << ", " << t_end << "] outside [1, "
            << setup.horizon() << "]";
        throw std::invalid_argument(msg.str());
    }
    const std::size_t M = setup.spec.clients();
    double total = 0.0;
    for (std::size_t t = t_begin; t <= t_end; ++t) {
        std::vector<Vector> h_c;
        std::vector<Vector> h_a;
        for (std::size_t m = 0; m < M; ++m) {
            const Vector& hc = setup.traces[m].estimates[t - 1];
            h_c.push_back(hc);
            h_a.push_back(augmented_estimate(hc, thetas[m], setup.measurements[m][t - 1]));
        }
        total += make_round(server, t, std::move(h_c), std::move(h_a)).loss;
    }
    return total / static_cast<double>(t_end - t_begin + 1);
}

}  // namespace fedgc
