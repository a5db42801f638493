#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "fedgc/wire.hpp"

namespace fedgc {

class BusError : public std::runtime_error {
public:
    BusError(const std::string& what, std::vector<std::size_t> missing)
        : std::runtime_error(what), missing_(std::move(missing)) {}
    const std::vector<std::size_t>& missing_clients() const { return missing_; }

private:
    std::vector<std::size_t> missing_;
};

struct BusStats {
    std::size_t setup = 0;
    std::size_t c2s = 0;
    std::size_t s2c = 0;
};

/// In-process transport between one server endpoint and M client endpoints.
/// Any number of threads may send; each endpoint has a single consumer.
/// Delivery is FIFO per (sender, receiver) pair. With `through_wire` every
/// message is encoded to its NDJSON line and decoded again on delivery.
class InProcessBus {
public:
    explicit InProcessBus(std::size_t clients, bool through_wire = false);

    void send(const SetupMsg& msg);
    void send(const ClientToServerMsg& msg);
    void send(const ServerToClientMsg& msg);

    /// Round barrier: waits for one setup message per client, ordered by id.
    std::vector<SetupMsg> gather_setup(std::chrono::milliseconds timeout);

    /// Round barrier: waits until every client has sent its tuple for (t, k)
    /// and returns them ordered by client id, whatever the arrival order.
    /// Throws BusError naming the missing clients on timeout.
    std::vector<ClientToServerMsg> gather(std::size_t t, std::size_t k,
                                          std::chrono::milliseconds timeout);

    /// Next gradient for `client_id`. Throws BusError on timeout.
    ServerToClientMsg receive(std::size_t client_id, std::chrono::milliseconds timeout);

    BusStats stats() const;

    /// Observer called (under the bus lock) with every message as sent.
    void set_tap(std::function<void(const WireMessage&)> tap);

    std::size_t clients() const { return clients_; }

private:
    template <class Msg>
    Msg transport(const Msg& msg) const;

    std::size_t clients_;
    bool through_wire_;
    mutable std::mutex mutex_;
    std::condition_variable server_cv_;
    std::condition_variable client_cv_;
    std::deque<SetupMsg> setup_inbox_;
    std::vector<std::deque<ClientToServerMsg>> server_inbox_;  // one FIFO per sender
    std::vector<std::deque<ServerToClientMsg>> client_inbox_;
    BusStats stats_;
    std::function<void(const WireMessage&)> tap_;
};

}  // namespace fedgc
