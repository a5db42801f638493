#include "fedgc/message_bus.hpp"

#include <algorithm>
#include <sstream>

namespace fedgc {

namespace {

std::string list_ids(const std::vector<std::size_t>& ids) {
    std::ostringstream out;
    for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? "," : "") << ids[i];
    return out.str();
}

void check_id(std::size_t id, std::size_t clients) {
    if (id >= clients) {
        std::ostringstream msg;
        msg << "message bus: client id " << id << " out of range for " << clients << " clients";
        throw std::invalid_argument(msg.str());
    }
}

}  // namespace

InProcessBus::InProcessBus(std::size_t clients, bool through_wire)
    : clients_(clients), through_wire_(through_wire), server_inbox_(clients),
      client_inbox_(clients) {
    if (clients == 0) throw std::invalid_argument("message bus: at least one client required");
}

template <class Msg>
Msg InProcessBus::transport(const Msg& msg) const {
    if (!through_wire_) return msg;
    return std::get<Msg>(decode(encode(msg)));
}

void InProcessBus::send(const SetupMsg& msg) {
    check_id(msg.client_id, clients_);
    SetupMsg delivered = transport(msg);
    {
        std::lock_guard lock(mutex_);
        if (tap_) tap_(msg);
        setup_inbox_.push_back(std::move(delivered));
        ++stats_.setup;
    }
    server_cv_.notify_all();
}

void InProcessBus::send(const ClientToServerMsg& msg) {
    check_id(msg.client_id, clients_);
    ClientToServerMsg delivered = transport(msg);
    {
        std::lock_guard lock(mutex_);
        if (tap_) tap_(msg);
        server_inbox_[msg.client_id].push_back(std::move(delivered));
        ++stats_.c2s;
    }
    server_cv_.notify_all();
}

void InProcessBus::send(const ServerToClientMsg& msg) {
    check_id(msg.client_id, clients_);
    ServerToClientMsg delivered = transport(msg);
    {
        std::lock_guard lock(mutex_);
        if (tap_) tap_(msg);
        client_inbox_[msg.client_id].push_back(std::move(delivered));
        ++stats_.s2c;
    }
    client_cv_.notify_all();
}

std::vector<SetupMsg> InProcessBus::gather_setup(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    auto have_all = [&] {
        std::vector<bool> seen(clients_, false);
        for (const auto& m : setup_inbox_) seen[m.client_id] = true;
        return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
    };
    if (!server_cv_.wait_for(lock, timeout, have_all)) {
        std::vector<bool> seen(clients_, false);
        for (const auto& m : setup_inbox_) seen[m.client_id] = true;
        std::vector<std::size_t> missing;
        for (std::size_t m = 0; m < clients_; ++m) {
            if (!seen[m]) missing.push_back(m);
        }
        throw BusError("setup barrier timed out; missing clients " + list_ids(missing), missing);
    }
    std::vector<SetupMsg> out(clients_);
    std::vector<bool> taken(clients_, false);
    std::deque<SetupMsg> rest;
    for (auto& m : setup_inbox_) {
        if (!taken[m.client_id]) {
            taken[m.client_id] = true;
            out[m.client_id] = std::move(m);
        } else {
            rest.push_back(std::move(m));
        }
    }
    setup_inbox_ = std::move(rest);
    return out;
}

std::vector<ClientToServerMsg> InProcessBus::gather(std::size_t t, std::size_t k,
                                                    std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    auto missing_now = [&] {
        std::vector<std::size_t> missing;
        for (std::size_t m = 0; m < clients_; ++m) {
            if (server_inbox_[m].empty()) missing.push_back(m);
        }
        return missing;
    };
    if (!server_cv_.wait_for(lock, timeout, [&] { return missing_now().empty(); })) {
        const auto missing = missing_now();
        std::ostringstream msg;
        msg << "round barrier timed out at t=" << t << ", k=" << k << "; missing clients "
            << list_ids(missing);
        throw BusError(msg.str(), missing);
    }
    std::vector<ClientToServerMsg> out;
    out.reserve(clients_);
    for (std::size_t m = 0; m < clients_; ++m) {
        ClientToServerMsg msg = std::move(server_inbox_[m].front());
        server_inbox_[m].pop_front();
        if (msg.t != t || msg.k != k) {
            std::ostringstream err;
            err << "round barrier: client " << m << " sent (t=" << msg.t << ", k=" << msg.k
                << ") while the server expects (t=" << t << ", k=" << k << ")";
            throw BusError(err.str(), {m});
        }
        out.push_back(std::move(msg));
    }
    return out;
}

ServerToClientMsg InProcessBus::receive(std::size_t client_id, std::chrono::milliseconds timeout) {
    check_id(client_id, clients_);
    std::unique_lock lock(mutex_);
    auto& inbox = client_inbox_[client_id];
    if (!client_cv_.wait_for(lock, timeout, [&] { return !inbox.empty(); })) {
        std::ostringstream msg;
        msg << "client " << client_id << " timed out waiting for the server gradient";
        throw BusError(msg.str(), {client_id});
    }
    ServerToClientMsg out = std::move(inbox.front());
    inbox.pop_front();
    return out;
}

BusStats InProcessBus::stats() const {
    std::lock_guard lock(mutex_);
    return stats_;
}

void InProcessBus::set_tap(std::function<void(const WireMessage&)> tap) {
    std::lock_guard lock(mutex_);
    tap_ = std::move(tap);
}

}  // namespace fedgc
