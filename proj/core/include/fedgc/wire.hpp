#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "fedgc/linalg.hpp"

namespace fedgc {

/// Known diagonal block sent once before training.
struct SetupMsg {
    std::size_t client_id = 0;
    Matrix a_mm;

    friend bool operator==(const SetupMsg& x, const SetupMsg& y) {
        return x.client_id == y.client_id && exactly_equal(x.a_mm, y.a_mm);
    }
};

/// Round-t tuple: (h_hat_m^{t-1})_a and (h_hat_m^{t-1})_c.
struct ClientToServerMsg {
    std::size_t client_id = 0;
    std::size_t t = 0;
    std::size_t k = 0;
    Vector h_hat_a;
    Vector h_hat_c;

    friend bool operator==(const ClientToServerMsg& x, const ClientToServerMsg& y) {
        return x.client_id == y.client_id && x.t == y.t && x.k == y.k &&
               exactly_equal(x.h_hat_a, y.h_hat_a) && exactly_equal(x.h_hat_c, y.h_hat_c);
    }
};

/// Gradient of L_s with respect to (h_hat_m^{t-1})_a.
struct ServerToClientMsg {
    std::size_t client_id = 0;
    std::size_t t = 0;
    std::size_t k = 0;
    Vector state_grad;

    friend bool operator==(const ServerToClientMsg& x, const ServerToClientMsg& y) {
        return x.client_id == y.client_id && x.t == y.t && x.k == y.k &&
               exactly_equal(x.state_grad, y.state_grad);
    }
};

using WireMessage = std::variant<SetupMsg, ClientToServerMsg, ServerToClientMsg>;

class WireError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One JSON object without a trailing newline:
///   {"type": "c2s"|"s2c"|"setup", "client_id", "t", "k", "payload": {...}}
/// Doubles are written as shortest round-trip decimals, matrices as row-major
/// nested arrays. Non-finite values are rejected.
std::string encode(const WireMessage& msg);

/// Inverse of encode. Throws WireError on malformed input.
WireMessage decode(std::string_view line);

}  // namespace fedgc
