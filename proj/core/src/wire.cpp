#include "fedgc/wire.hpp"

#include <cmath>
#include <json.hpp>

namespace fedgc {

using nlohmann::json;

namespace {

json vector_json(const Vector& v, const char* what) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v(i))) throw WireError(std::string("encode: non-finite value in ") + what);
        out.push_back(v(i));
    }
    return out;
}

json matrix_json(const Matrix& m, const char* what) {
    json out = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) {
            if (!std::isfinite(m(i, j))) {
                throw WireError(std::string("encode: non-finite value in ") + what);
            }
            row.push_back(m(i, j));
        }
        out.push_back(std::move(row));
    }
    return out;
}

Vector vector_from(const json& j, const char* what) {
    if (!j.is_array()) throw WireError(std::string("decode: ") + what + " is not an array");
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw WireError(std::string("decode: non-numeric entry in ") + what);
        v(static_cast<Index>(i)) = j[i].get<double>();
    }
    return v;
}

Matrix matrix_from(const json& j, const char* what) {
    if (!j.is_array()) throw WireError(std::string("decode: ") + what + " is not an array");
    const std::size_t rows = j.size();
    const std::size_t cols = rows == 0 ? 0 : j[0].size();
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols) {
            throw WireError(std::string("decode: ragged matrix in ") + what);
        }
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[i][c].is_number()) {
                throw WireError(std::string("decode: non-numeric entry in ") + what);
            }
            m(static_cast<Index>(i), static_cast<Index>(c)) = j[i][c].get<double>();
        }
    }
    return m;
}

std::size_t index_from(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_number_unsigned()) {
        throw WireError(std::string("decode: missing or invalid field '") + key + "'");
    }
    return it->get<std::size_t>();
}

const json& payload_field(const json& payload, const char* key) {
    auto it = payload.find(key);
    if (it == payload.end()) throw WireError(std::string("decode: payload lacks '") + key + "'");
    return *it;
}

}  // namespace

std::string encode(const WireMessage& msg) {
    json j;
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, SetupMsg>) {
                j["type"] = "setup";
                j["client_id"] = m.client_id;
                j["t"] = 0;
                j["k"] = 0;
                j["payload"] = {{"A_mm", matrix_json(m.a_mm, "A_mm")}};
            } else if constexpr (std::is_same_v<T, ClientToServerMsg>) {
                j["type"] = "c2s";
                j["client_id"] = m.client_id;
                j["t"] = m.t;
                j["k"] = m.k;
                j["payload"] = {{"h_hat_a", vector_json(m.h_hat_a, "h_hat_a")},
                                {"h_hat_c", vector_json(m.h_hat_c, "h_hat_c")}};
            } else {
                j["type"] = "s2c";
                j["client_id"] = m.client_id;
                j["t"] = m.t;
                j["k"] = m.k;
                j["payload"] = {{"state_grad", vector_json(m.state_grad, "state_grad")}};
            }
        },
        msg);
    return j.dump();
}

WireMessage decode(std::string_view line) {
    json j = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) throw WireError("decode: not a JSON object");
    auto type_it = j.find("type");
    if (type_it == j.end() || !type_it->is_string()) throw WireError("decode: missing 'type'");
    auto payload_it = j.find("payload");
    if (payload_it == j.end() || !payload_it->is_object()) {
        throw WireError("decode: missing 'payload' object");
    }
    const std::string type = type_it->get<std::string>();
    const json& payload = *payload_it;
    const std::size_t id = index_from(j, "client_id");
    const std::size_t t = index_from(j, "t");
    const std::size_t k = index_from(j, "k");

    if (type == "setup") {
        return SetupMsg{id, matrix_from(payload_field(payload, "A_mm"), "A_mm")};
    }
    if (type == "c2s") {
        return ClientToServerMsg{id, t, k, vector_from(payload_field(payload, "h_hat_a"), "h_hat_a"),
                                 vector_from(payload_field(payload, "h_hat_c"), "h_hat_c")};
    }
    if (type == "s2c") {
        return ServerToClientMsg{id, t, k,
                                 vector_from(payload_field(payload, "state_grad"), "state_grad")};
    }
    throw WireError("decode: unknown message type '" + type + "'");
}

}  // namespace fedgc
