#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedspu/mask.hpp"
#include "fedspu/nn.hpp"

namespace fedspu {

enum class ClientStatus : uint8_t { on = 0, stopped = 1 };

// The only thing that crosses the client/server boundary: active-neuron
// positions plus the parameter values incident to them.
//
// Wire layout (all integers little-endian):
//   magic "FSPU" | version u8=1 | client_id u32 | round u32 | n_k u32 |
//   status u8 | layer_count u16
//   per layer: layer_index u16 | active_count u32 | indices u32[] |
//              values f32[]  (layer 0 carries indices only)
// For layer l >= 1 the values are the active weight sub-matrix in row-major
// order over (active out, active in) pairs, then the active biases.
struct ActivePayload {
    uint32_t client_id = 0;
    uint32_t round = 0;
    uint32_t n_k = 0;
    ClientStatus status = ClientStatus::on;
    std::vector<std::vector<uint32_t>> active_indices; // one list per arch layer
    std::vector<std::vector<double>> values;           // per layer l>=1; layer 0 entry empty

    int layer_count() const { return static_cast<int>(active_indices.size()); }
};

enum class DecodeError {
    bad_magic,
    bad_version,
    truncated,
    non_monotone_indices,
    malformed,
};

struct PayloadError : std::runtime_error {
    DecodeError code;
    PayloadError(DecodeError c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

struct PayloadMeta {
    uint32_t client_id = 0;
    uint32_t round = 0;
    uint32_t n_k = 0;
    ClientStatus status = ClientStatus::on;
};

// Build an in-memory payload (lossless doubles) from the model restricted
// to the mask. Simulation runs pass these around directly; the byte codec
// below defines what would cross a real network.
ActivePayload extract_payload(const Model& model, const NeuronMask& nm, const PayloadMeta& meta);

std::vector<uint8_t> encode_payload(const ActivePayload& p);
std::vector<uint8_t> encode_payload(const Model& model, const NeuronMask& nm,
                                    const PayloadMeta& meta);

ActivePayload decode_payload(const std::vector<uint8_t>& bytes);

struct WireSize {
    size_t param_bytes = 0;
    size_t index_bytes = 0;
    size_t header_bytes = 0;
    size_t total_bytes = 0;
};

// Closed-form byte counts; matches encode_payload output length exactly.
WireSize payload_wire_size(const NeuronMask& nm, const Architecture& arch);

} // namespace fedspu
