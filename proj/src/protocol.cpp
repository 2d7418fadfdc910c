#include "fedspu/protocol.hpp"

#include <cstring>

namespace fedspu {

namespace {

constexpr char kMagic[4] = {'F', 'S', 'P', 'U'};
constexpr uint8_t kVersion = 1;

void put_u8(std::vector<uint8_t>& out, uint8_t v) { out.push_back(v); }

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<uint8_t>& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::vector<uint8_t>& bytes;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > bytes.size())
            throw PayloadError(DecodeError::truncated, "payload truncated");
    }
    uint8_t u8() {
        need(1);
        return bytes[pos++];
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    float f32() {
        uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

} // namespace

ActivePayload extract_payload(const Model& model, const NeuronMask& nm, const PayloadMeta& meta) {
    if (!nm.consistent_with(model.arch))
        throw std::invalid_argument("extract_payload: mask/arch mismatch");
    ActivePayload p;
    p.client_id = meta.client_id;
    p.round = meta.round;
    p.n_k = meta.n_k;
    p.status = meta.status;
    const int depth = model.arch.depth();
    p.active_indices.resize(depth);
    p.values.resize(depth);
    for (int l = 0; l < depth; ++l) {
        for (int i : nm.active_indices(l)) p.active_indices[l].push_back(static_cast<uint32_t>(i));
        if (l == 0) continue;
        const Layer& layer = model.layers[l - 1];
        const auto& outs = p.active_indices[l];
        const auto& ins = p.active_indices[l - 1];
        auto& vals = p.values[l];
        vals.reserve(outs.size() * ins.size() + outs.size());
        for (uint32_t i : outs)
            for (uint32_t j : ins) vals.push_back(layer.w(static_cast<int>(i), static_cast<int>(j)));
        for (uint32_t i : outs) vals.push_back(layer.bias[i]);
    }
    return p;
}

std::vector<uint8_t> encode_payload(const ActivePayload& p) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u8(out, kVersion);
    put_u32(out, p.client_id);
    put_u32(out, p.round);
    put_u32(out, p.n_k);
    put_u8(out, static_cast<uint8_t>(p.status));
    put_u16(out, static_cast<uint16_t>(p.active_indices.size()));
    for (int l = 0; l < p.layer_count(); ++l) {
        put_u16(out, static_cast<uint16_t>(l));
        put_u32(out, static_cast<uint32_t>(p.active_indices[l].size()));
        for (uint32_t idx : p.active_indices[l]) put_u32(out, idx);
        for (double v : p.values[l]) put_f32(out, static_cast<float>(v));
    }
    return out;
}

std::vector<uint8_t> encode_payload(const Model& model, const NeuronMask& nm,
                                    const PayloadMeta& meta) {
    return encode_payload(extract_payload(model, nm, meta));
}

ActivePayload decode_payload(const std::vector<uint8_t>& bytes) {
    Reader r{bytes};
    r.need(4);
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw PayloadError(DecodeError::bad_magic, "bad payload magic");
    r.pos = 4;
    uint8_t version = r.u8();
    if (version != kVersion)
        throw PayloadError(DecodeError::bad_version, "unsupported payload version");

    ActivePayload p;
    p.client_id = r.u32();
    p.round = r.u32();
    p.n_k = r.u32();
    uint8_t status = r.u8();
    if (status > 1) throw PayloadError(DecodeError::malformed, "bad status byte");
    p.status = static_cast<ClientStatus>(status);

    uint16_t layer_count = r.u16();
    if (layer_count < 3) throw PayloadError(DecodeError::malformed, "fewer than 3 layers");
    p.active_indices.resize(layer_count);
    p.values.resize(layer_count);
    for (int l = 0; l < layer_count; ++l) {
        uint16_t li = r.u16();
        if (li != l) throw PayloadError(DecodeError::malformed, "unexpected layer index");
        uint32_t count = r.u32();
        if (count == 0) throw PayloadError(DecodeError::malformed, "empty active set");
        auto& idx = p.active_indices[l];
        idx.reserve(count);
        for (uint32_t i = 0; i < count; ++i) {
            uint32_t v = r.u32();
            if (!idx.empty() && v <= idx.back())
                throw PayloadError(DecodeError::non_monotone_indices,
                                   "active indices not strictly increasing");
            idx.push_back(v);
        }
        if (l == 0) continue;
        size_t n_vals =
            idx.size() * p.active_indices[l - 1].size() + idx.size();
        auto& vals = p.values[l];
        vals.reserve(n_vals);
        for (size_t i = 0; i < n_vals; ++i) vals.push_back(r.f32());
    }
    if (r.pos != bytes.size())
        throw PayloadError(DecodeError::malformed, "trailing bytes after payload");
    return p;
}

WireSize payload_wire_size(const NeuronMask& nm, const Architecture& arch) {
    if (!nm.consistent_with(arch))
        throw std::invalid_argument("payload_wire_size: mask/arch mismatch");
    WireSize s;
    s.header_bytes = 4 + 1 + 4 + 4 + 4 + 1 + 2; // magic..layer_count
    size_t prev_active = 0;
    for (int l = 0; l < arch.depth(); ++l) {
        size_t active = static_cast<size_t>(nm.active_count(l));
        s.header_bytes += 2 + 4; // layer_index + active_count
        s.index_bytes += 4 * active;
        if (l > 0) s.param_bytes += 4 * (active * prev_active + active);
        prev_active = active;
    }
    s.total_bytes = s.header_bytes + s.index_bytes + s.param_bytes;
    return s;
}

} // namespace fedspu
