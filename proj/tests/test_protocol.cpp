#include <doctest.h>

#include <utility>

#include "fedspu/protocol.hpp"

using namespace fedspu;

namespace {

ActivePayload random_payload(const Architecture& arch, double p, uint64_t seed) {
    auto rng = RngStream::derive(seed, 0x706c6400ULL);
    Model m = init_model(arch, rng.next_u64());
    NeuronMask nm = sample_neuron_mask(arch, p, MaskStrategy::random, std::nullopt, rng);
    PayloadMeta meta{static_cast<uint32_t>(rng.next_below(1000)),
                     static_cast<uint32_t>(rng.next_below(500)),
                     static_cast<uint32_t>(rng.next_below(10000)),
                     rng.next_below(2) ? ClientStatus::stopped : ClientStatus::on};
    return extract_payload(m, nm, meta);
}

} // namespace

TEST_CASE("full mask on [2,2,2] carries 12 values") {
    Architecture arch{{2, 2, 2}};
    Model m = init_model(arch, 1);
    ActivePayload p = extract_payload(m, full_neuron_mask(arch), {1, 2, 3, ClientStatus::on});
    size_t vals = 0;
    for (const auto& v : p.values) vals += v.size();
    CHECK(vals == 12);
}

TEST_CASE("min-1 rule keeps one hidden neuron alive in the payload") {
    Architecture arch{{2, 1, 2}};
    Model m = init_model(arch, 1);
    auto rng = RngStream::derive(1, 0);
    NeuronMask nm = sample_neuron_mask(arch, 0.01, MaskStrategy::random, std::nullopt, rng);
    ActivePayload p = extract_payload(m, nm, {0, 0, 0, ClientStatus::on});
    CHECK(p.active_indices[1].size() == 1);
}

TEST_CASE("round trip: indices exact, values at 32-bit precision") {
    Architecture arch{{6, 12, 9, 4}};
    for (int t = 0; t < 100; ++t) {
        ActivePayload p = random_payload(arch, 0.1 + 0.9 * (t % 10) / 10.0, t);
        ActivePayload q = decode_payload(encode_payload(p));
        CHECK(q.client_id == p.client_id);
        CHECK(q.round == p.round);
        CHECK(q.n_k == p.n_k);
        CHECK(q.status == p.status);
        REQUIRE(q.active_indices == p.active_indices);
        for (int l = 0; l < p.layer_count(); ++l) {
            REQUIRE(q.values[l].size() == p.values[l].size());
            for (size_t i = 0; i < p.values[l].size(); ++i)
                CHECK(q.values[l][i] == static_cast<double>(static_cast<float>(p.values[l][i])));
        }
    }
}

TEST_CASE("decode error codes") {
    Architecture arch{{4, 6, 3}};
    auto bytes = encode_payload(random_payload(arch, 0.5, 9));

    auto corrupt = bytes;
    corrupt[0] = 'X';
    CHECK_THROWS_WITH_AS(decode_payload(corrupt), "bad payload magic", PayloadError);
    try {
        decode_payload(corrupt);
    } catch (const PayloadError& e) {
        CHECK(e.code == DecodeError::bad_magic);
    }

    auto badver = bytes;
    badver[4] = 99;
    try {
        decode_payload(badver);
        FAIL("expected version error");
    } catch (const PayloadError& e) {
        CHECK(e.code == DecodeError::bad_version);
    }

    auto truncated = bytes;
    truncated.resize(bytes.size() - 3);
    try {
        decode_payload(truncated);
        FAIL("expected truncation error");
    } catch (const PayloadError& e) {
        CHECK(e.code == DecodeError::truncated);
    }

    // break index monotonicity in layer 0: indices start at byte 20+2+4
    auto nonmono = bytes;
    // layer 0 of a full-ish mask starts 0,1,...; swap first two index words
    size_t base = 20 + 6;
    for (int i = 0; i < 4; ++i) std::swap(nonmono[base + i], nonmono[base + 4 + i]);
    try {
        decode_payload(nonmono);
        FAIL("expected monotonicity error");
    } catch (const PayloadError& e) {
        CHECK(e.code == DecodeError::non_monotone_indices);
    }

    auto trailing = bytes;
    trailing.push_back(0);
    try {
        decode_payload(trailing);
        FAIL("expected malformed error");
    } catch (const PayloadError& e) {
        CHECK(e.code == DecodeError::malformed);
    }
}

TEST_CASE("wire size predictor equals actual encoding length") {
    Architecture arch{{6, 12, 9, 4}};
    for (int t = 0; t < 50; ++t) {
        auto rng = RngStream::derive(200, static_cast<uint64_t>(t));
        Model m = init_model(arch, rng.next_u64());
        double p = 0.1 + 0.9 * rng.next_double();
        NeuronMask nm = sample_neuron_mask(arch, p, MaskStrategy::random, std::nullopt, rng);
        WireSize ws = payload_wire_size(nm, arch);
        auto bytes = encode_payload(m, nm, {1, 1, 1, ClientStatus::on});
        CHECK(ws.total_bytes == bytes.size());
    }
}

TEST_CASE("full mask on [2,2,2] has 48 parameter bytes") {
    Architecture arch{{2, 2, 2}};
    WireSize ws = payload_wire_size(full_neuron_mask(arch), arch);
    CHECK(ws.param_bytes == 48);
}

TEST_CASE("index overhead is ignorable on wide layers") {
    Architecture arch{{64, 1000, 10}};
    auto rng = RngStream::derive(7, 0);
    NeuronMask nm = sample_neuron_mask(arch, 0.2, MaskStrategy::random, std::nullopt, rng);
    WireSize ws = payload_wire_size(nm, arch);
    CHECK(static_cast<double>(ws.index_bytes) / ws.param_bytes < 0.05);
}

TEST_CASE("equal p means byte-identical payload sizes across mask choices") {
    Architecture arch{{16, 40, 40, 8}};
    for (double p : {0.2, 0.4, 0.6, 0.8, 1.0}) {
        auto r1 = RngStream::derive(11, 1);
        auto r2 = RngStream::derive(11, 2);
        NeuronMask random_mask = sample_neuron_mask(arch, p, MaskStrategy::random, std::nullopt, r1);
        NeuronMask ordered_mask =
            sample_neuron_mask(arch, p, MaskStrategy::ordered, std::nullopt, r2);
        CHECK(payload_wire_size(random_mask, arch).total_bytes ==
              payload_wire_size(ordered_mask, arch).total_bytes);
    }
}
