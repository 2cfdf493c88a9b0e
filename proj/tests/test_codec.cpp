// SPDX-License-Identifier: Apache-2.0
#include "ctxs/codec.hpp"
#include "ctxs/errors.hpp"
#include "ctxs/hash.hpp"
#include "ctxs/simulator.hpp"

#include "random_circuit.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

using namespace ctxs;
using namespace ctxs::testing;

namespace {

struct Fixture {
    Circuit c = load_ring3();
    CheckpointPlan p = plan_checkpoints(c, 2, PlanMode::Exact); // {S0}

    MachineState at_s0(std::uint64_t acc, std::uint32_t cursor, std::uint32_t outputs) const {
        MachineState m = init_state(c);
        m.state = "S0";
        m.regs[0] = acc;
        m.input_cursor = cursor;
        m.output_count = outputs;
        return m;
    }
};

std::vector<std::uint8_t> patch_payload_and_crc(std::vector<std::uint8_t> img,
                                                std::uint8_t byte_value) {
    img[kImageHeaderBytes] = byte_value;
    std::uint32_t crc = crc32(std::span<const std::uint8_t>(img.data(), img.size() - 4));
    for (int i = 0; i < 4; ++i)
        img[img.size() - 4 + i] = static_cast<std::uint8_t>(crc >> (8 * i));
    return img;
}

} // namespace

TEST_CASE("crc32 matches the IEEE check value") {
    CHECK(crc32(std::string_view{"123456789"}) == 0xCBF43926u);
    CHECK(crc32(std::string_view{""}) == 0x00000000u);
}

TEST_CASE("encoding ring3 at S0") {
    Fixture f;
    auto img = encode_context(f.c, f.p, f.at_s0(1, 1, 1));
    // 35-byte header, one payload byte for acc(8), 4 CRC bytes.
    REQUIRE(img.size() == 40);
    CHECK(img[0] == 'C');
    CHECK(img[1] == 'T');
    CHECK(img[2] == 'X');
    CHECK(img[3] == 'S');
    CHECK(img[4] == 0x01);
    CHECK(img[kImageHeaderBytes] == 0x01); // acc packed LSB-first

    ContextImage parsed = parse_image(img);
    CHECK(parsed.circuit_digest == f.p.circuit_digest);
    CHECK(parsed.plan_digest == f.p.plan_digest);
    CHECK(parsed.state_index == 0);
    CHECK(parsed.input_cursor == 1);
    CHECK(parsed.output_count == 1);
    CHECK(parsed.payload_bits == 8);

    MachineState back = decode_context(img, f.c, f.p);
    CHECK(back == f.at_s0(1, 1, 1)); // tmp was dead and zero anyway
}

TEST_CASE("a checkpoint with no live registers yields the 39-byte minimum frame") {
    Circuit c = parse_circuit(R"({"name":"bare","registers":[],"inputs":[],
        "outputs":[{"id":"o","width":4}],
        "states":[{"id":"A","emissions":[{"port":"o","expr":"3"}],
                   "transitions":[{"guard":"ELSE","target":"A"}]}],
        "initial":"A"})");
    CheckpointPlan p = plan_checkpoints(c, 1, PlanMode::Exact);
    MachineState m = init_state(c);
    auto img = encode_context(c, p, m);
    CHECK(img.size() == kImageMinBytes);
    CHECK(img.size() == 39);
    ContextImage parsed = parse_image(img);
    CHECK(parsed.payload_bits == 0);
    CHECK(decode_context(img, c, p) == m);
}

TEST_CASE("payload byte 0x03 decodes to acc=3") {
    Fixture f;
    auto img = patch_payload_and_crc(encode_context(f.c, f.p, f.at_s0(1, 1, 1)), 0x03);
    MachineState m = decode_context(img, f.c, f.p);
    CHECK(m.regs[0] == 3);
    CHECK(m.state == "S0");
}

TEST_CASE("encode is deterministic") {
    Fixture f;
    CHECK(encode_context(f.c, f.p, f.at_s0(7, 2, 1)) == encode_context(f.c, f.p, f.at_s0(7, 2, 1)));
}

TEST_CASE("encode preconditions") {
    Fixture f;
    SUBCASE("state must be a checkpoint") {
        MachineState m = f.at_s0(1, 0, 0);
        m.state = "S1";
        try {
            encode_context(f.c, f.p, m);
            FAIL("expected CodecError");
        } catch (const CodecError& e) {
            CHECK(e.kind() == CodecError::Kind::NotACheckpoint);
        }
    }
    SUBCASE("state must exist") {
        MachineState m = f.at_s0(1, 0, 0);
        m.state = "S9";
        CHECK_THROWS_AS(encode_context(f.c, f.p, m), CodecError);
    }
    SUBCASE("register values must be width-masked") {
        MachineState m = f.at_s0(0x100, 0, 0);
        try {
            encode_context(f.c, f.p, m);
            FAIL("expected CodecError");
        } catch (const CodecError& e) {
            CHECK(e.kind() == CodecError::Kind::ValueOutOfRange);
        }
    }
    SUBCASE("plan must bind to the circuit") {
        Circuit other = f.c;
        other.registers[0].width = 7;
        CHECK_THROWS_AS(encode_context(other, f.p, f.at_s0(1, 0, 0)), CodecError);
    }
}

TEST_CASE("decode rejects structural damage") {
    Fixture f;
    auto img = encode_context(f.c, f.p, f.at_s0(5, 2, 1));

    auto expect_kind = [&](std::vector<std::uint8_t> bytes, CodecError::Kind kind) {
        try {
            decode_context(bytes, f.c, f.p);
            FAIL("expected CodecError");
        } catch (const CodecError& e) {
            CHECK(e.kind() == kind);
        }
    };

    SUBCASE("bad magic") {
        auto bad = img;
        bad[0] = 'X';
        expect_kind(bad, CodecError::Kind::BadMagic);
    }
    SUBCASE("unsupported version") {
        auto bad = img;
        bad[4] = 0x02;
        // version is CRC-protected too, but the version check fires first
        expect_kind(bad, CodecError::Kind::BadVersion);
    }
    SUBCASE("truncation") {
        auto bad = img;
        bad.pop_back();
        expect_kind(bad, CodecError::Kind::Truncated);
        expect_kind(std::vector<std::uint8_t>(img.begin(), img.begin() + 10),
                    CodecError::Kind::Truncated);
    }
    SUBCASE("trailing bytes") {
        auto bad = img;
        bad.push_back(0);
        expect_kind(bad, CodecError::Kind::TrailingBytes);
    }
    SUBCASE("flipped payload bit fails the CRC") {
        auto bad = img;
        bad[kImageHeaderBytes] ^= 0x10;
        expect_kind(bad, CodecError::Kind::CrcMismatch);
    }
    SUBCASE("flipped CRC bit") {
        auto bad = img;
        bad.back() ^= 0x80;
        expect_kind(bad, CodecError::Kind::CrcMismatch);
    }
    SUBCASE("wrong circuit digest") {
        Circuit other = f.c;
        other.name = "ring3b";
        CheckpointPlan other_plan = plan_checkpoints(other, 2, PlanMode::Exact);
        auto foreign = encode_context(other, other_plan, f.at_s0(1, 1, 1));
        expect_kind(foreign, CodecError::Kind::CircuitDigestMismatch);
    }
    SUBCASE("same circuit, different plan") {
        CheckpointPlan p2 = build_plan(f.c, 2, {"S0", "S1"});
        auto other_img = encode_context(f.c, p2, f.at_s0(1, 1, 1));
        expect_kind(other_img, CodecError::Kind::PlanDigestMismatch);
    }
}

TEST_CASE("every single-bit flip in the first 64 bits is rejected") {
    Fixture f;
    auto img = encode_context(f.c, f.p, f.at_s0(9, 3, 2));
    for (std::size_t bit = 0; bit < 64; ++bit) {
        auto bad = img;
        bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        CHECK_THROWS_AS(decode_context(bad, f.c, f.p), CodecError);
    }
}

TEST_CASE("round-trip identity with dead registers zeroed") {
    std::mt19937_64 rng(0x5eed0008);
    int done = 0;
    for (int i = 0; i < 200 && done < 25; ++i) {
        Circuit c = random_circuit(rng);
        CheckpointPlan p = plan_checkpoints(c, 2, PlanMode::Exact);
        if (p.checkpoints.empty())
            continue;
        const std::string& cp = p.checkpoints[rng() % p.checkpoints.size()];

        MachineState m = init_state(c);
        m.state = cp;
        for (std::size_t r = 0; r < c.registers.size(); ++r)
            m.regs[r] = mask_to_width(rng(), c.registers[r].width);
        m.input_cursor = static_cast<std::uint32_t>(rng() % 1000);
        m.output_count = static_cast<std::uint32_t>(rng() % 1000);

        MachineState expect = m;
        auto live = p.live.at(cp);
        for (std::size_t r = 0; r < c.registers.size(); ++r)
            if (std::find(live.begin(), live.end(), c.registers[r].id) == live.end())
                expect.regs[r] = 0;

        CHECK(decode_context(encode_context(c, p, m), c, p) == expect);
        ++done;
    }
    CHECK(done == 25);
}

TEST_CASE("scan word grouping per descriptor") {
    std::vector<std::uint8_t> one{0x01};
    NodeDescriptor lsb8{"a", 8, BitOrder::LsbFirst, {}};
    NodeDescriptor msb8{"b", 8, BitOrder::MsbFirst, {}};
    CHECK(to_native_scan(one, lsb8) == std::vector<std::uint64_t>{0x01});
    CHECK(to_native_scan(one, msb8) == std::vector<std::uint64_t>{0x80});

    // Two bytes into one 16-bit word.
    std::vector<std::uint8_t> two{0x34, 0x12};
    NodeDescriptor lsb16{"c", 16, BitOrder::LsbFirst, {}};
    CHECK(to_native_scan(two, lsb16) == std::vector<std::uint64_t>{0x1234});

    CHECK(from_native_scan(to_native_scan(one, msb8), msb8, 1) == one);
    CHECK(from_native_scan(to_native_scan(two, lsb16), lsb16, 2) == two);
}

TEST_CASE("scan round-trip identity for every descriptor shape") {
    std::mt19937_64 rng(0x5eed0009);
    for (std::uint32_t bits : {8u, 16u, 32u, 64u}) {
        for (BitOrder order : {BitOrder::LsbFirst, BitOrder::MsbFirst}) {
            NodeDescriptor n{"n", bits, order, {}};
            for (int i = 0; i < 25; ++i) {
                std::vector<std::uint8_t> bytes(rng() % 70);
                for (auto& b : bytes)
                    b = static_cast<std::uint8_t>(rng());
                CHECK(from_native_scan(to_native_scan(bytes, n), n, bytes.size()) == bytes);
            }
        }
    }
}

TEST_CASE("cross-architecture conversion preserves the decoded state") {
    Fixture f;
    MachineState m = f.at_s0(0xAB, 4, 2);
    auto canonical = encode_context(f.c, f.p, m);
    NodeDescriptor a = xilinx_like();
    NodeDescriptor b = altera_like();

    auto via_a = from_native_scan(to_native_scan(canonical, a), a, canonical.size());
    auto via_b = from_native_scan(to_native_scan(via_a, b), b, via_a.size());
    CHECK(via_b == canonical);
    CHECK(decode_context(via_b, f.c, f.p) == m);
}

TEST_CASE("scan conversion rejects malformed word streams") {
    NodeDescriptor n{"n", 16, BitOrder::LsbFirst, {}};
    SUBCASE("nonzero padding") {
        // 1 byte needs one 16-bit word; the upper 8 bits are padding.
        std::vector<std::uint64_t> words{0xFF00};
        try {
            from_native_scan(words, n, 1);
            FAIL("expected CodecError");
        } catch (const CodecError& e) {
            CHECK(e.kind() == CodecError::Kind::PaddingNotZero);
        }
    }
    SUBCASE("short stream") {
        std::vector<std::uint64_t> words{0x0001};
        CHECK_THROWS_AS(from_native_scan(words, n, 4), CodecError);
    }
    SUBCASE("overlong stream") {
        std::vector<std::uint64_t> words{0x0001, 0x0000, 0x0000};
        CHECK_THROWS_AS(from_native_scan(words, n, 2), CodecError);
    }
    SUBCASE("word exceeding the declared width") {
        std::vector<std::uint64_t> words{0x1FFFF};
        CHECK_THROWS_AS(from_native_scan(words, n, 2), CodecError);
    }
    SUBCASE("bad word size") {
        NodeDescriptor bad{"n", 12, BitOrder::LsbFirst, {}};
        std::vector<std::uint8_t> bytes{1};
        CHECK_THROWS_AS(to_native_scan(bytes, bad), CodecError);
    }
}
