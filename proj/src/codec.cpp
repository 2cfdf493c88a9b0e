// SPDX-License-Identifier: Apache-2.0
#include "ctxs/codec.hpp"

#include "ctxs/analysis.hpp"
#include "ctxs/errors.hpp"
#include "ctxs/hash.hpp"

#include <algorithm>

namespace ctxs {

namespace {

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, std::size_t bytes) {
    for (std::size_t i = 0; i < bytes; ++i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t offset, std::size_t bytes) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < bytes; ++i)
        v |= std::uint64_t{in[offset + i]} << (8 * i);
    return v;
}

// LSB-first bit stream over a byte vector: bit i lives in byte i/8 at
// position i%8.
class BitWriter {
public:
    void append(std::uint64_t value, std::uint32_t bits) {
        for (std::uint32_t i = 0; i < bits; ++i) {
            if (pos_ % 8 == 0)
                bytes_.push_back(0);
            if ((value >> i) & 1)
                bytes_.back() |= static_cast<std::uint8_t>(1u << (pos_ % 8));
            ++pos_;
        }
    }

    std::vector<std::uint8_t> take() { return std::move(bytes_); }
    std::size_t bit_count() const { return pos_; }

private:
    std::vector<std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

class BitReader {
public:
    explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint64_t read(std::uint32_t bits) {
        std::uint64_t v = 0;
        for (std::uint32_t i = 0; i < bits; ++i) {
            if ((bytes_[pos_ / 8] >> (pos_ % 8)) & 1)
                v |= std::uint64_t{1} << i;
            ++pos_;
        }
        return v;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

// Live register indices at a checkpoint according to the plan's lists, in
// register-declaration order. Trusts the plan (verify_plan vouches for it).
std::vector<std::uint32_t> live_indices(const Circuit& c, const CheckpointPlan& p,
                                        const std::string& state) {
    std::vector<std::uint32_t> out;
    auto it = p.live.find(state);
    if (it == p.live.end())
        throw CodecError(CodecError::Kind::NotACheckpoint,
                         "state \"" + state + "\" has no live list in the plan");
    for (const std::string& id : it->second) {
        auto idx = register_index(c, id);
        if (!idx)
            throw CodecError(CodecError::Kind::ValueOutOfRange,
                             "plan live list names unknown register \"" + id + "\"");
        out.push_back(*idx);
    }
    return out;
}

void check_binding(const Circuit& c, const CheckpointPlan& p) {
    if (p.circuit_digest != circuit_hash(c))
        throw CodecError(CodecError::Kind::CircuitDigestMismatch,
                         "plan does not bind to this circuit");
}

} // namespace

NodeDescriptor xilinx_like(std::filesystem::path storage_root) {
    return {"xilinx-like", 32, BitOrder::LsbFirst, std::move(storage_root)};
}

NodeDescriptor altera_like(std::filesystem::path storage_root) {
    return {"altera-like", 64, BitOrder::MsbFirst, std::move(storage_root)};
}

std::vector<std::uint8_t> encode_context(const Circuit& c, const CheckpointPlan& p,
                                         const MachineState& m) {
    check_binding(c, p);
    auto sidx = state_index(c, m.state);
    if (!sidx)
        throw CodecError(CodecError::Kind::BadStateIndex,
                         "state \"" + m.state + "\" is not a state of the circuit");
    if (std::find(p.checkpoints.begin(), p.checkpoints.end(), m.state) == p.checkpoints.end())
        throw CodecError(CodecError::Kind::NotACheckpoint,
                         "state \"" + m.state + "\" is not a checkpoint of the plan");
    if (m.regs.size() != c.registers.size())
        throw CodecError(CodecError::Kind::ValueOutOfRange,
                         "machine state register count does not match the circuit");
    for (std::size_t r = 0; r < m.regs.size(); ++r)
        if (m.regs[r] != mask_to_width(m.regs[r], c.registers[r].width))
            throw CodecError(CodecError::Kind::ValueOutOfRange,
                             "register \"" + c.registers[r].id + "\" value exceeds its width");

    BitWriter payload;
    for (std::uint32_t r : live_indices(c, p, m.state))
        payload.append(m.regs[r], c.registers[r].width);
    const std::uint32_t payload_bits = static_cast<std::uint32_t>(payload.bit_count());

    std::vector<std::uint8_t> out;
    out.reserve(kImageMinBytes + payload_bits / 8);
    for (char ch : {'C', 'T', 'X', 'S'})
        out.push_back(static_cast<std::uint8_t>(ch));
    out.push_back(kImageVersion);
    put_le(out, p.circuit_digest, 8);
    put_le(out, p.plan_digest, 8);
    put_le(out, *sidx, 2);
    put_le(out, m.input_cursor, 4);
    put_le(out, m.output_count, 4);
    put_le(out, payload_bits, 4);
    auto bits = payload.take();
    out.insert(out.end(), bits.begin(), bits.end());
    put_le(out, crc32(out), 4);
    return out;
}

ContextImage parse_image(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kImageMinBytes)
        throw CodecError(CodecError::Kind::Truncated, "image shorter than minimum frame");
    if (!(bytes[0] == 'C' && bytes[1] == 'T' && bytes[2] == 'X' && bytes[3] == 'S'))
        throw CodecError(CodecError::Kind::BadMagic, "bad magic, not a context image");
    if (bytes[4] != kImageVersion)
        throw CodecError(CodecError::Kind::BadVersion,
                         "unsupported image version " + std::to_string(bytes[4]));

    ContextImage img;
    img.circuit_digest = get_le(bytes, 5, 8);
    img.plan_digest = get_le(bytes, 13, 8);
    img.state_index = static_cast<std::uint16_t>(get_le(bytes, 21, 2));
    img.input_cursor = static_cast<std::uint32_t>(get_le(bytes, 23, 4));
    img.output_count = static_cast<std::uint32_t>(get_le(bytes, 27, 4));
    img.payload_bits = static_cast<std::uint32_t>(get_le(bytes, 31, 4));

    const std::size_t payload_bytes = (std::size_t{img.payload_bits} + 7) / 8;
    const std::size_t expect = kImageHeaderBytes + payload_bytes + 4;
    if (bytes.size() < expect)
        throw CodecError(CodecError::Kind::Truncated, "truncated payload");
    if (bytes.size() > expect)
        throw CodecError(CodecError::Kind::TrailingBytes, "trailing bytes after image frame");

    img.crc = static_cast<std::uint32_t>(get_le(bytes, expect - 4, 4));
    if (crc32(bytes.subspan(0, expect - 4)) != img.crc)
        throw CodecError(CodecError::Kind::CrcMismatch, "CRC mismatch, image corrupted");

    img.payload.assign(bytes.begin() + kImageHeaderBytes, bytes.begin() + expect - 4);
    // Padding bits after the last live register must be zero.
    if (img.payload_bits % 8 != 0 && !img.payload.empty()) {
        std::uint8_t tail = img.payload.back();
        if (tail >> (img.payload_bits % 8) != 0)
            throw CodecError(CodecError::Kind::PaddingNotZero, "nonzero payload padding bits");
    }
    return img;
}

MachineState decode_context(std::span<const std::uint8_t> bytes, const Circuit& c,
                            const CheckpointPlan& p) {
    check_binding(c, p);
    ContextImage img = parse_image(bytes);
    if (img.circuit_digest != p.circuit_digest)
        throw CodecError(CodecError::Kind::CircuitDigestMismatch,
                         "image was captured from a different circuit");
    if (img.plan_digest != p.plan_digest)
        throw CodecError(CodecError::Kind::PlanDigestMismatch,
                         "image was captured under a different plan");
    if (img.state_index >= c.states.size())
        throw CodecError(CodecError::Kind::BadStateIndex, "checkpoint state index out of range");
    const std::string& state = c.states[img.state_index].id;
    if (std::find(p.checkpoints.begin(), p.checkpoints.end(), state) == p.checkpoints.end())
        throw CodecError(CodecError::Kind::NotACheckpoint,
                         "image state \"" + state + "\" is not a checkpoint of the plan");

    auto live = live_indices(c, p, state);
    std::uint64_t want_bits = 0;
    for (std::uint32_t r : live)
        want_bits += c.registers[r].width;
    if (want_bits != img.payload_bits)
        throw CodecError(CodecError::Kind::BadPayloadLength,
                         "payload bit length does not match the checkpoint's live registers");

    MachineState m;
    m.state = state;
    m.regs.assign(c.registers.size(), 0);
    m.input_cursor = img.input_cursor;
    m.output_count = img.output_count;
    BitReader reader(img.payload);
    for (std::uint32_t r : live)
        m.regs[r] = reader.read(c.registers[r].width);
    return m;
}

std::vector<std::uint64_t> to_native_scan(std::span<const std::uint8_t> bytes,
                                          const NodeDescriptor& n) {
    const std::uint32_t w = n.scan_word_bits;
    if (w != 8 && w != 16 && w != 32 && w != 64)
        throw CodecError(CodecError::Kind::ValueOutOfRange, "scan word size must be 8/16/32/64");
    std::vector<std::uint64_t> words;
    const std::size_t total_bits = bytes.size() * 8;
    words.resize((total_bits + w - 1) / w, 0);
    for (std::size_t i = 0; i < total_bits; ++i) {
        if ((bytes[i / 8] >> (i % 8)) & 1) {
            std::size_t word = i / w;
            std::size_t bit = i % w;
            if (n.bit_order == BitOrder::MsbFirst)
                bit = w - 1 - bit;
            words[word] |= std::uint64_t{1} << bit;
        }
    }
    return words;
}

std::vector<std::uint8_t> from_native_scan(std::span<const std::uint64_t> words,
                                           const NodeDescriptor& n, std::size_t byte_count) {
    const std::uint32_t w = n.scan_word_bits;
    if (w != 8 && w != 16 && w != 32 && w != 64)
        throw CodecError(CodecError::Kind::ValueOutOfRange, "scan word size must be 8/16/32/64");
    const std::size_t have_bits = words.size() * w;
    const std::size_t want_bits = byte_count * 8;
    if (have_bits < want_bits)
        throw CodecError(CodecError::Kind::Truncated, "scan word sequence too short");
    if (have_bits - want_bits >= w)
        throw CodecError(CodecError::Kind::TrailingBytes, "scan word sequence too long");

    std::vector<std::uint8_t> bytes(byte_count, 0);
    for (std::size_t i = 0; i < have_bits; ++i) {
        std::size_t bit = i % w;
        if (n.bit_order == BitOrder::MsbFirst)
            bit = w - 1 - bit;
        bool set = (words[i / w] >> bit) & 1;
        if (!set)
            continue;
        if (i >= want_bits)
            throw CodecError(CodecError::Kind::PaddingNotZero,
                             "nonzero padding bits in final scan word");
        bytes[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
    // Word values must fit the declared width.
    if (w < 64)
        for (std::uint64_t word : words)
            if (word >> w != 0)
                throw CodecError(CodecError::Kind::ValueOutOfRange,
                                 "scan word exceeds the descriptor word size");
    return bytes;
}

} // namespace ctxs
