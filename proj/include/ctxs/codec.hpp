// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ctxs/circuit.hpp"
#include "ctxs/planner.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ctxs {

// Execution snapshot at the top of a cycle. Register values are parallel to
// circuit register declaration order and always masked to their width.
struct MachineState {
    std::string state;
    std::vector<std::uint64_t> regs;
    std::uint32_t input_cursor = 0;
    std::uint32_t output_count = 0;

    bool operator==(const MachineState&) const = default;
};

enum class BitOrder { LsbFirst, MsbFirst };

// A simulated target architecture. Contexts travel canonically; the only
// per-vendor differences modeled are the scan-chain word size and the bit
// order within a word.
struct NodeDescriptor {
    std::string arch_id;
    std::uint32_t scan_word_bits = 32; // 8, 16, 32, or 64
    BitOrder bit_order = BitOrder::LsbFirst;
    std::filesystem::path storage_root;
};

NodeDescriptor xilinx_like(std::filesystem::path storage_root = {});
NodeDescriptor altera_like(std::filesystem::path storage_root = {});

// Canonical image layout, all header fields little-endian:
//   magic "CTXS" (4) | version 0x01 (1) | circuit_digest (8) | plan_digest (8)
//   | checkpoint_state_index (2) | input_cursor (4) | output_count (4)
//   | payload_bit_length (4) | payload (ceil(bits/8)) | crc32 (4)
// The payload packs the checkpoint's live registers in register-declaration
// order, each value LSB-first, final byte zero-padded. The CRC-32/IEEE covers
// every preceding byte.
inline constexpr std::size_t kImageHeaderBytes = 35;
inline constexpr std::size_t kImageMinBytes = kImageHeaderBytes + 4;
inline constexpr std::uint8_t kImageVersion = 0x01;

struct ContextImage {
    std::uint64_t circuit_digest = 0;
    std::uint64_t plan_digest = 0;
    std::uint16_t state_index = 0;
    std::uint32_t input_cursor = 0;
    std::uint32_t output_count = 0;
    std::uint32_t payload_bits = 0;
    std::vector<std::uint8_t> payload;
    std::uint32_t crc = 0;
};

// m.state must be one of the plan's checkpoints and the plan must bind to c.
// Pure: equal inputs produce identical bytes.
std::vector<std::uint8_t> encode_context(const Circuit& c, const CheckpointPlan& p,
                                         const MachineState& m);

// Exact inverse of encode_context on its own output; registers outside the
// checkpoint's live list come back as 0. Throws CodecError.
MachineState decode_context(std::span<const std::uint8_t> bytes, const Circuit& c,
                            const CheckpointPlan& p);

// Structural parse + CRC check only; no circuit/plan binding.
ContextImage parse_image(std::span<const std::uint8_t> bytes);

// Regroups canonical bytes (LSB-first bit stream) into scan words for the
// node's architecture; the final word is zero-padded. from_native_scan
// inverts it given the original byte count and rejects nonzero padding.
std::vector<std::uint64_t> to_native_scan(std::span<const std::uint8_t> bytes,
                                          const NodeDescriptor& n);
std::vector<std::uint8_t> from_native_scan(std::span<const std::uint64_t> words,
                                           const NodeDescriptor& n, std::size_t byte_count);

} // namespace ctxs
