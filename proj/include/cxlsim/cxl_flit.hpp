/*
 * Copyright 2026 The cxlsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "cxlsim/types.hpp"

namespace cxlsim {

/// The four CXL.mem message channels modeled by the transaction layer.
enum class ChannelKind : std::uint8_t { M2SReq, M2SRwD, S2MNDR, S2MDRS };

inline constexpr std::array<ChannelKind, 4> kAllChannels = {
    ChannelKind::M2SReq, ChannelKind::M2SRwD, ChannelKind::S2MNDR, ChannelKind::S2MDRS};

std::string_view to_string(ChannelKind ch);

/// Symbolic CXL.mem opcodes used by the Type-3 data path.
enum class CxlOpcode : std::uint8_t {
    MemRd,   // M2S Req
    MemWr,   // M2S RwD
    Cmp,     // S2M NDR
    MemData, // S2M DRS
};

std::string_view to_string(CxlOpcode op);

/// One row of the opcode encoding table: the channel an opcode travels on and
/// its numeric encoding in that channel's opcode field (CXL 2.0 M2S/S2M tables).
struct OpcodeEncoding {
    CxlOpcode opcode;
    ChannelKind channel;
    std::uint8_t code;
    std::uint8_t field_bits;
};

inline constexpr std::array<OpcodeEncoding, 4> kOpcodeTable = {{
    {CxlOpcode::MemRd, ChannelKind::M2SReq, 0b0001, 4},
    {CxlOpcode::MemWr, ChannelKind::M2SRwD, 0b0001, 4},
    {CxlOpcode::Cmp, ChannelKind::S2MNDR, 0b000, 3},
    {CxlOpcode::MemData, ChannelKind::S2MDRS, 0b000, 3},
}};

const OpcodeEncoding& encode_opcode(CxlOpcode op);
/// Throws ProtocolViolation for codes the model does not implement.
CxlOpcode decode_opcode(ChannelKind channel, std::uint8_t code);

constexpr ChannelKind channel_of(CxlOpcode op)
{
    switch (op) {
    case CxlOpcode::MemRd: return ChannelKind::M2SReq;
    case CxlOpcode::MemWr: return ChannelKind::M2SRwD;
    case CxlOpcode::Cmp: return ChannelKind::S2MNDR;
    case CxlOpcode::MemData: return ChannelKind::S2MDRS;
    }
    return ChannelKind::M2SReq;
}

constexpr bool carries_payload(CxlOpcode op) { return op == CxlOpcode::MemWr || op == CxlOpcode::MemData; }
constexpr bool is_m2s(CxlOpcode op) { return op == CxlOpcode::MemRd || op == CxlOpcode::MemWr; }

struct CxlFlit {
    CxlOpcode opcode = CxlOpcode::MemRd;
    std::uint16_t tag = 0;
    std::uint64_t addr = 0; // device-local offset, M2S only
    std::optional<LineData> payload;
    Tick created_at = 0;

    friend bool operator==(const CxlFlit&, const CxlFlit&) = default;
};

/// Checks opcode/payload consistency; throws ProtocolViolation.
void check_flit(const CxlFlit& flit);

/// Packed message header. Bit layout (LSB first):
///   [0]      valid
///   [4:1]    opcode field (3 bits used on S2M channels)
///   [6:5]    channel id
///   [22:7]   tag
///   [23]     payload follows
///   [69:24]  line address bits [51:6] (M2S only)
/// The 64-byte payload is carried beside the header, not inside it.
struct FlitHeader {
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;

    friend bool operator==(const FlitHeader&, const FlitHeader&) = default;
};

FlitHeader encode_header(const CxlFlit& flit);
/// Rebuilds opcode, tag and address; payload and created_at are not part of the header.
CxlFlit decode_header(const FlitHeader& header);

} // namespace cxlsim
