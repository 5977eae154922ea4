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

#include "cxlsim/cxl_flit.hpp"

#include <fmt/format.h>

#include "cxlsim/error.hpp"

namespace cxlsim {

std::string_view to_string(ChannelKind ch)
{
    switch (ch) {
    case ChannelKind::M2SReq: return "m2s_req";
    case ChannelKind::M2SRwD: return "m2s_rwd";
    case ChannelKind::S2MNDR: return "s2m_ndr";
    case ChannelKind::S2MDRS: return "s2m_drs";
    }
    return "?";
}

std::string_view to_string(CxlOpcode op)
{
    switch (op) {
    case CxlOpcode::MemRd: return "MemRd";
    case CxlOpcode::MemWr: return "MemWr";
    case CxlOpcode::Cmp: return "Cmp";
    case CxlOpcode::MemData: return "MemData";
    }
    return "?";
}

const OpcodeEncoding& encode_opcode(CxlOpcode op)
{
    for (const auto& row : kOpcodeTable)
        if (row.opcode == op)
            return row;
    throw Error(Errc::ProtocolViolation, "opcode missing from encoding table");
}

CxlOpcode decode_opcode(ChannelKind channel, std::uint8_t code)
{
    for (const auto& row : kOpcodeTable)
        if (row.channel == channel && row.code == code)
            return row.opcode;
    throw Error(Errc::ProtocolViolation,
                fmt::format("opcode {:#x} is not implemented on channel {}", code, to_string(channel)));
}

void check_flit(const CxlFlit& flit)
{
    if (carries_payload(flit.opcode) != flit.payload.has_value())
        throw Error(Errc::ProtocolViolation,
                    fmt::format("{} tag {} {} a payload", to_string(flit.opcode), flit.tag,
                                flit.payload ? "must not carry" : "requires"));
}

namespace {

constexpr std::uint64_t kAddrShift = 24;
constexpr std::uint64_t kAddrBits = 46;
constexpr std::uint64_t kAddrMask = (std::uint64_t{1} << kAddrBits) - 1;

} // namespace

FlitHeader encode_header(const CxlFlit& flit)
{
    const auto& enc = encode_opcode(flit.opcode);
    if (is_m2s(flit.opcode) && (flit.addr % kLineBytes != 0 || (flit.addr >> 52) != 0))
        throw Error(Errc::ProtocolViolation, fmt::format("address {:#x} is not a 52-bit line address", flit.addr));

    FlitHeader h;
    h.lo = 1;
    h.lo |= std::uint64_t{enc.code} << 1;
    h.lo |= std::uint64_t{static_cast<std::uint8_t>(enc.channel)} << 5;
    h.lo |= std::uint64_t{flit.tag} << 7;
    h.lo |= std::uint64_t{flit.payload.has_value()} << 23;
    if (is_m2s(flit.opcode)) {
        const std::uint64_t line = (flit.addr >> 6) & kAddrMask;
        h.lo |= line << kAddrShift;
        h.hi = line >> (64 - kAddrShift);
    }
    return h;
}

CxlFlit decode_header(const FlitHeader& header)
{
    if ((header.lo & 1) == 0)
        throw Error(Errc::ProtocolViolation, "header valid bit is clear");
    const auto channel = static_cast<ChannelKind>((header.lo >> 5) & 0x3);
    const auto code = static_cast<std::uint8_t>((header.lo >> 1) & 0xF);
    CxlFlit flit;
    flit.opcode = decode_opcode(channel, code);
    flit.tag = static_cast<std::uint16_t>((header.lo >> 7) & 0xFFFF);
    if (is_m2s(flit.opcode)) {
        const std::uint64_t line = ((header.lo >> kAddrShift) | (header.hi << (64 - kAddrShift))) & kAddrMask;
        flit.addr = line << 6;
    }
    return flit;
}

} // namespace cxlsim
