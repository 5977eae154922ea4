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

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cxlsim {

enum class RegSpace : std::uint8_t { Config, Mmio };

/// Which group a register belongs to: the PCI/PCIe baseline, or one of the
/// three CXL register sets (ports/DVSECs, component registers, device
/// mailbox and status).
enum class RegSet : std::uint8_t { Pci, Set1Port, Set2Component, Set3Device };

std::string_view to_string(RegSpace s);
std::string_view to_string(RegSet s);

struct RegisterDef {
    std::string name;
    RegSpace space = RegSpace::Config;
    std::uint32_t offset = 0;
    std::uint32_t size = 4; // bytes; registers wider than 8 bytes are plain byte arrays
    std::uint64_t writable_mask = 0;
    std::uint64_t reset = 0;
    RegSet set = RegSet::Pci;
    bool side_effect = false;
};

namespace reg {

inline constexpr std::uint32_t kConfigSpaceBytes = 4096;
inline constexpr std::uint32_t kBar0Bytes = 128 * 1024;

// PCI header and PCIe capability
inline constexpr std::uint32_t kVendorId = 0x00;
inline constexpr std::uint32_t kDeviceId = 0x02;
inline constexpr std::uint32_t kCommand = 0x04;
inline constexpr std::uint32_t kStatus = 0x06;
inline constexpr std::uint32_t kRevisionId = 0x08;
inline constexpr std::uint32_t kProgIf = 0x09;
inline constexpr std::uint32_t kSubclass = 0x0A;
inline constexpr std::uint32_t kClassCode = 0x0B;
inline constexpr std::uint32_t kHeaderType = 0x0E;
inline constexpr std::uint32_t kBar0Low = 0x10;
inline constexpr std::uint32_t kBar0High = 0x14;
inline constexpr std::uint32_t kSubsysVendor = 0x2C;
inline constexpr std::uint32_t kSubsysId = 0x2E;
inline constexpr std::uint32_t kCapPtr = 0x34;
inline constexpr std::uint32_t kPcieCap = 0x40;

// Extended capability chain (DVSECs)
inline constexpr std::uint32_t kExtCapStart = 0x100;
inline constexpr std::uint16_t kDvsecCapId = 0x0023;
inline constexpr std::uint16_t kCxlDvsecVendor = 0x1E98;
inline constexpr std::uint32_t kDvsecDevice = 0x100;     // DVSEC ID 0
inline constexpr std::uint32_t kDvsecGpf = 0x140;        // DVSEC ID 5
inline constexpr std::uint32_t kDvsecFlexBus = 0x150;    // DVSEC ID 7
inline constexpr std::uint32_t kDvsecPortExt = 0x170;    // DVSEC ID 3
inline constexpr std::uint32_t kDvsecRegLocator = 0x1A0; // DVSEC ID 8

// BAR0: component register block at 0, device register block at 64 KiB
inline constexpr std::uint32_t kCacheMemBase = 0x1000;
inline constexpr std::uint32_t kRasCap = 0x1100;
inline constexpr std::uint32_t kSecCap = 0x1200;
inline constexpr std::uint32_t kLinkCap = 0x1300;
inline constexpr std::uint32_t kHdmCap = 0x1400;
inline constexpr std::uint32_t kHdmDecoder0 = 0x1410;
inline constexpr std::uint32_t kHdmDecoderStride = 0x20;
inline constexpr std::uint32_t kDecBaseLow = 0x00;
inline constexpr std::uint32_t kDecBaseHigh = 0x04;
inline constexpr std::uint32_t kDecSizeLow = 0x08;
inline constexpr std::uint32_t kDecSizeHigh = 0x0C;
inline constexpr std::uint32_t kDecControl = 0x10;
inline constexpr std::uint32_t kDecCtrlCommit = 1u << 9;
inline constexpr std::uint32_t kDecCtrlCommitted = 1u << 10;
inline constexpr std::uint32_t kDecCtrlError = 1u << 11;
inline constexpr std::uint32_t kDecCtrlHostOnly = 1u << 12;

inline constexpr std::uint32_t kDeviceRegs = 0x10000;
inline constexpr std::uint32_t kDevStatus = kDeviceRegs + 0x100;
inline constexpr std::uint32_t kMailbox = kDeviceRegs + 0x200;
inline constexpr std::uint32_t kMboxCaps = kMailbox + 0x00;
inline constexpr std::uint32_t kMboxControl = kMailbox + 0x04;
inline constexpr std::uint32_t kMboxCommand = kMailbox + 0x08;
inline constexpr std::uint32_t kMboxStatus = kMailbox + 0x10;
inline constexpr std::uint32_t kMboxBgStatus = kMailbox + 0x18;
inline constexpr std::uint32_t kMboxPayload = kMailbox + 0x20;
inline constexpr std::uint32_t kMboxPayloadBytes = 512;
inline constexpr std::uint32_t kMemdevStatus = kDeviceRegs + 0x500;
inline constexpr std::uint32_t kMboxDoorbell = 1u << 0;

constexpr std::uint32_t decoder_reg(unsigned index, std::uint32_t field)
{
    return kHdmDecoder0 + index * kHdmDecoderStride + field;
}

} // namespace reg

struct RegisterLayoutParams {
    std::uint16_t vendor_id = 0x8086;
    std::uint16_t device_id = 0x0d93;
    std::uint16_t subsys_vendor = 0x8086;
    std::uint16_t subsys_id = 0x0001;
    std::uint64_t capacity = 0;
    std::uint64_t bar0_base = 0;
    unsigned hdm_decoders = 1; // 1, 2 or 4
};

/// The register map of a CXL 2.0 Type-3 memory device: one row per register
/// with its offset, width, writable bits and reset value.
std::vector<RegisterDef> build_register_layout(const RegisterLayoutParams& params);

/// HDM Decoder Capability decoder-count field encoding.
unsigned encode_decoder_count(unsigned decoders);

} // namespace cxlsim
