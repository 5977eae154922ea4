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

#include "cxlsim/address_map.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cxlsim {

using Bytes = std::vector<std::uint8_t>;

/// One field of a binary structure: byte offset and width, little-endian.
struct FieldDef {
    std::string_view name;
    std::uint32_t offset;
    std::uint32_t width;
};

struct StructLayout {
    std::string_view name;
    std::uint32_t size; // fixed part in bytes
    std::span<const FieldDef> fields;
};

/// All binary layouts used by the builders and parsers.
std::span<const StructLayout> firmware_layouts();
const StructLayout& firmware_layout(std::string_view name);

struct AcpiHeader {
    std::string signature; // 4 chars
    std::uint32_t length = 0;
    std::uint8_t revision = 0;
    std::uint8_t checksum = 0;
    std::string oem_id = "CXLSIM";       // 6 chars, space padded
    std::string oem_table_id = "CXLSIMTB"; // 8 chars
    std::uint32_t oem_revision = 1;
    std::uint32_t creator_id = 0x4d49534c; // "LSIM"
    std::uint32_t creator_revision = 1;
    friend bool operator==(const AcpiHeader&, const AcpiHeader&) = default;
};

inline constexpr std::size_t kAcpiHeaderBytes = 36;

struct McfgAllocation {
    std::uint64_t base = 0;
    std::uint16_t segment = 0;
    std::uint8_t start_bus = 0;
    std::uint8_t end_bus = 0;
    std::uint64_t window_bytes() const { return (std::uint64_t{end_bus} - start_bus + 1) << 20; }
    friend bool operator==(const McfgAllocation&, const McfgAllocation&) = default;
};

struct McfgTable {
    AcpiHeader header;
    std::vector<McfgAllocation> allocations;
    friend bool operator==(const McfgTable&, const McfgTable&) = default;
};

struct ChbsEntry {
    std::uint32_t uid = 0;
    std::uint32_t cxl_version = 1; // 0: CXL 1.1, 1: CXL 2.0
    std::uint64_t base = 0;
    std::uint64_t length = 0x10000;
    friend bool operator==(const ChbsEntry&, const ChbsEntry&) = default;
};

namespace cfmws {
inline constexpr std::uint16_t kDeviceCoherent = 1u << 0;
inline constexpr std::uint16_t kHostOnlyCoherent = 1u << 1;
inline constexpr std::uint16_t kVolatile = 1u << 2;
inline constexpr std::uint16_t kPersistent = 1u << 3;
inline constexpr std::uint16_t kFixedConfig = 1u << 4;
} // namespace cfmws

struct CfmwsEntry {
    std::uint64_t base = 0;
    std::uint64_t size = 0;
    std::uint8_t eniw = 0; // encoded interleave ways; 0 means one way
    std::uint8_t interleave_arithmetic = 0;
    std::uint32_t hbig = 0; // host bridge interleave granularity, 256 << hbig
    std::uint16_t restrictions = cfmws::kHostOnlyCoherent | cfmws::kVolatile;
    std::uint16_t qtg_id = 0;
    std::vector<std::uint32_t> targets;

    unsigned ways() const;
    friend bool operator==(const CfmwsEntry&, const CfmwsEntry&) = default;
};

struct CedtTable {
    AcpiHeader header;
    std::vector<ChbsEntry> chbs;
    std::vector<CfmwsEntry> cfmws;
    friend bool operator==(const CedtTable&, const CedtTable&) = default;
};

namespace srat {
inline constexpr std::uint32_t kEnabled = 1u << 0;
inline constexpr std::uint32_t kHotPluggable = 1u << 1;
inline constexpr std::uint32_t kNonVolatile = 1u << 2;
} // namespace srat

struct SratCpuAffinity {
    std::uint8_t apic_id = 0;
    std::uint32_t node = 0;
    std::uint32_t flags = srat::kEnabled;
    friend bool operator==(const SratCpuAffinity&, const SratCpuAffinity&) = default;
};

struct SratMemAffinity {
    std::uint64_t base = 0;
    std::uint64_t size = 0;
    std::uint32_t node = 0;
    std::uint32_t flags = srat::kEnabled;
    friend bool operator==(const SratMemAffinity&, const SratMemAffinity&) = default;
};

using SratEntry = std::variant<SratCpuAffinity, SratMemAffinity>;

struct SratTable {
    AcpiHeader header;
    std::vector<SratEntry> entries;
    friend bool operator==(const SratTable&, const SratTable&) = default;
};

enum class E820Type : std::uint32_t { Usable = 1, Reserved = 2 };
std::string_view to_string(E820Type t);

struct E820Entry {
    std::uint64_t base = 0;
    std::uint64_t size = 0;
    E820Type type = E820Type::Reserved;
    friend bool operator==(const E820Entry&, const E820Entry&) = default;
};

struct E820Map {
    std::vector<E820Entry> entries;
    friend bool operator==(const E820Map&, const E820Map&) = default;
};

/// ACPI 2.0 root pointer; only enough to round-trip.
struct RsdpStub {
    std::string oem_id = "CXLSIM";
    std::uint8_t revision = 2;
    std::uint32_t rsdt_address = 0;
    std::uint64_t xsdt_address = 0;
    std::uint8_t checksum = 0;
    std::uint8_t ext_checksum = 0;
    friend bool operator==(const RsdpStub&, const RsdpStub&) = default;
};

struct MadtLocalApic {
    std::uint8_t processor_uid = 0;
    std::uint8_t apic_id = 0;
    std::uint32_t flags = 1;
    friend bool operator==(const MadtLocalApic&, const MadtLocalApic&) = default;
};

/// Processor-local APIC entries only.
struct MadtStub {
    AcpiHeader header;
    std::uint32_t local_apic_address = 0xFEE00000;
    std::uint32_t flags = 0;
    std::vector<MadtLocalApic> lapics;
    friend bool operator==(const MadtStub&, const MadtStub&) = default;
};

struct HostBridgeDesc {
    std::uint32_t uid = 0;
    std::uint64_t chbs_base = 0;
    std::uint8_t bus = 0x0C;
    friend bool operator==(const HostBridgeDesc&, const HostBridgeDesc&) = default;
};

struct MmioWindowDesc {
    std::string name;
    std::uint64_t base = 0;
    std::uint64_t size = 0;
    friend bool operator==(const MmioWindowDesc&, const MmioWindowDesc&) = default;
};

/// Host-bridge and MMIO window information conveyed outside AML, as a
/// line-oriented text file.
struct DsdtSidecar {
    std::vector<HostBridgeDesc> host_bridges;
    std::vector<MmioWindowDesc> mmio_windows;
    friend bool operator==(const DsdtSidecar&, const DsdtSidecar&) = default;
};

struct CpuDesc {
    std::uint8_t apic_id = 0;
    unsigned node = 0;
};

/// Platform inputs the address map does not carry.
struct PlatformDesc {
    std::vector<CpuDesc> cpus{{0, 0}};
    McfgAllocation ecam{0xE0000000, 0, 0, 0xFF};
    std::vector<HostBridgeDesc> host_bridges{{0, 0xFED40000, 0x0C}};
    std::map<unsigned, std::uint32_t> device_host_bridge; // device id -> host bridge uid
    std::uint64_t xsdt_address = 0x000F0000;
};

struct FirmwareTables {
    RsdpStub rsdp;
    E820Map e820;
    McfgTable mcfg;
    CedtTable cedt;
    SratTable srat;
    MadtStub madt;
    DsdtSidecar dsdt;
    friend bool operator==(const FirmwareTables&, const FirmwareTables&) = default;
};

/// Builds every table from a validated map. Throws InconsistentTopology
/// naming the first broken cross-reference.
FirmwareTables build_tables(const AddressMap& map, const PlatformDesc& platform);

/// Byte that makes the sum of `bytes` (with that byte at zero) 0 mod 256.
std::uint8_t checksum_fix(std::span<const std::uint8_t> bytes);
std::uint8_t byte_sum(std::span<const std::uint8_t> bytes);

Bytes serialize(const McfgTable& t);
Bytes serialize(const CedtTable& t);
Bytes serialize(const SratTable& t);
Bytes serialize(const MadtStub& t);
Bytes serialize(const E820Map& m);
Bytes serialize(const RsdpStub& r);
std::string serialize(const DsdtSidecar& d);

McfgTable parse_mcfg(std::span<const std::uint8_t> b);
CedtTable parse_cedt(std::span<const std::uint8_t> b);
SratTable parse_srat(std::span<const std::uint8_t> b);
MadtStub parse_madt(std::span<const std::uint8_t> b);
E820Map parse_e820(std::span<const std::uint8_t> b);
RsdpStub parse_rsdp(std::span<const std::uint8_t> b);
DsdtSidecar parse_dsdt_sidecar(std::string_view text);

using AnyTable = std::variant<RsdpStub, E820Map, McfgTable, CedtTable, SratTable, MadtStub>;
/// Dispatches on the leading signature. Throws BadSignature.
AnyTable parse_any(std::span<const std::uint8_t> b);
Bytes serialize_any(const AnyTable& t);
/// Multi-line human-readable rendering of a parsed table.
std::string describe(const AnyTable& t);

/// File name -> contents for every binary table, in a stable order.
std::vector<std::pair<std::string, Bytes>> table_blobs(const FirmwareTables& t);

std::string hexdump(std::span<const std::uint8_t> bytes);

/// Every violated cross-reference between the tables and the map.
std::vector<std::string> cross_check(const FirmwareTables& t, const AddressMap& map);

} // namespace cxlsim
