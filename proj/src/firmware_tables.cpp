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

#include "cxlsim/firmware_tables.hpp"

#include "cxlsim/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <set>
#include <sstream>

namespace cxlsim {

namespace {

// ---------------------------------------------------------------- layouts

namespace hdr {
constexpr FieldDef signature{"signature", 0, 4};
constexpr FieldDef length{"length", 4, 4};
constexpr FieldDef revision{"revision", 8, 1};
constexpr FieldDef checksum{"checksum", 9, 1};
constexpr FieldDef oem_id{"oem_id", 10, 6};
constexpr FieldDef oem_table_id{"oem_table_id", 16, 8};
constexpr FieldDef oem_revision{"oem_revision", 24, 4};
constexpr FieldDef creator_id{"creator_id", 28, 4};
constexpr FieldDef creator_revision{"creator_revision", 32, 4};
constexpr FieldDef all[] = {signature, length, revision, checksum, oem_id,
                            oem_table_id, oem_revision, creator_id, creator_revision};
} // namespace hdr

namespace mcfg {
constexpr FieldDef reserved{"reserved", 36, 8};
constexpr FieldDef all[] = {reserved};
constexpr std::uint32_t kFixed = 44;
} // namespace mcfg

namespace mcfg_alloc {
constexpr FieldDef base{"base_address", 0, 8};
constexpr FieldDef segment{"segment", 8, 2};
constexpr FieldDef start_bus{"start_bus", 10, 1};
constexpr FieldDef end_bus{"end_bus", 11, 1};
constexpr FieldDef reserved{"reserved", 12, 4};
constexpr FieldDef all[] = {base, segment, start_bus, end_bus, reserved};
constexpr std::uint32_t kSize = 16;
} // namespace mcfg_alloc

namespace cedt_rec {
constexpr FieldDef type{"type", 0, 1};
constexpr FieldDef reserved{"reserved", 1, 1};
constexpr FieldDef record_length{"record_length", 2, 2};
} // namespace cedt_rec

namespace chbs {
constexpr FieldDef uid{"uid", 4, 4};
constexpr FieldDef cxl_version{"cxl_version", 8, 4};
constexpr FieldDef reserved{"reserved", 12, 4};
constexpr FieldDef base{"base", 16, 8};
constexpr FieldDef length{"length", 24, 8};
constexpr FieldDef all[] = {cedt_rec::type, cedt_rec::reserved, cedt_rec::record_length, uid,
                            cxl_version, reserved, base, length};
constexpr std::uint32_t kSize = 32;
} // namespace chbs

namespace cfmws_l {
constexpr FieldDef reserved1{"reserved1", 4, 4};
constexpr FieldDef base{"base_hpa", 8, 8};
constexpr FieldDef size{"window_size", 16, 8};
constexpr FieldDef eniw{"eniw", 24, 1};
constexpr FieldDef arithmetic{"interleave_arithmetic", 25, 1};
constexpr FieldDef reserved2{"reserved2", 26, 2};
constexpr FieldDef hbig{"hbig", 28, 4};
constexpr FieldDef restrictions{"restrictions", 32, 2};
constexpr FieldDef qtg_id{"qtg_id", 34, 2};
constexpr FieldDef all[] = {cedt_rec::type, cedt_rec::reserved, cedt_rec::record_length, reserved1, base,
                            size, eniw, arithmetic, reserved2, hbig, restrictions, qtg_id};
constexpr std::uint32_t kFixed = 36; // followed by 4-byte target uids
} // namespace cfmws_l

namespace srat_l {
constexpr FieldDef reserved1{"reserved1", 36, 4};
constexpr FieldDef reserved2{"reserved2", 40, 8};
constexpr FieldDef all[] = {reserved1, reserved2};
constexpr std::uint32_t kFixed = 48;
} // namespace srat_l

namespace srat_cpu {
constexpr FieldDef type{"type", 0, 1};
constexpr FieldDef length{"length", 1, 1};
constexpr FieldDef domain_lo{"proximity_domain_lo", 2, 1};
constexpr FieldDef apic_id{"apic_id", 3, 1};
constexpr FieldDef flags{"flags", 4, 4};
constexpr FieldDef sapic_eid{"local_sapic_eid", 8, 1};
constexpr FieldDef domain_hi{"proximity_domain_hi", 9, 3};
constexpr FieldDef clock_domain{"clock_domain", 12, 4};
constexpr FieldDef all[] = {type, length, domain_lo, apic_id, flags, sapic_eid, domain_hi, clock_domain};
constexpr std::uint32_t kSize = 16;
} // namespace srat_cpu

namespace srat_mem {
constexpr FieldDef type{"type", 0, 1};
constexpr FieldDef length{"length", 1, 1};
constexpr FieldDef domain{"proximity_domain", 2, 4};
constexpr FieldDef reserved1{"reserved1", 6, 2};
constexpr FieldDef base{"base_address", 8, 8};
constexpr FieldDef size{"range_length", 16, 8};
constexpr FieldDef reserved2{"reserved2", 24, 4};
constexpr FieldDef flags{"flags", 28, 4};
constexpr FieldDef reserved3{"reserved3", 32, 8};
constexpr FieldDef all[] = {type, length, domain, reserved1, base, size, reserved2, flags, reserved3};
constexpr std::uint32_t kSize = 40;
} // namespace srat_mem

namespace madt_l {
constexpr FieldDef lapic_address{"local_apic_address", 36, 4};
constexpr FieldDef flags{"flags", 40, 4};
constexpr FieldDef all[] = {lapic_address, flags};
constexpr std::uint32_t kFixed = 44;
} // namespace madt_l

namespace madt_lapic {
constexpr FieldDef type{"type", 0, 1};
constexpr FieldDef length{"length", 1, 1};
constexpr FieldDef uid{"processor_uid", 2, 1};
constexpr FieldDef apic_id{"apic_id", 3, 1};
constexpr FieldDef flags{"flags", 4, 4};
constexpr FieldDef all[] = {type, length, uid, apic_id, flags};
constexpr std::uint32_t kSize = 8;
} // namespace madt_lapic

namespace e820_l {
constexpr FieldDef magic{"magic", 0, 4};
constexpr FieldDef count{"count", 4, 4};
constexpr FieldDef all[] = {magic, count};
constexpr std::uint32_t kFixed = 8;
} // namespace e820_l

namespace e820_entry {
constexpr FieldDef base{"base", 0, 8};
constexpr FieldDef size{"size", 8, 8};
constexpr FieldDef type{"type", 16, 4};
constexpr FieldDef all[] = {base, size, type};
constexpr std::uint32_t kSize = 20;
} // namespace e820_entry

namespace rsdp_l {
constexpr FieldDef signature{"signature", 0, 8};
constexpr FieldDef checksum{"checksum", 8, 1};
constexpr FieldDef oem_id{"oem_id", 9, 6};
constexpr FieldDef revision{"revision", 15, 1};
constexpr FieldDef rsdt_address{"rsdt_address", 16, 4};
constexpr FieldDef length{"length", 20, 4};
constexpr FieldDef xsdt_address{"xsdt_address", 24, 8};
constexpr FieldDef ext_checksum{"extended_checksum", 32, 1};
constexpr FieldDef reserved{"reserved", 33, 3};
constexpr FieldDef all[] = {signature, checksum, oem_id, revision, rsdt_address,
                            length, xsdt_address, ext_checksum, reserved};
constexpr std::uint32_t kSize = 36;
constexpr std::uint32_t kV1Size = 20;
} // namespace rsdp_l

constexpr StructLayout kLayouts[] = {
    {"acpi_header", 36, hdr::all},
    {"mcfg", mcfg::kFixed, mcfg::all},
    {"mcfg_allocation", mcfg_alloc::kSize, mcfg_alloc::all},
    {"cedt_chbs", chbs::kSize, chbs::all},
    {"cedt_cfmws", cfmws_l::kFixed, cfmws_l::all},
    {"srat", srat_l::kFixed, srat_l::all},
    {"srat_cpu_affinity", srat_cpu::kSize, srat_cpu::all},
    {"srat_memory_affinity", srat_mem::kSize, srat_mem::all},
    {"madt", madt_l::kFixed, madt_l::all},
    {"madt_local_apic", madt_lapic::kSize, madt_lapic::all},
    {"e820", e820_l::kFixed, e820_l::all},
    {"e820_entry", e820_entry::kSize, e820_entry::all},
    {"rsdp", rsdp_l::kSize, rsdp_l::all},
};

// ---------------------------------------------------------------- byte helpers

void put(Bytes& b, std::size_t base, const FieldDef& f, std::uint64_t v)
{
    if (b.size() < base + f.offset + f.width)
        b.resize(base + f.offset + f.width, 0);
    for (std::uint32_t i = 0; i < f.width; ++i)
        b[base + f.offset + i] = static_cast<std::uint8_t>(f.width > 8 || i >= 8 ? 0 : v >> (8 * i));
}

void put_str(Bytes& b, std::size_t base, const FieldDef& f, std::string_view s, char pad)
{
    if (b.size() < base + f.offset + f.width)
        b.resize(base + f.offset + f.width, 0);
    for (std::uint32_t i = 0; i < f.width; ++i)
        b[base + f.offset + i] = static_cast<std::uint8_t>(i < s.size() ? s[i] : pad);
}

class Reader {
public:
    Reader(std::span<const std::uint8_t> b, std::string_view what) : b_(b), what_(what) {}

    std::uint64_t get(std::size_t base, const FieldDef& f) const
    {
        need(base + f.offset + f.width);
        std::uint64_t v = 0;
        for (std::uint32_t i = 0; i < f.width && i < 8; ++i)
            v |= std::uint64_t{b_[base + f.offset + i]} << (8 * i);
        return v;
    }
    std::string str(std::size_t base, const FieldDef& f) const
    {
        need(base + f.offset + f.width);
        return {reinterpret_cast<const char*>(b_.data() + base + f.offset), f.width};
    }
    void need(std::size_t end) const
    {
        if (end > b_.size())
            throw Error(Errc::TruncatedTable,
                        fmt::format("{} needs {} bytes but only {} are present", what_, end, b_.size()));
    }
    std::size_t size() const { return b_.size(); }

private:
    std::span<const std::uint8_t> b_;
    std::string_view what_;
};

void write_header(Bytes& b, const AcpiHeader& h)
{
    put_str(b, 0, hdr::signature, h.signature, ' ');
    put(b, 0, hdr::revision, h.revision);
    put(b, 0, hdr::checksum, 0);
    put_str(b, 0, hdr::oem_id, h.oem_id, ' ');
    put_str(b, 0, hdr::oem_table_id, h.oem_table_id, ' ');
    put(b, 0, hdr::oem_revision, h.oem_revision);
    put(b, 0, hdr::creator_id, h.creator_id);
    put(b, 0, hdr::creator_revision, h.creator_revision);
}

void seal(Bytes& b)
{
    put(b, 0, hdr::length, b.size());
    b[hdr::checksum.offset] = 0;
    b[hdr::checksum.offset] = checksum_fix(b);
}

std::string rtrim(std::string s)
{
    while (!s.empty() && (s.back() == ' ' || s.back() == '\0'))
        s.pop_back();
    return s;
}

AcpiHeader read_header(std::span<const std::uint8_t> b, std::string_view sig)
{
    Reader r(b, sig);
    r.need(kAcpiHeaderBytes);
    AcpiHeader h;
    h.signature = r.str(0, hdr::signature);
    if (h.signature != sig)
        throw Error(Errc::BadSignature, fmt::format("expected signature {}, found '{}'", sig, h.signature));
    h.length = static_cast<std::uint32_t>(r.get(0, hdr::length));
    if (h.length < kAcpiHeaderBytes)
        throw Error(Errc::BadStructure, fmt::format("{} length {} is shorter than its header", sig, h.length));
    if (h.length > b.size())
        throw Error(Errc::TruncatedTable,
                    fmt::format("{} declares {} bytes but only {} are present", sig, h.length, b.size()));
    if (h.length < b.size())
        throw Error(Errc::BadStructure,
                    fmt::format("{} declares {} bytes but the blob has {}", sig, h.length, b.size()));
    if (byte_sum(b) != 0)
        throw Error(Errc::BadChecksum, fmt::format("{} bytes sum to {:#04x}, not 0 mod 256", sig, byte_sum(b)));
    h.revision = static_cast<std::uint8_t>(r.get(0, hdr::revision));
    h.checksum = static_cast<std::uint8_t>(r.get(0, hdr::checksum));
    h.oem_id = rtrim(r.str(0, hdr::oem_id));
    h.oem_table_id = rtrim(r.str(0, hdr::oem_table_id));
    h.oem_revision = static_cast<std::uint32_t>(r.get(0, hdr::oem_revision));
    h.creator_id = static_cast<std::uint32_t>(r.get(0, hdr::creator_id));
    h.creator_revision = static_cast<std::uint32_t>(r.get(0, hdr::creator_revision));
    return h;
}

AcpiHeader make_header(std::string sig, std::uint8_t revision)
{
    AcpiHeader h;
    h.signature = std::move(sig);
    h.revision = revision;
    return h;
}

template <class T>
void finalize(T& t)
{
    const Bytes b = serialize(t);
    t.header.length = static_cast<std::uint32_t>(b.size());
    t.header.checksum = b[hdr::checksum.offset];
}

} // namespace

std::span<const StructLayout> firmware_layouts()
{
    return kLayouts;
}

const StructLayout& firmware_layout(std::string_view name)
{
    for (const auto& l : kLayouts)
        if (l.name == name)
            return l;
    throw Error(Errc::InvalidArgument, fmt::format("no firmware layout named {}", name));
}

std::string_view to_string(E820Type t)
{
    return t == E820Type::Usable ? "usable" : "reserved";
}

unsigned CfmwsEntry::ways() const
{
    switch (eniw) {
    case 0: case 1: case 2: case 3: case 4: return 1u << eniw;
    case 8: return 3;
    case 9: return 6;
    case 10: return 12;
    default: return 0;
    }
}

std::uint8_t byte_sum(std::span<const std::uint8_t> bytes)
{
    unsigned s = 0;
    for (auto v : bytes)
        s += v;
    return static_cast<std::uint8_t>(s);
}

std::uint8_t checksum_fix(std::span<const std::uint8_t> bytes)
{
    return static_cast<std::uint8_t>(0x100 - byte_sum(bytes));
}

// ---------------------------------------------------------------- serialize

Bytes serialize(const McfgTable& t)
{
    Bytes b(mcfg::kFixed, 0);
    write_header(b, t.header);
    for (std::size_t i = 0; i < t.allocations.size(); ++i) {
        const auto& a = t.allocations[i];
        const std::size_t at = mcfg::kFixed + i * mcfg_alloc::kSize;
        put(b, at, mcfg_alloc::base, a.base);
        put(b, at, mcfg_alloc::segment, a.segment);
        put(b, at, mcfg_alloc::start_bus, a.start_bus);
        put(b, at, mcfg_alloc::end_bus, a.end_bus);
        put(b, at, mcfg_alloc::reserved, 0);
    }
    seal(b);
    return b;
}

Bytes serialize(const CedtTable& t)
{
    Bytes b(kAcpiHeaderBytes, 0);
    write_header(b, t.header);
    for (const auto& c : t.chbs) {
        const std::size_t at = b.size();
        put(b, at, cedt_rec::type, 0);
        put(b, at, cedt_rec::record_length, chbs::kSize);
        put(b, at, chbs::uid, c.uid);
        put(b, at, chbs::cxl_version, c.cxl_version);
        put(b, at, chbs::base, c.base);
        put(b, at, chbs::length, c.length);
    }
    for (const auto& w : t.cfmws) {
        const std::size_t at = b.size();
        const std::uint32_t len = cfmws_l::kFixed + 4 * static_cast<std::uint32_t>(w.targets.size());
        put(b, at, cedt_rec::type, 1);
        put(b, at, cedt_rec::record_length, len);
        put(b, at, cfmws_l::base, w.base);
        put(b, at, cfmws_l::size, w.size);
        put(b, at, cfmws_l::eniw, w.eniw);
        put(b, at, cfmws_l::arithmetic, w.interleave_arithmetic);
        put(b, at, cfmws_l::hbig, w.hbig);
        put(b, at, cfmws_l::restrictions, w.restrictions);
        put(b, at, cfmws_l::qtg_id, w.qtg_id);
        for (std::size_t i = 0; i < w.targets.size(); ++i)
            put(b, at, FieldDef{"target", static_cast<std::uint32_t>(cfmws_l::kFixed + 4 * i), 4}, w.targets[i]);
    }
    seal(b);
    return b;
}

Bytes serialize(const SratTable& t)
{
    Bytes b(srat_l::kFixed, 0);
    write_header(b, t.header);
    put(b, 0, srat_l::reserved1, 1); // legacy reserved value
    for (const auto& e : t.entries) {
        const std::size_t at = b.size();
        if (const auto* c = std::get_if<SratCpuAffinity>(&e)) {
            put(b, at, srat_cpu::type, 0);
            put(b, at, srat_cpu::length, srat_cpu::kSize);
            put(b, at, srat_cpu::domain_lo, c->node & 0xFF);
            put(b, at, srat_cpu::apic_id, c->apic_id);
            put(b, at, srat_cpu::flags, c->flags);
            put(b, at, srat_cpu::domain_hi, c->node >> 8);
            put(b, at, srat_cpu::clock_domain, 0);
        } else {
            const auto& m = std::get<SratMemAffinity>(e);
            put(b, at, srat_mem::type, 1);
            put(b, at, srat_mem::length, srat_mem::kSize);
            put(b, at, srat_mem::domain, m.node);
            put(b, at, srat_mem::base, m.base);
            put(b, at, srat_mem::size, m.size);
            put(b, at, srat_mem::flags, m.flags);
            put(b, at, srat_mem::reserved3, 0);
        }
    }
    seal(b);
    return b;
}

Bytes serialize(const MadtStub& t)
{
    Bytes b(madt_l::kFixed, 0);
    write_header(b, t.header);
    put(b, 0, madt_l::lapic_address, t.local_apic_address);
    put(b, 0, madt_l::flags, t.flags);
    for (const auto& l : t.lapics) {
        const std::size_t at = b.size();
        put(b, at, madt_lapic::type, 0);
        put(b, at, madt_lapic::length, madt_lapic::kSize);
        put(b, at, madt_lapic::uid, l.processor_uid);
        put(b, at, madt_lapic::apic_id, l.apic_id);
        put(b, at, madt_lapic::flags, l.flags);
    }
    seal(b);
    return b;
}

Bytes serialize(const E820Map& m)
{
    Bytes b(e820_l::kFixed, 0);
    put_str(b, 0, e820_l::magic, "E820", ' ');
    put(b, 0, e820_l::count, m.entries.size());
    for (const auto& e : m.entries) {
        const std::size_t at = b.size();
        put(b, at, e820_entry::base, e.base);
        put(b, at, e820_entry::size, e.size);
        put(b, at, e820_entry::type, static_cast<std::uint32_t>(e.type));
    }
    return b;
}

Bytes serialize(const RsdpStub& r)
{
    Bytes b(rsdp_l::kSize, 0);
    put_str(b, 0, rsdp_l::signature, "RSD PTR ", ' ');
    put_str(b, 0, rsdp_l::oem_id, r.oem_id, ' ');
    put(b, 0, rsdp_l::revision, r.revision);
    put(b, 0, rsdp_l::rsdt_address, r.rsdt_address);
    put(b, 0, rsdp_l::length, rsdp_l::kSize);
    put(b, 0, rsdp_l::xsdt_address, r.xsdt_address);
    b[rsdp_l::checksum.offset] = checksum_fix(std::span(b).first(rsdp_l::kV1Size));
    b[rsdp_l::ext_checksum.offset] = checksum_fix(b);
    return b;
}

std::string serialize(const DsdtSidecar& d)
{
    std::string s = "# cxlsim dsdt sidecar v1\n";
    for (const auto& h : d.host_bridges)
        s += fmt::format("host_bridge uid={} hid=ACPI0016 cid=PNP0A08 bus={:#04x} chbs={:#x}\n", h.uid, h.bus,
                         h.chbs_base);
    for (const auto& w : d.mmio_windows)
        s += fmt::format("mmio_window name={} base={:#x} size={:#x}\n", w.name, w.base, w.size);
    return s;
}

// ---------------------------------------------------------------- parse

McfgTable parse_mcfg(std::span<const std::uint8_t> b)
{
    McfgTable t;
    t.header = read_header(b, "MCFG");
    Reader r(b, "MCFG");
    r.need(mcfg::kFixed);
    for (std::size_t at = mcfg::kFixed; at < b.size(); at += mcfg_alloc::kSize) {
        r.need(at + mcfg_alloc::kSize);
        McfgAllocation a;
        a.base = r.get(at, mcfg_alloc::base);
        a.segment = static_cast<std::uint16_t>(r.get(at, mcfg_alloc::segment));
        a.start_bus = static_cast<std::uint8_t>(r.get(at, mcfg_alloc::start_bus));
        a.end_bus = static_cast<std::uint8_t>(r.get(at, mcfg_alloc::end_bus));
        if (r.get(at, mcfg_alloc::reserved) != 0)
            throw Error(Errc::BadStructure, fmt::format("MCFG allocation at {} has non-zero reserved bytes", at));
        t.allocations.push_back(a);
    }
    return t;
}

CedtTable parse_cedt(std::span<const std::uint8_t> b)
{
    CedtTable t;
    t.header = read_header(b, "CEDT");
    Reader r(b, "CEDT");
    std::size_t at = kAcpiHeaderBytes;
    while (at < b.size()) {
        r.need(at + 4);
        const auto type = r.get(at, cedt_rec::type);
        const auto len = r.get(at, cedt_rec::record_length);
        r.need(at + len);
        if (type == 0) {
            if (len != chbs::kSize)
                throw Error(Errc::BadStructure, fmt::format("CHBS at {} has length {}", at, len));
            if (!t.cfmws.empty())
                throw Error(Errc::BadStructure, "CHBS records must precede CFMWS records");
            ChbsEntry c;
            c.uid = static_cast<std::uint32_t>(r.get(at, chbs::uid));
            c.cxl_version = static_cast<std::uint32_t>(r.get(at, chbs::cxl_version));
            c.base = r.get(at, chbs::base);
            c.length = r.get(at, chbs::length);
            t.chbs.push_back(c);
        } else if (type == 1) {
            if (len < cfmws_l::kFixed || (len - cfmws_l::kFixed) % 4 != 0)
                throw Error(Errc::BadStructure, fmt::format("CFMWS at {} has length {}", at, len));
            CfmwsEntry w;
            w.base = r.get(at, cfmws_l::base);
            w.size = r.get(at, cfmws_l::size);
            w.eniw = static_cast<std::uint8_t>(r.get(at, cfmws_l::eniw));
            w.interleave_arithmetic = static_cast<std::uint8_t>(r.get(at, cfmws_l::arithmetic));
            w.hbig = static_cast<std::uint32_t>(r.get(at, cfmws_l::hbig));
            w.restrictions = static_cast<std::uint16_t>(r.get(at, cfmws_l::restrictions));
            w.qtg_id = static_cast<std::uint16_t>(r.get(at, cfmws_l::qtg_id));
            const auto n = (len - cfmws_l::kFixed) / 4;
            if (w.ways() == 0 || n != w.ways())
                throw Error(Errc::BadStructure,
                            fmt::format("CFMWS at {} lists {} targets for ENIW {}", at, n, w.eniw));
            for (std::size_t i = 0; i < n; ++i)
                w.targets.push_back(static_cast<std::uint32_t>(
                    r.get(at, FieldDef{"target", static_cast<std::uint32_t>(cfmws_l::kFixed + 4 * i), 4})));
            t.cfmws.push_back(std::move(w));
        } else {
            throw Error(Errc::BadStructure, fmt::format("unknown CEDT record type {} at {}", type, at));
        }
        if (len == 0)
            throw Error(Errc::BadStructure, "zero-length CEDT record");
        at += len;
    }
    return t;
}

SratTable parse_srat(std::span<const std::uint8_t> b)
{
    SratTable t;
    t.header = read_header(b, "SRAT");
    Reader r(b, "SRAT");
    r.need(srat_l::kFixed);
    if (r.get(0, srat_l::reserved1) != 1 || r.get(0, srat_l::reserved2) != 0)
        throw Error(Errc::BadStructure, "SRAT reserved fields have unexpected values");
    std::size_t at = srat_l::kFixed;
    while (at < b.size()) {
        r.need(at + 2);
        const auto type = r.get(at, srat_cpu::type);
        const auto len = r.get(at, srat_cpu::length);
        r.need(at + len);
        if (type == 0 && len == srat_cpu::kSize) {
            SratCpuAffinity c;
            c.node = static_cast<std::uint32_t>(r.get(at, srat_cpu::domain_lo) | (r.get(at, srat_cpu::domain_hi) << 8));
            c.apic_id = static_cast<std::uint8_t>(r.get(at, srat_cpu::apic_id));
            c.flags = static_cast<std::uint32_t>(r.get(at, srat_cpu::flags));
            t.entries.emplace_back(c);
        } else if (type == 1 && len == srat_mem::kSize) {
            SratMemAffinity m;
            m.node = static_cast<std::uint32_t>(r.get(at, srat_mem::domain));
            m.base = r.get(at, srat_mem::base);
            m.size = r.get(at, srat_mem::size);
            m.flags = static_cast<std::uint32_t>(r.get(at, srat_mem::flags));
            t.entries.emplace_back(m);
        } else {
            throw Error(Errc::BadStructure, fmt::format("SRAT entry at {} has type {} length {}", at, type, len));
        }
        at += len;
    }
    return t;
}

MadtStub parse_madt(std::span<const std::uint8_t> b)
{
    MadtStub t;
    t.header = read_header(b, "APIC");
    Reader r(b, "APIC");
    r.need(madt_l::kFixed);
    t.local_apic_address = static_cast<std::uint32_t>(r.get(0, madt_l::lapic_address));
    t.flags = static_cast<std::uint32_t>(r.get(0, madt_l::flags));
    std::size_t at = madt_l::kFixed;
    while (at < b.size()) {
        r.need(at + 2);
        const auto type = r.get(at, madt_lapic::type);
        const auto len = r.get(at, madt_lapic::length);
        r.need(at + len);
        if (type != 0 || len != madt_lapic::kSize)
            throw Error(Errc::BadStructure, fmt::format("MADT entry at {} has type {} length {}", at, type, len));
        MadtLocalApic l;
        l.processor_uid = static_cast<std::uint8_t>(r.get(at, madt_lapic::uid));
        l.apic_id = static_cast<std::uint8_t>(r.get(at, madt_lapic::apic_id));
        l.flags = static_cast<std::uint32_t>(r.get(at, madt_lapic::flags));
        t.lapics.push_back(l);
        at += len;
    }
    return t;
}

E820Map parse_e820(std::span<const std::uint8_t> b)
{
    Reader r(b, "E820");
    r.need(e820_l::kFixed);
    if (r.str(0, e820_l::magic) != "E820")
        throw Error(Errc::BadSignature, "missing E820 magic");
    const auto count = r.get(0, e820_l::count);
    const std::size_t want = e820_l::kFixed + count * e820_entry::kSize;
    r.need(want);
    if (b.size() != want)
        throw Error(Errc::BadStructure, fmt::format("E820 blob has {} bytes, {} expected", b.size(), want));
    E820Map m;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t at = e820_l::kFixed + i * e820_entry::kSize;
        E820Entry e;
        e.base = r.get(at, e820_entry::base);
        e.size = r.get(at, e820_entry::size);
        const auto type = r.get(at, e820_entry::type);
        if (type != 1 && type != 2)
            throw Error(Errc::BadStructure, fmt::format("E820 entry {} has unsupported type {}", i, type));
        e.type = static_cast<E820Type>(type);
        m.entries.push_back(e);
    }
    return m;
}

RsdpStub parse_rsdp(std::span<const std::uint8_t> b)
{
    Reader r(b, "RSDP");
    r.need(rsdp_l::signature.width);
    if (r.str(0, rsdp_l::signature) != "RSD PTR ")
        throw Error(Errc::BadSignature, "missing RSD PTR signature");
    r.need(rsdp_l::kSize);
    if (b.size() != rsdp_l::kSize || r.get(0, rsdp_l::length) != rsdp_l::kSize)
        throw Error(Errc::BadStructure, "RSDP must be 36 bytes");
    if (byte_sum(b.first(rsdp_l::kV1Size)) != 0 || byte_sum(b) != 0)
        throw Error(Errc::BadChecksum, "RSDP checksum mismatch");
    RsdpStub s;
    s.oem_id = rtrim(r.str(0, rsdp_l::oem_id));
    s.revision = static_cast<std::uint8_t>(r.get(0, rsdp_l::revision));
    s.rsdt_address = static_cast<std::uint32_t>(r.get(0, rsdp_l::rsdt_address));
    s.xsdt_address = r.get(0, rsdp_l::xsdt_address);
    s.checksum = static_cast<std::uint8_t>(r.get(0, rsdp_l::checksum));
    s.ext_checksum = static_cast<std::uint8_t>(r.get(0, rsdp_l::ext_checksum));
    return s;
}

namespace {
std::map<std::string, std::string> kv_tokens(std::istringstream& in, std::size_t line_no)
{
    std::map<std::string, std::string> kv;
    std::string tok;
    while (in >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw Error(Errc::ParseError, fmt::format("dsdt sidecar line {}: token '{}' is not key=value", line_no, tok));
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

std::uint64_t kv_num(const std::map<std::string, std::string>& kv, const std::string& key, std::size_t line_no)
{
    auto it = kv.find(key);
    if (it == kv.end())
        throw Error(Errc::ParseError, fmt::format("dsdt sidecar line {}: missing '{}'", line_no, key));
    try {
        std::size_t used = 0;
        const auto v = std::stoull(it->second, &used, 0);
        if (used != it->second.size())
            throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw Error(Errc::ParseError, fmt::format("dsdt sidecar line {}: '{}' is not a number", line_no, it->second));
    }
}
} // namespace

DsdtSidecar parse_dsdt_sidecar(std::string_view text)
{
    DsdtSidecar d;
    std::istringstream lines{std::string(text)};
    std::string line;
    std::size_t no = 0;
    while (std::getline(lines, line)) {
        ++no;
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream in(line);
        std::string kind;
        in >> kind;
        const auto kv = kv_tokens(in, no);
        if (kind == "host_bridge") {
            if (kv.count("hid") == 0 || kv.at("hid") != "ACPI0016")
                throw Error(Errc::ParseError, fmt::format("dsdt sidecar line {}: host bridge hid must be ACPI0016", no));
            HostBridgeDesc h;
            h.uid = static_cast<std::uint32_t>(kv_num(kv, "uid", no));
            h.bus = static_cast<std::uint8_t>(kv_num(kv, "bus", no));
            h.chbs_base = kv_num(kv, "chbs", no);
            d.host_bridges.push_back(h);
        } else if (kind == "mmio_window") {
            MmioWindowDesc w;
            if (kv.count("name") == 0)
                throw Error(Errc::ParseError, fmt::format("dsdt sidecar line {}: missing 'name'", no));
            w.name = kv.at("name");
            w.base = kv_num(kv, "base", no);
            w.size = kv_num(kv, "size", no);
            d.mmio_windows.push_back(std::move(w));
        } else {
            throw Error(Errc::ParseError, fmt::format("dsdt sidecar line {}: unknown record '{}'", no, kind));
        }
    }
    return d;
}

AnyTable parse_any(std::span<const std::uint8_t> b)
{
    auto starts = [&](std::string_view sig) {
        return b.size() >= sig.size() && std::equal(sig.begin(), sig.end(), b.begin());
    };
    if (starts("RSD PTR "))
        return parse_rsdp(b);
    if (starts("E820"))
        return parse_e820(b);
    if (starts("MCFG"))
        return parse_mcfg(b);
    if (starts("CEDT"))
        return parse_cedt(b);
    if (starts("SRAT"))
        return parse_srat(b);
    if (starts("APIC"))
        return parse_madt(b);
    throw Error(Errc::BadSignature, "unrecognized table signature");
}

Bytes serialize_any(const AnyTable& t)
{
    return std::visit([](const auto& x) { return serialize(x); }, t);
}

namespace {
std::string header_line(const AcpiHeader& h)
{
    return fmt::format("{} rev {} length {} checksum {:#04x} oem '{}' table '{}' oem_rev {} creator {:#x} rev {}\n",
                       h.signature, h.revision, h.length, h.checksum, h.oem_id, h.oem_table_id, h.oem_revision,
                       h.creator_id, h.creator_revision);
}
} // namespace

std::string describe(const AnyTable& any)
{
    std::string s;
    if (const auto* r = std::get_if<RsdpStub>(&any)) {
        s = fmt::format("RSDP rev {} oem '{}' rsdt {:#x} xsdt {:#x} checksum {:#04x} ext_checksum {:#04x}\n",
                        r->revision, r->oem_id, r->rsdt_address, r->xsdt_address, r->checksum, r->ext_checksum);
    } else if (const auto* e = std::get_if<E820Map>(&any)) {
        s = fmt::format("E820 {} entries\n", e->entries.size());
        for (const auto& x : e->entries)
            s += fmt::format("  [{:#014x}, {:#014x}) {}\n", x.base, x.base + x.size, to_string(x.type));
    } else if (const auto* m = std::get_if<McfgTable>(&any)) {
        s = header_line(m->header);
        for (const auto& a : m->allocations)
            s += fmt::format("  ecam base {:#x} segment {} buses {:#04x}-{:#04x}\n", a.base, a.segment, a.start_bus,
                             a.end_bus);
    } else if (const auto* c = std::get_if<CedtTable>(&any)) {
        s = header_line(c->header);
        for (const auto& h : c->chbs)
            s += fmt::format("  CHBS uid {} cxl_version {} base {:#x} length {:#x}\n", h.uid, h.cxl_version, h.base,
                             h.length);
        for (const auto& w : c->cfmws) {
            s += fmt::format("  CFMWS base {:#x} size {:#x} ways {} hbig {} restrictions {:#06x} qtg {} targets",
                             w.base, w.size, w.ways(), w.hbig, w.restrictions, w.qtg_id);
            for (auto t : w.targets)
                s += fmt::format(" {}", t);
            s += "\n";
        }
    } else if (const auto* sr = std::get_if<SratTable>(&any)) {
        s = header_line(sr->header);
        for (const auto& en : sr->entries) {
            if (const auto* cpu = std::get_if<SratCpuAffinity>(&en))
                s += fmt::format("  CPU apic {} node {} flags {:#x}\n", cpu->apic_id, cpu->node, cpu->flags);
            else {
                const auto& mem = std::get<SratMemAffinity>(en);
                s += fmt::format("  MEM [{:#014x}, {:#014x}) node {} flags {:#x}{}{}\n", mem.base, mem.base + mem.size,
                                 mem.node, mem.flags, (mem.flags & srat::kEnabled) ? " enabled" : "",
                                 (mem.flags & srat::kHotPluggable) ? " hot-pluggable" : "");
            }
        }
    } else if (const auto* ma = std::get_if<MadtStub>(&any)) {
        s = header_line(ma->header);
        s += fmt::format("  local apic {:#x} flags {:#x}\n", ma->local_apic_address, ma->flags);
        for (const auto& l : ma->lapics)
            s += fmt::format("  LAPIC uid {} apic {} flags {:#x}\n", l.processor_uid, l.apic_id, l.flags);
    }
    return s;
}

std::vector<std::pair<std::string, Bytes>> table_blobs(const FirmwareTables& t)
{
    return {{"rsdp.bin", serialize(t.rsdp)}, {"e820.bin", serialize(t.e820)}, {"mcfg.bin", serialize(t.mcfg)},
            {"cedt.bin", serialize(t.cedt)}, {"srat.bin", serialize(t.srat)}, {"madt.bin", serialize(t.madt)}};
}

std::string hexdump(std::span<const std::uint8_t> bytes)
{
    std::string s;
    for (std::size_t row = 0; row < bytes.size(); row += 16) {
        s += fmt::format("{:08x}: ", row);
        std::string ascii;
        for (std::size_t i = row; i < row + 16; ++i) {
            if (i < bytes.size()) {
                s += fmt::format("{:02x} ", bytes[i]);
                ascii += (bytes[i] >= 0x20 && bytes[i] < 0x7f) ? static_cast<char>(bytes[i]) : '.';
            } else {
                s += "   ";
            }
        }
        s += " |" + ascii + "|\n";
    }
    return s;
}

// ---------------------------------------------------------------- build

namespace {

std::set<unsigned> dram_nodes(const AddressMap& map)
{
    std::set<unsigned> out;
    for (const auto& r : map.regions())
        if (r.kind == RegionKind::SystemDram && r.numa_node)
            out.insert(*r.numa_node);
    return out;
}

[[noreturn]] void inconsistent(const std::string& what)
{
    throw Error(Errc::InconsistentTopology, what);
}

} // namespace

std::vector<std::string> cross_check(const FirmwareTables& t, const AddressMap& map)
{
    std::vector<std::string> out;
    const auto dram = dram_nodes(map);
    const auto topo = map.topology();

    // CFMWS <-> CXL window regions, one-to-one and exact.
    std::vector<const PhysRegion*> cxl;
    for (const auto& r : map.regions())
        if (r.kind == RegionKind::CxlWindow)
            cxl.push_back(&r);
    if (cxl.size() != t.cedt.cfmws.size())
        out.push_back(fmt::format("CEDT has {} CFMWS records for {} CXL regions", t.cedt.cfmws.size(), cxl.size()));
    for (const auto* r : cxl) {
        const auto n = std::count_if(t.cedt.cfmws.begin(), t.cedt.cfmws.end(),
                                     [&](const CfmwsEntry& w) { return w.base == r->base && w.size == r->size; });
        if (n != 1)
            out.push_back(fmt::format("CXL region '{}' is matched by {} CFMWS windows", r->name, n));
    }
    std::set<std::uint32_t> uids;
    for (const auto& c : t.cedt.chbs)
        uids.insert(c.uid);
    for (const auto& w : t.cedt.cfmws) {
        if (w.ways() != 1)
            out.push_back(fmt::format("CFMWS {:#x} interleaves {} ways; single logical devices need 1", w.base,
                                      w.ways()));
        for (auto uid : w.targets)
            if (!uids.contains(uid))
                out.push_back(fmt::format("CFMWS {:#x} targets host bridge {} which has no CHBS", w.base, uid));
    }

    // SRAT memory affinity <-> memory regions, one-to-one.
    std::vector<SratMemAffinity> mems;
    std::set<unsigned> cpu_nodes_in_srat;
    for (const auto& e : t.srat.entries) {
        if (const auto* m = std::get_if<SratMemAffinity>(&e))
            mems.push_back(*m);
        else
            cpu_nodes_in_srat.insert(std::get<SratCpuAffinity>(e).node);
    }
    std::size_t memory_regions = 0;
    for (const auto& r : map.regions()) {
        if (r.kind != RegionKind::SystemDram && r.kind != RegionKind::CxlWindow)
            continue;
        ++memory_regions;
        const auto n = std::count_if(mems.begin(), mems.end(), [&](const SratMemAffinity& m) {
            return m.base == r.base && m.size == r.size && m.node == r.numa_node.value_or(~0u);
        });
        if (n != 1)
            out.push_back(fmt::format("region '{}' is matched by {} SRAT memory affinity entries", r.name, n));
    }
    if (memory_regions != mems.size())
        out.push_back(fmt::format("SRAT has {} memory entries for {} memory regions", mems.size(), memory_regions));
    for (const auto& m : mems)
        if (topo.node(m.node) == nullptr)
            out.push_back(fmt::format("SRAT memory entry {:#x} names node {} which does not exist", m.base, m.node));
    for (const auto* r : cxl) {
        const unsigned node = r->numa_node.value_or(~0u);
        const bool cpuless = !dram.contains(node);
        if (cpuless && cpu_nodes_in_srat.contains(node))
            out.push_back(fmt::format("CPU-less CXL node {} has SRAT CPU affinity entries", node));
    }

    // E820 ordering and MCFG backing.
    for (std::size_t i = 1; i < t.e820.entries.size(); ++i)
        if (t.e820.entries[i].base < t.e820.entries[i - 1].base + t.e820.entries[i - 1].size)
            out.push_back(fmt::format("E820 entry {} is out of order or overlaps its predecessor", i));
    for (const auto& a : t.mcfg.allocations) {
        const auto* r = map.region_at(a.base);
        if (r == nullptr || r->kind != RegionKind::Mmio || a.base + a.window_bytes() > r->end())
            out.push_back(fmt::format("MCFG ECAM window {:#x}+{:#x} is not backed by an MMIO region", a.base,
                                      a.window_bytes()));
    }
    return out;
}

FirmwareTables build_tables(const AddressMap& map, const PlatformDesc& platform)
{
    if (const auto v = map.violations(); !v.empty())
        inconsistent("address map: " + v.front());
    const auto dram = dram_nodes(map);

    FirmwareTables t;
    t.rsdp.xsdt_address = platform.xsdt_address;

    for (const auto& r : map.regions()) {
        E820Type type = E820Type::Reserved;
        if (r.kind == RegionKind::SystemDram)
            type = E820Type::Usable;
        else if (r.kind == RegionKind::CxlWindow && r.numa_node && dram.contains(*r.numa_node))
            type = E820Type::Usable; // flat: plain system memory to the OS
        t.e820.entries.push_back({r.base, r.size, type});
    }

    t.mcfg.header = make_header("MCFG", 1);
    t.mcfg.allocations.push_back(platform.ecam);

    t.cedt.header = make_header("CEDT", 1);
    std::set<std::uint32_t> uids;
    for (const auto& h : platform.host_bridges) {
        if (!uids.insert(h.uid).second)
            inconsistent(fmt::format("host bridge uid {} is listed twice", h.uid));
        t.cedt.chbs.push_back({h.uid, 1, h.chbs_base, 0x10000});
    }
    for (const auto& r : map.regions()) {
        if (r.kind != RegionKind::CxlWindow)
            continue;
        if (r.base % kHdmGranularity != 0 || r.size % kHdmGranularity != 0)
            inconsistent(fmt::format("CXL region '{}' is not 256 MiB aligned and cannot be a CFMWS window", r.name));
        const auto target = map.decode(r.base);
        if (!target)
            inconsistent(fmt::format("CXL region '{}' has no decoding HDM decoder", r.name));
        std::uint32_t uid = 0;
        if (auto it = platform.device_host_bridge.find(target->device); it != platform.device_host_bridge.end())
            uid = it->second;
        else if (!platform.host_bridges.empty())
            uid = platform.host_bridges.front().uid;
        else
            inconsistent(fmt::format("CXL region '{}' has no host bridge", r.name));
        if (!uids.contains(uid))
            inconsistent(fmt::format("CXL region '{}' targets host bridge {} which has no CHBS", r.name, uid));
        CfmwsEntry w;
        w.base = r.base;
        w.size = r.size;
        w.targets = {uid};
        t.cedt.cfmws.push_back(std::move(w));
    }

    t.srat.header = make_header("SRAT", 3);
    t.madt.header = make_header("APIC", 5);
    std::set<unsigned> apic_ids;
    for (std::size_t i = 0; i < platform.cpus.size(); ++i) {
        const auto& c = platform.cpus[i];
        if (!map.cpu_nodes().contains(c.node))
            inconsistent(fmt::format("CPU apic {} is placed on node {} which is not a CPU node", c.apic_id, c.node));
        if (!apic_ids.insert(c.apic_id).second)
            inconsistent(fmt::format("APIC id {} is used twice", c.apic_id));
        t.srat.entries.emplace_back(SratCpuAffinity{c.apic_id, c.node, srat::kEnabled});
        t.madt.lapics.push_back({static_cast<std::uint8_t>(i), c.apic_id, 1});
    }
    for (const auto& r : map.regions()) {
        if (r.kind != RegionKind::SystemDram && r.kind != RegionKind::CxlWindow)
            continue;
        std::uint32_t flags = srat::kEnabled;
        if (r.kind == RegionKind::CxlWindow)
            flags |= srat::kHotPluggable;
        t.srat.entries.emplace_back(SratMemAffinity{r.base, r.size, *r.numa_node, flags});
    }

    t.dsdt.host_bridges = platform.host_bridges;
    for (const auto& r : map.regions())
        if (r.kind == RegionKind::Mmio)
            t.dsdt.mmio_windows.push_back({r.name, r.base, r.size});

    finalize(t.mcfg);
    finalize(t.cedt);
    finalize(t.srat);
    finalize(t.madt);
    const Bytes rsdp = serialize(t.rsdp);
    t.rsdp.checksum = rsdp[rsdp_l::checksum.offset];
    t.rsdp.ext_checksum = rsdp[rsdp_l::ext_checksum.offset];

    if (const auto v = cross_check(t, map); !v.empty())
        inconsistent(v.front());
    return t;
}

} // namespace cxlsim
