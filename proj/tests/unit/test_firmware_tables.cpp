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

#include "cxlsim/error.hpp"
#include "cxlsim/firmware_tables.hpp"
#include "cxlsim/types.hpp"

#include <gtest/gtest.h>

#include <random>

#include "topologies.hpp"

using namespace cxlsim;

namespace {

Errc code_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no exception";
    return Errc::SimulationError;
}

AddressMap basic_map(NumaMode mode, unsigned cxl_node)
{
    return AddressMap({{"dram0", 0, 2 * GiB, RegionKind::SystemDram, 0},
                       {"ecam", 0xE000'0000, 256 * MiB, RegionKind::Mmio, std::nullopt},
                       {"cxl0.0", 0x1'0000'0000, 1 * GiB, RegionKind::CxlWindow, cxl_node}},
                      {{0, 0x1'0000'0000, 1 * GiB, 0, true}}, mode);
}

} // namespace

TEST(Checksum, FixByteExample)
{
    const Bytes b{0x30, 0x07, 0x00};
    EXPECT_EQ(byte_sum(b), 0x37);
    EXPECT_EQ(checksum_fix(b), 0xC9);
}

TEST(Mcfg, GoldenBytes)
{
    McfgTable t;
    t.header.signature = "MCFG";
    t.header.revision = 1;
    t.allocations.push_back({0xE000'0000, 0, 0, 0xFF});
    const Bytes b = serialize(t);
    ASSERT_EQ(b.size(), 60u);
    EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "MCFG");
    EXPECT_EQ(b[4], 60);
    EXPECT_EQ(b[5] | b[6] | b[7], 0);
    EXPECT_EQ(b[8], 1);
    EXPECT_EQ(std::string(b.begin() + 10, b.begin() + 16), "CXLSIM");
    EXPECT_EQ(byte_sum(b), 0);
    const Bytes alloc(b.begin() + 44, b.end());
    EXPECT_EQ(alloc, (Bytes{0x00, 0x00, 0x00, 0xE0, 0, 0, 0, 0, 0x00, 0x00, 0x00, 0xFF, 0, 0, 0, 0}));
    EXPECT_EQ(t.allocations[0].window_bytes(), 256 * MiB);
}

TEST(Tables, BuildsAndRoundTripsDefaultPlatform)
{
    const auto map = basic_map(NumaMode::Znuma, 1);
    const auto t = build_tables(map, PlatformDesc{});
    EXPECT_TRUE(cross_check(t, map).empty());
    ASSERT_EQ(t.cedt.cfmws.size(), 1u);
    EXPECT_EQ(t.cedt.cfmws[0].base, 0x1'0000'0000u);
    EXPECT_EQ(t.cedt.cfmws[0].ways(), 1u);
    EXPECT_EQ(parse_mcfg(serialize(t.mcfg)), t.mcfg);
    EXPECT_EQ(parse_cedt(serialize(t.cedt)), t.cedt);
    EXPECT_EQ(parse_srat(serialize(t.srat)), t.srat);
    EXPECT_EQ(parse_madt(serialize(t.madt)), t.madt);
    EXPECT_EQ(parse_e820(serialize(t.e820)), t.e820);
    EXPECT_EQ(parse_rsdp(serialize(t.rsdp)), t.rsdp);
    EXPECT_EQ(parse_dsdt_sidecar(serialize(t.dsdt)), t.dsdt);
    for (const auto& [name, blob] : table_blobs(t)) {
        const auto any = parse_any(blob);
        EXPECT_EQ(serialize_any(any), blob) << name;
        EXPECT_FALSE(describe(any).empty());
    }
}

TEST(Tables, CxlWindowIsReservedInE820AndHotplugInSrat)
{
    const auto t = build_tables(basic_map(NumaMode::Znuma, 1), PlatformDesc{});
    bool found = false;
    for (const auto& e : t.e820.entries)
        if (e.base == 0x1'0000'0000) {
            EXPECT_EQ(e.type, E820Type::Reserved);
            found = true;
        }
    EXPECT_TRUE(found);
    for (const auto& e : t.srat.entries)
        if (const auto* m = std::get_if<SratMemAffinity>(&e); m && m->base == 0x1'0000'0000) {
            EXPECT_EQ(m->node, 1u);
            EXPECT_NE(m->flags & srat::kHotPluggable, 0u);
        }
}

TEST(Tables, FlatModeFoldsWindowIntoDramNode)
{
    const auto t = build_tables(basic_map(NumaMode::Flat, 0), PlatformDesc{});
    std::set<std::uint32_t> nodes;
    for (const auto& e : t.srat.entries)
        if (const auto* m = std::get_if<SratMemAffinity>(&e))
            nodes.insert(m->node);
    EXPECT_EQ(nodes, (std::set<std::uint32_t>{0}));
    for (const auto& e : t.e820.entries)
        if (e.base == 0x1'0000'0000)
            EXPECT_EQ(e.type, E820Type::Usable);
}

TEST(Tables, CorruptedByteFailsChecksum)
{
    const auto t = build_tables(basic_map(NumaMode::Znuma, 1), PlatformDesc{});
    Bytes b = serialize(t.srat);
    b[40] ^= 0x01;
    EXPECT_EQ(code_of([&] { parse_srat(b); }), Errc::BadChecksum);
    Bytes m = serialize(t.mcfg);
    m[0] = 'X';
    EXPECT_EQ(code_of([&] { parse_mcfg(m); }), Errc::BadSignature);
    EXPECT_EQ(code_of([&] { parse_any(m); }), Errc::BadSignature);
}

TEST(Tables, TruncationIsDetected)
{
    const auto t = build_tables(basic_map(NumaMode::Znuma, 1), PlatformDesc{});
    Bytes b = serialize(t.cedt);
    b.resize(b.size() - 4);
    EXPECT_EQ(code_of([&] { parse_cedt(b); }), Errc::TruncatedTable);
    EXPECT_EQ(code_of([&] { parse_mcfg(Bytes(10, 0)); }), Errc::TruncatedTable);
}

TEST(Tables, InconsistentInputsAreNamed)
{
    PlatformDesc p;
    p.cpus = {{0, 3}};
    try {
        build_tables(basic_map(NumaMode::Znuma, 1), p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InconsistentTopology);
        EXPECT_NE(std::string(e.what()).find("node 3"), std::string::npos);
    }
    p = PlatformDesc{};
    p.device_host_bridge[0] = 42;
    EXPECT_EQ(code_of([&] { build_tables(basic_map(NumaMode::Znuma, 1), p); }), Errc::InconsistentTopology);
}

TEST(Tables, RandomTopologiesRoundTrip)
{
    std::mt19937_64 rng(21);
    for (int i = 0; i < 50; ++i) {
        auto topo = test::random_topology(rng);
        ASSERT_TRUE(topo.map.violations().empty()) << topo.map.violations().front();
        const auto t = build_tables(topo.map, topo.platform);
        for (const auto& [name, blob] : table_blobs(t))
            EXPECT_EQ(serialize_any(parse_any(blob)), blob) << name;
    }
}

TEST(Tables, HexdumpLayout)
{
    const auto dump = hexdump(Bytes{0x41, 0x42});
    EXPECT_NE(dump.find("41 42"), std::string::npos);
}
