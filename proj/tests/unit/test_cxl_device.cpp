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

#include "cxlsim/cxl_device.hpp"
#include "cxlsim/error.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace cxlsim;

namespace {

constexpr std::uint64_t kWin = 0x1'0000'0000;

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

AddressMap dram_only_map()
{
    return AddressMap({{"dram0", 0, 1 * GiB, RegionKind::SystemDram, 0}}, {}, NumaMode::Flat);
}

} // namespace

TEST(RegisterLayout, RowsAreDisjointAndInsideTheirSpace)
{
    for (unsigned n : {1u, 2u, 4u, 8u}) {
        auto rows = build_register_layout({.capacity = 1 * GiB, .hdm_decoders = n});
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            return std::pair(a.space, a.offset) < std::pair(b.space, b.offset);
        });
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto limit = rows[i].space == RegSpace::Config ? reg::kConfigSpaceBytes : reg::kBar0Bytes;
            EXPECT_LE(rows[i].offset + rows[i].size, limit) << rows[i].name;
            if (rows[i].size <= 8)
                EXPECT_EQ(rows[i].offset % rows[i].size, 0u) << rows[i].name;
            if (i > 0 && rows[i - 1].space == rows[i].space)
                EXPECT_LE(rows[i - 1].offset + rows[i - 1].size, rows[i].offset) << rows[i].name;
        }
    }
}

TEST(RegisterLayout, DecoderCountEncoding)
{
    EXPECT_EQ(encode_decoder_count(1), 0u);
    EXPECT_EQ(encode_decoder_count(2), 1u);
    EXPECT_EQ(encode_decoder_count(8), 4u);
    EXPECT_THROW(encode_decoder_count(3), Error);
}

TEST(Device, PciIdentityReadsBack)
{
    CxlMemDevice dev({.vendor_id = 0x1AB4, .device_id = 0x0042});
    EXPECT_EQ(dev.cfg_read(reg::kVendorId, 2), 0x1AB4u);
    EXPECT_EQ(dev.cfg_read(reg::kDeviceId, 2), 0x0042u);
    EXPECT_EQ(dev.cfg_read(reg::kVendorId, 4), 0x00421AB4u);
    EXPECT_EQ(dev.cfg_read(reg::kClassCode, 1), 0x05u);
    EXPECT_EQ(dev.cfg_read(reg::kSubclass, 1), 0x02u);
    EXPECT_EQ(dev.cfg_read(reg::kProgIf, 1), 0x10u);
}

TEST(Device, AccessErrors)
{
    CxlMemDevice dev({});
    EXPECT_EQ(code_of([&] { dev.cfg_read(0x1000, 4); }), Errc::OutOfRange);
    EXPECT_EQ(code_of([&] { dev.mmio_read(reg::kBar0Bytes, 4); }), Errc::OutOfRange);
    EXPECT_EQ(code_of([&] { dev.cfg_read(0x2, 4); }), Errc::Misaligned);
    EXPECT_EQ(dev.cfg_read(0x800, 4), 0u); // reserved reads as zero
}

TEST(Device, WritesRespectWritableMask)
{
    CxlMemDevice dev({});
    dev.cfg_write(reg::kVendorId, 2, 0xFFFF);
    EXPECT_EQ(dev.cfg_read(reg::kVendorId, 2), 0x8086u);
    std::mt19937_64 rng(2);
    for (const auto& def : dev.regs().layout()) {
        if (def.side_effect || def.size > 8)
            continue;
        const auto before = dev.regs().value(def);
        const std::uint64_t v = rng();
        dev.regs().write(def.space, def.offset, def.size, v);
        const auto mask = dev.regs().effective_mask(def);
        const std::uint64_t width = def.size == 8 ? ~0ull : (1ull << (8 * def.size)) - 1;
        EXPECT_EQ(dev.regs().value(def), ((before & ~mask) | (v & mask)) & width) << def.name;
    }
}

TEST(Device, DvsecChainWalk)
{
    CxlMemDevice dev({});
    std::vector<std::uint16_t> ids;
    std::uint32_t at = reg::kExtCapStart;
    while (at != 0 && ids.size() < 16) {
        const auto hdr = dev.cfg_read(at, 4);
        EXPECT_EQ(hdr & 0xFFFF, reg::kDvsecCapId);
        EXPECT_EQ(dev.cfg_read(at + 4, 4) & 0xFFFF, reg::kCxlDvsecVendor);
        ids.push_back(static_cast<std::uint16_t>(dev.cfg_read(at + 8, 2)));
        at = static_cast<std::uint32_t>(hdr >> 20);
    }
    EXPECT_EQ(ids, (std::vector<std::uint16_t>{0, 5, 7, 3, 8}));
}

TEST(Device, DecoderCommitFeedsAddressMap)
{
    auto map = dram_only_map();
    CxlMemDevice dev({.hdm_decoders = 2}, &map);
    dev.mmio_write(reg::decoder_reg(0, reg::kDecBaseHigh), 4, 1);
    dev.mmio_write(reg::decoder_reg(0, reg::kDecSizeLow), 4, 0x4000'0000);
    dev.mmio_write(reg::decoder_reg(0, reg::kDecControl), 4, reg::kDecCtrlCommit);
    EXPECT_NE(dev.mmio_read(reg::decoder_reg(0, reg::kDecControl), 4) & reg::kDecCtrlCommitted, 0u);
    EXPECT_EQ(map.decode(kWin + 0x40), (HdmTarget{0, 0x40}));
    EXPECT_EQ(dev.decoder_from_regs(0).base, kWin);

    // Base is locked while committed.
    dev.mmio_write(reg::decoder_reg(0, reg::kDecBaseHigh), 4, 7);
    EXPECT_EQ(dev.decoder_from_regs(0).base, kWin);

    // An overlapping second decoder fails with the error bit set.
    dev.mmio_write(reg::decoder_reg(1, reg::kDecBaseHigh), 4, 1);
    dev.mmio_write(reg::decoder_reg(1, reg::kDecSizeLow), 4, 0x1000'0000);
    EXPECT_EQ(code_of([&] { dev.mmio_write(reg::decoder_reg(1, reg::kDecControl), 4, reg::kDecCtrlCommit); }),
              Errc::DecoderOverlap);
    const auto ctrl = dev.mmio_read(reg::decoder_reg(1, reg::kDecControl), 4);
    EXPECT_EQ(ctrl & reg::kDecCtrlCommitted, 0u);
    EXPECT_NE(ctrl & reg::kDecCtrlError, 0u);

    // Uncommit removes the window.
    dev.mmio_write(reg::decoder_reg(0, reg::kDecControl), 4, 0);
    EXPECT_FALSE(map.decode(kWin + 0x40));
}

TEST(Device, RegistersAgreeWithDecodeOnRandomAddresses)
{
    auto map = dram_only_map();
    map.commit_decoder({0, kWin, 512 * MiB, 0, true});
    map.commit_decoder({1, kWin + 1 * GiB, 256 * MiB, 0, true});
    CxlMemDevice dev({.capacity = 1 * GiB, .hdm_decoders = 2}, &map);
    std::mt19937_64 rng(9);
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t addr = kWin + rng() % (2 * GiB);
        const auto got = map.decode(addr);
        std::optional<HdmTarget> want;
        for (unsigned n = 0; n < 2; ++n) {
            const auto d = dev.decoder_from_regs(n);
            if (d.enabled && addr >= d.base && addr < d.base + d.size)
                want = HdmTarget{0, addr - d.base};
        }
        ASSERT_EQ(got, want) << std::hex << addr;
    }
}

TEST(Device, MailboxIdentify)
{
    Engine engine;
    CxlMemDevice dev({.capacity = 1 * GiB, .mailbox_latency = 2'000'000});
    dev.attach(engine);
    const Tick t0 = engine.now();
    auto r = run_mailbox_command(engine, dev, mbox::kIdentify);
    EXPECT_EQ(r.return_code, mbox::kSuccess);
    ASSERT_EQ(r.payload.size(), mbox::kIdentifyBytes);
    const auto info = IdentifyInfo::decode(r.payload);
    EXPECT_EQ(info.total_capacity, 1 * GiB);
    EXPECT_EQ(info.volatile_capacity, 1 * GiB);
    EXPECT_EQ(info.persistent_capacity, 0u);
    EXPECT_EQ(info.fw_revision, "cxlsim 1.0");
    EXPECT_EQ(engine.last_dispatch() - t0, 2'000'000u);
    EXPECT_EQ(dev.mailbox_phase(), MailboxPhase::Idle);
    EXPECT_FALSE(dev.doorbell());

    std::vector<MailboxPhase> seen;
    for (const auto& t : dev.mailbox_transitions())
        seen.push_back(t.to);
    EXPECT_EQ(seen, (std::vector<MailboxPhase>{MailboxPhase::CommandWritten, MailboxPhase::DoorbellSet,
                                               MailboxPhase::Executing, MailboxPhase::Complete,
                                               MailboxPhase::Idle}));
}

TEST(Device, MailboxBusyAndUnsupported)
{
    Engine engine;
    CxlMemDevice dev({});
    dev.attach(engine);
    dev.mailbox_submit(mbox::kIdentify);
    EXPECT_TRUE(dev.doorbell());
    EXPECT_EQ(code_of([&] { dev.mailbox_submit(mbox::kIdentify); }), Errc::MailboxBusy);
    EXPECT_EQ(code_of([&] { dev.mailbox_collect(); }), Errc::MailboxBusy);
    engine.run_until(engine.now() + 10'000'000);
    dev.mailbox_collect();
    EXPECT_EQ(run_mailbox_command(engine, dev, mbox::kGetHealthInfo).return_code, mbox::kUnsupported);
    EXPECT_EQ(dev.commands_completed(), 2u);
}

TEST(Device, MailboxWithoutEngineFails)
{
    CxlMemDevice dev({});
    EXPECT_EQ(code_of([&] { dev.mailbox_submit(mbox::kIdentify); }), Errc::SimulationError);
}

TEST(Device, OnlineZnumaAndFlat)
{
    auto map = dram_only_map();
    map.commit_decoder({0, kWin, 1 * GiB, 0, true});
    CxlMemDevice dev({.capacity = 1 * GiB, .znuma_node = 1}, &map);
    const auto r = dev.online_memory(map, 512 * MiB, NumaMode::Znuma);
    EXPECT_EQ(r.base, kWin);
    EXPECT_EQ(r.numa_node, 1u);
    EXPECT_EQ(map.mode(), NumaMode::Znuma);
    auto topo = map.topology();
    ASSERT_EQ(topo.nodes.size(), 2u);
    EXPECT_FALSE(topo.nodes[1].has_cpus);
    EXPECT_EQ(topo.nodes[1].bytes(), 512 * MiB);

    const auto r2 = dev.online_memory(map, 512 * MiB, NumaMode::Flat);
    EXPECT_EQ(r2.base, kWin + 512 * MiB);
    EXPECT_EQ(r2.numa_node, 0u);
    EXPECT_EQ(dev.state().online_bytes, 1 * GiB);
    EXPECT_EQ(code_of([&] { dev.online_memory(map, 256 * MiB, NumaMode::Flat); }), Errc::ExceedsCapacity);
}

TEST(Device, OnlineErrors)
{
    auto map = dram_only_map();
    CxlMemDevice dev({.capacity = 1 * GiB}, &map);
    EXPECT_EQ(code_of([&] { dev.online_memory(map, 100 * MiB, NumaMode::Znuma); }), Errc::MisalignedSize);
    EXPECT_EQ(code_of([&] { dev.online_memory(map, 2 * GiB, NumaMode::Znuma); }), Errc::ExceedsCapacity);
    EXPECT_EQ(code_of([&] { dev.online_memory(map, 256 * MiB, NumaMode::Znuma); }), Errc::InconsistentTopology);
    EXPECT_EQ(code_of([] { CxlMemDevice bad({.capacity = 100 * MiB}); }), Errc::MisalignedSize);
}
