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

#include "cxlsim/register_layout.hpp"

#include "cxlsim/error.hpp"

namespace cxlsim {

std::string_view to_string(RegSpace s)
{
    return s == RegSpace::Config ? "config" : "mmio";
}

std::string_view to_string(RegSet s)
{
    switch (s) {
    case RegSet::Pci: return "pci";
    case RegSet::Set1Port: return "set1";
    case RegSet::Set2Component: return "set2";
    case RegSet::Set3Device: return "set3";
    }
    return "?";
}

unsigned encode_decoder_count(unsigned decoders)
{
    switch (decoders) {
    case 1: return 0;
    case 2: return 1;
    case 4: return 2;
    case 6: return 3;
    case 8: return 4;
    default: throw Error(Errc::InvalidArgument, "unsupported HDM decoder count");
    }
}

namespace {

using namespace reg;

std::uint32_t ext_header(std::uint32_t next)
{
    return kDvsecCapId | (1u << 16) | (next << 20);
}

std::uint32_t dvsec_header1(unsigned rev, unsigned len)
{
    return kCxlDvsecVendor | (rev << 16) | (len << 20);
}

class Builder {
public:
    Builder& cfg(std::string name, std::uint32_t off, std::uint32_t size, std::uint64_t reset,
                 std::uint64_t wmask, RegSet set)
    {
        rows.push_back({std::move(name), RegSpace::Config, off, size, wmask, reset, set, false});
        return *this;
    }
    Builder& mmio(std::string name, std::uint32_t off, std::uint32_t size, std::uint64_t reset,
                  std::uint64_t wmask, RegSet set, bool side_effect = false)
    {
        rows.push_back({std::move(name), RegSpace::Mmio, off, size, wmask, reset, set, side_effect});
        return *this;
    }
    void dvsec(const std::string& prefix, std::uint32_t base, std::uint32_t next, unsigned rev,
               unsigned len, std::uint16_t id, RegSet set)
    {
        cfg(prefix + ".ext_cap_header", base, 4, ext_header(next), 0, set);
        cfg(prefix + ".dvsec_header1", base + 4, 4, dvsec_header1(rev, len), 0, set);
        cfg(prefix + ".dvsec_header2", base + 8, 2, id, 0, set);
    }

    std::vector<RegisterDef> rows;
};

} // namespace

std::vector<RegisterDef> build_register_layout(const RegisterLayoutParams& p)
{
    const unsigned count_enc = encode_decoder_count(p.hdm_decoders);
    Builder b;

    // PCI type-0 header
    b.cfg("pci.vendor_id", kVendorId, 2, p.vendor_id, 0, RegSet::Pci)
        .cfg("pci.device_id", kDeviceId, 2, p.device_id, 0, RegSet::Pci)
        .cfg("pci.command", kCommand, 2, 0, 0x0406, RegSet::Pci)
        .cfg("pci.status", kStatus, 2, 0x0010, 0, RegSet::Pci)
        .cfg("pci.revision_id", kRevisionId, 1, 0x01, 0, RegSet::Pci)
        .cfg("pci.prog_if", kProgIf, 1, 0x10, 0, RegSet::Pci)
        .cfg("pci.subclass", kSubclass, 1, 0x02, 0, RegSet::Pci)
        .cfg("pci.class_code", kClassCode, 1, 0x05, 0, RegSet::Pci)
        .cfg("pci.header_type", kHeaderType, 1, 0x00, 0, RegSet::Pci)
        .cfg("pci.bar0_low", kBar0Low, 4, (p.bar0_base & 0xFFFE0000u) | 0x4, 0xFFFE0000u,
             RegSet::Pci)
        .cfg("pci.bar0_high", kBar0High, 4, p.bar0_base >> 32, 0xFFFFFFFFu, RegSet::Pci)
        .cfg("pci.subsys_vendor_id", kSubsysVendor, 2, p.subsys_vendor, 0, RegSet::Pci)
        .cfg("pci.subsys_id", kSubsysId, 2, p.subsys_id, 0, RegSet::Pci)
        .cfg("pci.cap_ptr", kCapPtr, 1, kPcieCap, 0, RegSet::Pci);

    // PCIe capability: endpoint, 32 GT/s x16
    b.cfg("pcie.cap_header", kPcieCap, 2, 0x0010, 0, RegSet::Pci)
        .cfg("pcie.capabilities", kPcieCap + 0x02, 2, 0x0002, 0, RegSet::Pci)
        .cfg("pcie.device_cap", kPcieCap + 0x04, 4, 0x00008001, 0, RegSet::Pci)
        .cfg("pcie.device_control", kPcieCap + 0x08, 2, 0x2810, 0x7CFF, RegSet::Pci)
        .cfg("pcie.device_status", kPcieCap + 0x0A, 2, 0, 0, RegSet::Pci)
        .cfg("pcie.link_cap", kPcieCap + 0x0C, 4, 0x00000105, 0, RegSet::Pci)
        .cfg("pcie.link_control", kPcieCap + 0x10, 2, 0, 0x0003, RegSet::Pci)
        .cfg("pcie.link_status", kPcieCap + 0x12, 2, 0x0105, 0, RegSet::Pci);

    // CXL device DVSEC (ID 0): mem capable, one HDM range
    const std::uint64_t cap = p.capacity;
    b.dvsec("dvsec_device", kDvsecDevice, kDvsecGpf, 1, 0x38, 0, RegSet::Pci);
    b.cfg("dvsec_device.cxl_capability", kDvsecDevice + 0x0A, 2, 0x0016, 0, RegSet::Pci)
        .cfg("dvsec_device.cxl_control", kDvsecDevice + 0x0C, 2, 0x0002, 0x0004, RegSet::Pci)
        .cfg("dvsec_device.cxl_status", kDvsecDevice + 0x0E, 2, 0, 0, RegSet::Pci)
        .cfg("dvsec_device.cxl_lock", kDvsecDevice + 0x14, 2, 0, 0x0001, RegSet::Pci)
        .cfg("dvsec_device.range1_size_high", kDvsecDevice + 0x18, 4, cap >> 32, 0, RegSet::Pci)
        .cfg("dvsec_device.range1_size_low", kDvsecDevice + 0x1C, 4,
             (cap & 0xF0000000u) | 0x3, 0, RegSet::Pci)
        .cfg("dvsec_device.range1_base_high", kDvsecDevice + 0x20, 4, 0, 0xFFFFFFFFu, RegSet::Pci)
        .cfg("dvsec_device.range1_base_low", kDvsecDevice + 0x24, 4, 0, 0xF0000000u, RegSet::Pci);

    // Set 1: GPF, Flex Bus, port extensions, register locator
    b.dvsec("dvsec_gpf", kDvsecGpf, kDvsecFlexBus, 0, 0x10, 5, RegSet::Set1Port);
    b.cfg("dvsec_gpf.phase2_duration", kDvsecGpf + 0x0A, 2, 0x0003, 0, RegSet::Set1Port)
        .cfg("dvsec_gpf.phase2_power", kDvsecGpf + 0x0C, 4, 0x00000010, 0, RegSet::Set1Port);

    b.dvsec("dvsec_flexbus", kDvsecFlexBus, kDvsecPortExt, 1, 0x20, 7, RegSet::Set1Port);
    b.cfg("dvsec_flexbus.capability", kDvsecFlexBus + 0x0A, 2, 0x0006, 0, RegSet::Set1Port)
        .cfg("dvsec_flexbus.control", kDvsecFlexBus + 0x0C, 2, 0x0006, 0x0006, RegSet::Set1Port)
        .cfg("dvsec_flexbus.status", kDvsecFlexBus + 0x0E, 2, 0x0006, 0, RegSet::Set1Port);

    b.dvsec("dvsec_port_ext", kDvsecPortExt, kDvsecRegLocator, 0, 0x28, 3, RegSet::Set1Port);
    b.cfg("dvsec_port_ext.status", kDvsecPortExt + 0x0A, 2, 0, 0, RegSet::Set1Port)
        .cfg("dvsec_port_ext.control", kDvsecPortExt + 0x0C, 2, 0, 0x0003, RegSet::Set1Port)
        .cfg("dvsec_port_ext.alt_bus_base", kDvsecPortExt + 0x0E, 1, 0, 0xFF, RegSet::Set1Port)
        .cfg("dvsec_port_ext.alt_bus_limit", kDvsecPortExt + 0x0F, 1, 0, 0xFF, RegSet::Set1Port)
        .cfg("dvsec_port_ext.alt_mem_base", kDvsecPortExt + 0x10, 2, 0, 0xFFF0, RegSet::Set1Port)
        .cfg("dvsec_port_ext.alt_mem_limit", kDvsecPortExt + 0x12, 2, 0, 0xFFF0, RegSet::Set1Port);

    b.dvsec("dvsec_reg_locator", kDvsecRegLocator, 0, 0, 0x1C, 8, RegSet::Set1Port);
    b.cfg("dvsec_reg_locator.block1_low", kDvsecRegLocator + 0x0C, 4, 0x00000100, 0,
          RegSet::Set1Port)
        .cfg("dvsec_reg_locator.block1_high", kDvsecRegLocator + 0x10, 4, 0, 0, RegSet::Set1Port)
        .cfg("dvsec_reg_locator.block2_low", kDvsecRegLocator + 0x14, 4,
             (kDeviceRegs & 0xFFFF0000u) | 0x0300, 0, RegSet::Set1Port)
        .cfg("dvsec_reg_locator.block2_high", kDvsecRegLocator + 0x18, 4, 0, 0, RegSet::Set1Port);

    // Set 2: CXL.cache/mem component registers
    b.mmio("comp.cxl_cap_header", kCacheMemBase, 4, 0x04110001, 0, RegSet::Set2Component)
        .mmio("comp.ras_cap_header", kCacheMemBase + 0x04, 4, 0x10020002, 0, RegSet::Set2Component)
        .mmio("comp.sec_cap_header", kCacheMemBase + 0x08, 4, 0x20010003, 0, RegSet::Set2Component)
        .mmio("comp.link_cap_header", kCacheMemBase + 0x0C, 4, 0x30020004, 0,
              RegSet::Set2Component)
        .mmio("comp.hdm_cap_header", kCacheMemBase + 0x10, 4, 0x40010005, 0, RegSet::Set2Component);

    b.mmio("ras.uncorrectable_status", kRasCap + 0x00, 4, 0, 0, RegSet::Set2Component)
        .mmio("ras.uncorrectable_mask", kRasCap + 0x04, 4, 0, 0x0001FFFF, RegSet::Set2Component)
        .mmio("ras.uncorrectable_severity", kRasCap + 0x08, 4, 0x0001FFFF, 0x0001FFFF,
              RegSet::Set2Component)
        .mmio("ras.correctable_status", kRasCap + 0x0C, 4, 0, 0, RegSet::Set2Component)
        .mmio("ras.correctable_mask", kRasCap + 0x10, 4, 0, 0x0000007F, RegSet::Set2Component)
        .mmio("ras.error_cap_control", kRasCap + 0x14, 4, 0, 0, RegSet::Set2Component);

    b.mmio("sec.policy", kSecCap + 0x00, 4, 0, 0x3, RegSet::Set2Component);

    b.mmio("link.capability", kLinkCap + 0x00, 4, 0x00000002, 0, RegSet::Set2Component)
        .mmio("link.control", kLinkCap + 0x08, 4, 0, 0x3, RegSet::Set2Component)
        .mmio("link.rx_credit_control", kLinkCap + 0x10, 4, 0x00400040, 0x03FF03FF,
              RegSet::Set2Component)
        .mmio("link.tx_credit_status", kLinkCap + 0x18, 4, 0x00400040, 0, RegSet::Set2Component);

    b.mmio("hdm.capability", kHdmCap + 0x00, 4, count_enc | (1u << 4), 0, RegSet::Set2Component)
        .mmio("hdm.global_control", kHdmCap + 0x04, 4, 0x2, 0x3, RegSet::Set2Component);
    for (unsigned n = 0; n < p.hdm_decoders; ++n) {
        const std::string pre = "hdm.decoder" + std::to_string(n);
        b.mmio(pre + ".base_low", decoder_reg(n, kDecBaseLow), 4, 0, 0xF0000000u,
               RegSet::Set2Component)
            .mmio(pre + ".base_high", decoder_reg(n, kDecBaseHigh), 4, 0, 0xFFFFFFFFu,
                  RegSet::Set2Component)
            .mmio(pre + ".size_low", decoder_reg(n, kDecSizeLow), 4, 0, 0xF0000000u,
                  RegSet::Set2Component)
            .mmio(pre + ".size_high", decoder_reg(n, kDecSizeHigh), 4, 0, 0xFFFFFFFFu,
                  RegSet::Set2Component)
            .mmio(pre + ".control", decoder_reg(n, kDecControl), 4, kDecCtrlHostOnly,
                  0x000003FFu, RegSet::Set2Component, true)
            .mmio(pre + ".dpa_skip_low", decoder_reg(n, 0x14), 4, 0, 0xF0000000u,
                  RegSet::Set2Component)
            .mmio(pre + ".dpa_skip_high", decoder_reg(n, 0x18), 4, 0, 0xFFFFFFFFu,
                  RegSet::Set2Component);
    }

    // Set 3: device capability array, status, mailbox
    b.mmio("dev.cap_array", kDeviceRegs + 0x00, 8, 0x0000000300010000ull, 0, RegSet::Set3Device)
        .mmio("dev.cap1_header", kDeviceRegs + 0x10, 4, 0x00010001, 0, RegSet::Set3Device)
        .mmio("dev.cap1_offset", kDeviceRegs + 0x14, 4, 0x100, 0, RegSet::Set3Device)
        .mmio("dev.cap1_length", kDeviceRegs + 0x18, 4, 0x8, 0, RegSet::Set3Device)
        .mmio("dev.cap2_header", kDeviceRegs + 0x20, 4, 0x00010002, 0, RegSet::Set3Device)
        .mmio("dev.cap2_offset", kDeviceRegs + 0x24, 4, 0x200, 0, RegSet::Set3Device)
        .mmio("dev.cap2_length", kDeviceRegs + 0x28, 4, 0x20 + kMboxPayloadBytes, 0,
              RegSet::Set3Device)
        .mmio("dev.cap3_header", kDeviceRegs + 0x30, 4, 0x00014000, 0, RegSet::Set3Device)
        .mmio("dev.cap3_offset", kDeviceRegs + 0x34, 4, 0x500, 0, RegSet::Set3Device)
        .mmio("dev.cap3_length", kDeviceRegs + 0x38, 4, 0x8, 0, RegSet::Set3Device)
        .mmio("dev.event_status", kDevStatus, 8, 0, 0, RegSet::Set3Device);

    b.mmio("mbox.capabilities", kMboxCaps, 4, 9, 0, RegSet::Set3Device)
        .mmio("mbox.control", kMboxControl, 4, 0, kMboxDoorbell, RegSet::Set3Device, true)
        .mmio("mbox.command", kMboxCommand, 8, 0, 0x0000001FFFFFFFFFull, RegSet::Set3Device, true)
        .mmio("mbox.status", kMboxStatus, 8, 0, 0, RegSet::Set3Device)
        .mmio("mbox.bg_status", kMboxBgStatus, 8, 0, 0, RegSet::Set3Device)
        .mmio("mbox.payload", kMboxPayload, kMboxPayloadBytes, 0, ~0ull, RegSet::Set3Device);

    b.mmio("memdev.status", kMemdevStatus, 8, 0x14, 0, RegSet::Set3Device);
    return b.rows;
}

} // namespace cxlsim
