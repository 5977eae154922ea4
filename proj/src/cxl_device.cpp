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

#include <fmt/format.h>

#include <algorithm>
#include <cstring>
#include <set>

namespace cxlsim {

// ---------------------------------------------------------------- RegisterFile

RegisterFile::RegisterFile(std::vector<RegisterDef> layout) : layout_(std::move(layout))
{
    cfg_.bytes.assign(reg::kConfigSpaceBytes, 0);
    cfg_.mask.assign(reg::kConfigSpaceBytes, 0);
    cfg_.owner.assign(reg::kConfigSpaceBytes, -1);
    mmio_.bytes.assign(reg::kBar0Bytes, 0);
    mmio_.mask.assign(reg::kBar0Bytes, 0);
    mmio_.owner.assign(reg::kBar0Bytes, -1);

    for (std::size_t i = 0; i < layout_.size(); ++i) {
        const auto& d = layout_[i];
        Space& s = space(d.space);
        if (d.size == 0 || d.offset + std::size_t{d.size} > s.bytes.size())
            throw Error(Errc::InvalidArgument, fmt::format("register {} lies outside its space", d.name));
        for (std::uint32_t b = 0; b < d.size; ++b) {
            if (s.owner[d.offset + b] != -1)
                throw Error(Errc::InvalidArgument,
                            fmt::format("register {} overlaps {}", d.name, layout_[s.owner[d.offset + b]].name));
            s.owner[d.offset + b] = static_cast<int>(i);
            s.mask[d.offset + b] = d.size > 8 ? 0xFF : static_cast<std::uint8_t>(d.writable_mask >> (8 * b));
        }
    }
    reset();
}

void RegisterFile::reset()
{
    std::fill(cfg_.bytes.begin(), cfg_.bytes.end(), 0);
    std::fill(mmio_.bytes.begin(), mmio_.bytes.end(), 0);
    for (const auto& d : layout_)
        if (d.size <= 8)
            poke(d.space, d.offset, d.size, d.reset);
}

void RegisterFile::check_range(RegSpace s, std::uint32_t offset, std::size_t len) const
{
    if (offset + len > space(s).bytes.size())
        throw Error(Errc::OutOfRange,
                    fmt::format("{} access [{:#x}, +{}) is outside the space", to_string(s), offset, len));
}

namespace {
void check_access(RegSpace s, std::uint32_t offset, unsigned size)
{
    const bool ok = size == 1 || size == 2 || size == 4 || (size == 8 && s == RegSpace::Mmio);
    if (!ok)
        throw Error(Errc::InvalidArgument, fmt::format("{} access width {} is not supported", to_string(s), size));
    if (offset % size != 0)
        throw Error(Errc::Misaligned, fmt::format("{} access at {:#x} is not {}-byte aligned", to_string(s), offset, size));
}
} // namespace

std::uint64_t RegisterFile::read(RegSpace s, std::uint32_t offset, unsigned size) const
{
    check_range(s, offset, size);
    check_access(s, offset, size);
    const Space& sp = space(s);
    std::uint64_t v = 0;
    for (unsigned b = 0; b < size; ++b)
        v |= std::uint64_t{sp.bytes[offset + b]} << (8 * b);
    return v;
}

void RegisterFile::poke(RegSpace s, std::uint32_t offset, unsigned size, std::uint64_t value)
{
    check_range(s, offset, size);
    if (size == 0 || size > 8)
        throw Error(Errc::InvalidArgument, "poke width must be 1..8 bytes");
    Space& sp = space(s);
    for (unsigned b = 0; b < size; ++b)
        sp.bytes[offset + b] = static_cast<std::uint8_t>(value >> (8 * b));
}

std::uint64_t RegisterFile::effective_mask(const RegisterDef& def) const
{
    if (locked_ && locked_(def))
        return 0;
    return def.size > 8 ? ~0ull : def.writable_mask;
}

void RegisterFile::write(RegSpace s, std::uint32_t offset, unsigned size, std::uint64_t value)
{
    check_range(s, offset, size);
    check_access(s, offset, size);
    Space& sp = space(s);

    struct Touched {
        int owner;
        std::uint64_t old_value;
    };
    std::vector<Touched> touched;
    for (unsigned b = 0; b < size; ++b) {
        const int o = sp.owner[offset + b];
        if (o < 0)
            continue;
        if (std::none_of(touched.begin(), touched.end(), [&](const Touched& t) { return t.owner == o; })) {
            const auto& d = layout_[o];
            touched.push_back({o, d.size <= 8 ? read(s, d.offset, d.size) : 0});
        }
    }

    for (unsigned b = 0; b < size; ++b) {
        const int o = sp.owner[offset + b];
        if (o < 0)
            continue;
        const auto& d = layout_[o];
        std::uint8_t m = sp.mask[offset + b];
        if (locked_ && locked_(d))
            m = 0;
        const auto nb = static_cast<std::uint8_t>(value >> (8 * b));
        sp.bytes[offset + b] = static_cast<std::uint8_t>((sp.bytes[offset + b] & ~m) | (nb & m));
    }

    if (hook_)
        for (const auto& t : touched)
            if (layout_[t.owner].side_effect)
                hook_(layout_[t.owner], t.old_value);
}

std::vector<std::uint8_t> RegisterFile::read_bytes(RegSpace s, std::uint32_t offset, std::size_t len) const
{
    check_range(s, offset, len);
    const auto& b = space(s).bytes;
    return {b.begin() + offset, b.begin() + offset + static_cast<std::ptrdiff_t>(len)};
}

void RegisterFile::write_bytes(RegSpace s, std::uint32_t offset, std::span<const std::uint8_t> bytes)
{
    for (std::size_t i = 0; i < bytes.size(); ++i)
        write(s, offset + static_cast<std::uint32_t>(i), 1, bytes[i]);
}

const RegisterDef* RegisterFile::find(std::string_view name) const
{
    for (const auto& d : layout_)
        if (d.name == name)
            return &d;
    return nullptr;
}

const RegisterDef& RegisterFile::at(std::string_view name) const
{
    const auto* d = find(name);
    if (d == nullptr)
        throw Error(Errc::InvalidArgument, fmt::format("no register named {}", name));
    return *d;
}

// ---------------------------------------------------------------- Mailbox

std::string_view to_string(MailboxPhase p)
{
    switch (p) {
    case MailboxPhase::Idle: return "Idle";
    case MailboxPhase::CommandWritten: return "CommandWritten";
    case MailboxPhase::DoorbellSet: return "DoorbellSet";
    case MailboxPhase::Executing: return "Executing";
    case MailboxPhase::Complete: return "Complete";
    }
    return "?";
}

namespace {

void put_le(std::vector<std::uint8_t>& out, std::size_t at, std::uint64_t v, unsigned bytes)
{
    for (unsigned i = 0; i < bytes; ++i)
        out[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t at, unsigned bytes)
{
    std::uint64_t v = 0;
    for (unsigned i = 0; i < bytes; ++i)
        v |= std::uint64_t{in[at + i]} << (8 * i);
    return v;
}

bool legal(MailboxPhase from, MailboxPhase to)
{
    using P = MailboxPhase;
    switch (from) {
    case P::Idle: return to == P::CommandWritten;
    case P::CommandWritten: return to == P::DoorbellSet;
    case P::DoorbellSet: return to == P::Executing;
    case P::Executing: return to == P::Complete;
    case P::Complete: return to == P::Idle;
    }
    return false;
}

} // namespace

IdentifyInfo IdentifyInfo::decode(std::span<const std::uint8_t> p)
{
    if (p.size() < mbox::kIdentifyBytes)
        throw Error(Errc::TruncatedTable, "IDENTIFY payload is shorter than 0x43 bytes");
    IdentifyInfo info;
    info.fw_revision.assign(reinterpret_cast<const char*>(p.data()), 16);
    info.fw_revision.erase(std::find(info.fw_revision.begin(), info.fw_revision.end(), '\0'), info.fw_revision.end());
    info.total_capacity = get_le(p, 0x10, 8) * kHdmGranularity;
    info.volatile_capacity = get_le(p, 0x18, 8) * kHdmGranularity;
    info.persistent_capacity = get_le(p, 0x20, 8) * kHdmGranularity;
    info.partition_alignment = get_le(p, 0x28, 8) * kHdmGranularity;
    info.lsa_size = static_cast<std::uint32_t>(get_le(p, 0x38, 4));
    return info;
}

// ---------------------------------------------------------------- CxlMemDevice

namespace {
RegisterLayoutParams layout_params(const DeviceConfig& c)
{
    RegisterLayoutParams p;
    p.vendor_id = c.vendor_id;
    p.device_id = c.device_id;
    p.capacity = c.capacity;
    p.bar0_base = c.bar0_base;
    p.hdm_decoders = c.hdm_decoders;
    return p;
}

bool is_decoder_reg(const RegisterDef& d, unsigned& index, std::uint32_t& field)
{
    if (d.space != RegSpace::Mmio || d.offset < reg::kHdmDecoder0 ||
        d.offset >= reg::kHdmDecoder0 + 8 * reg::kHdmDecoderStride)
        return false;
    index = (d.offset - reg::kHdmDecoder0) / reg::kHdmDecoderStride;
    field = (d.offset - reg::kHdmDecoder0) % reg::kHdmDecoderStride;
    return true;
}
} // namespace

CxlMemDevice::CxlMemDevice(DeviceConfig cfg, AddressMap* map)
    : cfg_(std::move(cfg)), map_(map), regs_(build_register_layout(layout_params(cfg_))),
      media_(cfg_.capacity)
{
    if (cfg_.capacity == 0 || cfg_.capacity % kHdmGranularity != 0)
        throw Error(Errc::MisalignedSize, fmt::format("device {} capacity must be a non-zero multiple of 256 MiB",
                                                      cfg_.id));
    state_.capacity = cfg_.capacity;
    regs_.set_write_hook([this](const RegisterDef& d, std::uint64_t old) { on_register_write(d, old); });
    regs_.set_lock_predicate([this](const RegisterDef& d) { return register_locked(d); });
    mirror_decoders();
}

void CxlMemDevice::mirror_decoders()
{
    if (map_ == nullptr)
        return;
    for (unsigned n = 0; n < cfg_.hdm_decoders; ++n) {
        const auto* d = map_->find_decoder(cfg_.id, n);
        if (d == nullptr)
            continue;
        regs_.poke(RegSpace::Mmio, reg::decoder_reg(n, reg::kDecBaseLow), 4, d->base & 0xF0000000u);
        regs_.poke(RegSpace::Mmio, reg::decoder_reg(n, reg::kDecBaseHigh), 4, d->base >> 32);
        regs_.poke(RegSpace::Mmio, reg::decoder_reg(n, reg::kDecSizeLow), 4, d->size & 0xF0000000u);
        regs_.poke(RegSpace::Mmio, reg::decoder_reg(n, reg::kDecSizeHigh), 4, d->size >> 32);
        std::uint64_t ctrl = reg::kDecCtrlHostOnly;
        if (d->enabled)
            ctrl |= reg::kDecCtrlCommit | reg::kDecCtrlCommitted;
        regs_.poke(RegSpace::Mmio, reg::decoder_reg(n, reg::kDecControl), 4, ctrl);
    }
}

HdmDecoder CxlMemDevice::decoder_from_regs(unsigned n) const
{
    if (n >= cfg_.hdm_decoders)
        throw Error(Errc::OutOfRange, fmt::format("device {} has {} HDM decoders", cfg_.id, cfg_.hdm_decoders));
    auto r = [&](std::uint32_t f) { return regs_.read(RegSpace::Mmio, reg::decoder_reg(n, f), 4); };
    HdmDecoder d;
    d.index = n;
    d.target_device = cfg_.id;
    d.base = (r(reg::kDecBaseHigh) << 32) | (r(reg::kDecBaseLow) & 0xF0000000u);
    d.size = (r(reg::kDecSizeHigh) << 32) | (r(reg::kDecSizeLow) & 0xF0000000u);
    d.enabled = (r(reg::kDecControl) & reg::kDecCtrlCommitted) != 0;
    return d;
}

bool CxlMemDevice::register_locked(const RegisterDef& def) const
{
    unsigned n = 0;
    std::uint32_t field = 0;
    if (!is_decoder_reg(def, n, field) || field == reg::kDecControl)
        return false;
    // A committed decoder's window is frozen until it is uncommitted.
    return (regs_.read(RegSpace::Mmio, reg::decoder_reg(n, reg::kDecControl), 4) & reg::kDecCtrlCommitted) != 0;
}

void CxlMemDevice::on_register_write(const RegisterDef& def, std::uint64_t old)
{
    unsigned n = 0;
    std::uint32_t field = 0;
    if (is_decoder_reg(def, n, field) && field == reg::kDecControl) {
        const std::uint64_t now = regs_.value(def);
        const bool commit = (now & reg::kDecCtrlCommit) != 0;
        const bool committed = (old & reg::kDecCtrlCommitted) != 0;
        if (commit && !committed) {
            HdmDecoder d = decoder_from_regs(n);
            d.enabled = true;
            try {
                if (map_ != nullptr)
                    map_->commit_decoder(d);
            } catch (const Error&) {
                regs_.poke(def.space, def.offset, 4,
                           (now & ~std::uint64_t{reg::kDecCtrlCommit | reg::kDecCtrlCommitted}) | reg::kDecCtrlError);
                throw;
            }
            regs_.poke(def.space, def.offset, 4, (now | reg::kDecCtrlCommitted) & ~std::uint64_t{reg::kDecCtrlError});
        } else if (!commit && committed) {
            if (map_ != nullptr)
                map_->disable_decoder(cfg_.id, n);
            regs_.poke(def.space, def.offset, 4, now & ~std::uint64_t{reg::kDecCtrlCommitted});
        }
        return;
    }
    if (def.offset == reg::kMboxCommand) {
        if (phase_ == MailboxPhase::Idle)
            transition(MailboxPhase::CommandWritten);
        else if (phase_ != MailboxPhase::CommandWritten)
            regs_.poke(def.space, def.offset, 8, old); // ignored while a command is in flight
        return;
    }
    if (def.offset == reg::kMboxControl) {
        const bool ring = (regs_.value(def) & reg::kMboxDoorbell) != 0;
        if (ring && phase_ == MailboxPhase::CommandWritten) {
            if (engine_ == nullptr)
                throw Error(Errc::SimulationError, fmt::format("device {} mailbox is not attached to an engine", cfg_.id));
            transition(MailboxPhase::DoorbellSet);
            engine_->schedule(engine_->now(), component_, MailboxCommand{cfg_.id, MailboxStep::Pickup});
        }
        sync_doorbell();
    }
}

void CxlMemDevice::attach(Engine& engine)
{
    engine_ = &engine;
    component_ = engine.add_component(fmt::format("dev{}.mailbox", cfg_.id), [this](const Event& ev) { on_event(ev); });
}

void CxlMemDevice::on_event(const Event& ev)
{
    const auto* cmd = std::get_if<MailboxCommand>(&ev.payload);
    if (cmd == nullptr)
        throw Error(Errc::SimulationError, "mailbox received a non-mailbox event");
    if (cmd->step == MailboxStep::Pickup) {
        transition(MailboxPhase::Executing);
        engine_->schedule(ev.fire_at + cfg_.mailbox_latency, component_, MailboxCommand{cfg_.id, MailboxStep::Finish});
    } else {
        execute();
        transition(MailboxPhase::Complete);
        sync_doorbell();
    }
}

void CxlMemDevice::transition(MailboxPhase to)
{
    if (!legal(phase_, to))
        throw Error(Errc::SimulationError,
                    fmt::format("illegal mailbox transition {} -> {}", to_string(phase_), to_string(to)));
    transitions_.push_back({engine_ != nullptr ? engine_->now() : 0, phase_, to});
    phase_ = to;
}

bool CxlMemDevice::doorbell() const
{
    return (regs_.read(RegSpace::Mmio, reg::kMboxControl, 4) & reg::kMboxDoorbell) != 0;
}

void CxlMemDevice::sync_doorbell()
{
    const bool busy = phase_ == MailboxPhase::DoorbellSet || phase_ == MailboxPhase::Executing;
    auto ctrl = regs_.read(RegSpace::Mmio, reg::kMboxControl, 4) & ~std::uint64_t{reg::kMboxDoorbell};
    regs_.poke(RegSpace::Mmio, reg::kMboxControl, 4, ctrl | (busy ? reg::kMboxDoorbell : 0));
}

void CxlMemDevice::execute()
{
    const std::uint64_t command = regs_.read(RegSpace::Mmio, reg::kMboxCommand, 8);
    const auto opcode = static_cast<std::uint16_t>(command & 0xFFFF);
    const std::size_t in_len = std::min<std::uint64_t>((command >> 16) & 0x1FFFFF, reg::kMboxPayloadBytes);
    const auto in = regs_.read_bytes(RegSpace::Mmio, reg::kMboxPayload, in_len);

    std::uint16_t rc = mbox::kSuccess;
    std::vector<std::uint8_t> out;
    switch (opcode) {
    case mbox::kIdentify: {
        out.assign(mbox::kIdentifyBytes, 0);
        const auto n = std::min<std::size_t>(cfg_.fw_revision.size(), 16);
        std::memcpy(out.data(), cfg_.fw_revision.data(), n);
        put_le(out, 0x10, cfg_.capacity / kHdmGranularity, 8);
        put_le(out, 0x18, cfg_.capacity / kHdmGranularity, 8);
        put_le(out, 0x20, 0, 8);
        put_le(out, 0x28, 0, 8);
        put_le(out, 0x30, 32, 2); // informational event log
        put_le(out, 0x32, 32, 2);
        put_le(out, 0x34, 32, 2);
        put_le(out, 0x36, 32, 2);
        put_le(out, 0x38, 0, 4);
        break;
    }
    case mbox::kSetPartitionInfo: {
        // A single-logical volatile device has nothing to repartition.
        if (in.size() < 9 || get_le(in, 0, 8) * kHdmGranularity > cfg_.capacity)
            rc = mbox::kInvalidInput;
        break;
    }
    case mbox::kGetStatus: {
        out.assign(32, 0);
        put_le(out, 0, regs_.read(RegSpace::Mmio, reg::kMemdevStatus, 8), 8);
        put_le(out, 8, state_.online_bytes, 8);
        put_le(out, 16, cfg_.capacity, 8);
        put_le(out, 24, completed_, 8);
        break;
    }
    default:
        rc = mbox::kUnsupported;
        break;
    }

    for (std::size_t i = 0; i < out.size(); ++i)
        regs_.poke(RegSpace::Mmio, reg::kMboxPayload + static_cast<std::uint32_t>(i), 1, out[i]);
    regs_.poke(RegSpace::Mmio, reg::kMboxCommand, 8, opcode | (std::uint64_t{out.size()} << 16));
    regs_.poke(RegSpace::Mmio, reg::kMboxStatus, 8, std::uint64_t{rc} << 32);
    ++completed_;
}

void CxlMemDevice::mailbox_submit(std::uint16_t opcode, std::span<const std::uint8_t> payload)
{
    if (phase_ != MailboxPhase::Idle)
        throw Error(Errc::MailboxBusy, fmt::format("device {} mailbox is {}", cfg_.id, to_string(phase_)));
    if (payload.size() > reg::kMboxPayloadBytes)
        throw Error(Errc::InvalidArgument, "mailbox payload exceeds 512 bytes");
    regs_.write_bytes(RegSpace::Mmio, reg::kMboxPayload, payload);
    mmio_write(reg::kMboxCommand, 8, opcode | (std::uint64_t{payload.size()} << 16));
    mmio_write(reg::kMboxControl, 4, reg::kMboxDoorbell);
}

MailboxResult CxlMemDevice::mailbox_collect()
{
    if (phase_ != MailboxPhase::Complete)
        throw Error(Errc::MailboxBusy, fmt::format("device {} mailbox is {}, not Complete", cfg_.id, to_string(phase_)));
    MailboxResult r;
    r.return_code = static_cast<std::uint16_t>(mmio_read(reg::kMboxStatus, 8) >> 32);
    const std::size_t len = std::min<std::uint64_t>((mmio_read(reg::kMboxCommand, 8) >> 16) & 0x1FFFFF,
                                                    reg::kMboxPayloadBytes);
    r.payload = regs_.read_bytes(RegSpace::Mmio, reg::kMboxPayload, len);
    transition(MailboxPhase::Idle);
    return r;
}

PhysRegion CxlMemDevice::online_memory(AddressMap& map, std::uint64_t bytes, NumaMode mode, unsigned dram_node)
{
    if (bytes == 0 || bytes % kHdmGranularity != 0)
        throw Error(Errc::MisalignedSize, fmt::format("online size {:#x} is not a non-zero multiple of 256 MiB", bytes));
    if (bytes > cfg_.capacity - state_.online_bytes)
        throw Error(Errc::ExceedsCapacity, fmt::format("device {} has {:#x} bytes left, {:#x} requested", cfg_.id,
                                                       cfg_.capacity - state_.online_bytes, bytes));
    const HdmDecoder* window = nullptr;
    for (const auto& d : map.decoders())
        if (d.enabled && d.target_device == cfg_.id && (window == nullptr || d.index < window->index))
            window = &d;
    if (window == nullptr)
        throw Error(Errc::InconsistentTopology, fmt::format("device {} has no committed HDM decoder", cfg_.id));
    if (bytes > window->size - std::min(window->size, state_.online_bytes))
        throw Error(Errc::ExceedsCapacity,
                    fmt::format("device {} decoder window of {:#x} bytes cannot hold {:#x} more", cfg_.id,
                                window->size, bytes));

    PhysRegion region;
    region.name = fmt::format("cxl{}.{}", cfg_.id, state_.regions.size());
    region.base = window->base + state_.online_bytes;
    region.size = bytes;
    region.kind = RegionKind::CxlWindow;
    region.numa_node = mode == NumaMode::Znuma ? cfg_.znuma_node : dram_node;
    map.add_region(region);

    bool any_cpuless = false;
    for (const auto& r : map.regions())
        if (r.kind == RegionKind::CxlWindow && r.numa_node && !map.cpu_nodes().contains(*r.numa_node))
            any_cpuless = true;
    map.set_mode(any_cpuless ? NumaMode::Znuma : NumaMode::Flat);

    state_.regions.push_back({region.base, bytes, mode, *region.numa_node});
    state_.online_bytes += bytes;
    return region;
}

void CxlMemDevice::adopt_regions(const AddressMap& map)
{
    std::set<unsigned> dram;
    for (const auto& r : map.regions())
        if (r.kind == RegionKind::SystemDram && r.numa_node)
            dram.insert(*r.numa_node);
    for (const auto& r : map.regions()) {
        if (r.kind != RegionKind::CxlWindow || !r.numa_node)
            continue;
        const auto t = map.decode(r.base);
        if (!t || t->device != cfg_.id)
            continue;
        if (t->offset + r.size > cfg_.capacity || state_.online_bytes + r.size > cfg_.capacity)
            throw Error(Errc::ExceedsCapacity,
                        fmt::format("region '{}' does not fit in device {} capacity {:#x}", r.name, cfg_.id, cfg_.capacity));
        const NumaMode mode = dram.contains(*r.numa_node) ? NumaMode::Flat : NumaMode::Znuma;
        state_.regions.push_back({r.base, r.size, mode, *r.numa_node});
        state_.online_bytes += r.size;
    }
}

void CxlMemDevice::offline_all()
{
    state_.online_bytes = 0;
    state_.regions.clear();
}

MailboxResult run_mailbox_command(Engine& engine, CxlMemDevice& dev, std::uint16_t opcode,
                                  std::span<const std::uint8_t> payload)
{
    dev.mailbox_submit(opcode, payload);
    while (dev.mailbox_phase() != MailboxPhase::Complete) {
        if (engine.empty())
            throw Error(Errc::SimulationError, "mailbox command never completed");
        engine.run_until(engine.now() + 1'000'000'000);
    }
    return dev.mailbox_collect();
}

} // namespace cxlsim
