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
#include "cxlsim/cxl_protocol.hpp"
#include "cxlsim/engine.hpp"
#include "cxlsim/register_layout.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cxlsim {

/// Byte-addressed configuration space and BAR0 backed by a register layout.
/// Host writes only change writable bits; bytes outside any register are
/// reserved and read as zero.
class RegisterFile {
public:
    using WriteHook = std::function<void(const RegisterDef&, std::uint64_t old_value)>;
    using LockPredicate = std::function<bool(const RegisterDef&)>;

    explicit RegisterFile(std::vector<RegisterDef> layout);

    std::uint64_t read(RegSpace space, std::uint32_t offset, unsigned size) const;
    /// Host write. size is 1, 2, 4 or 8 and must not straddle registers of
    /// different widths; side-effect hooks run after the bytes are updated.
    void write(RegSpace space, std::uint32_t offset, unsigned size, std::uint64_t value);
    /// Device-internal write that bypasses the writable mask and hooks.
    void poke(RegSpace space, std::uint32_t offset, unsigned size, std::uint64_t value);

    std::vector<std::uint8_t> read_bytes(RegSpace space, std::uint32_t offset, std::size_t len) const;
    void write_bytes(RegSpace space, std::uint32_t offset, std::span<const std::uint8_t> bytes);

    const RegisterDef* find(std::string_view name) const;
    const RegisterDef& at(std::string_view name) const;
    const std::vector<RegisterDef>& layout() const { return layout_; }

    /// Writable mask currently in force (zero while the register is locked).
    std::uint64_t effective_mask(const RegisterDef& def) const;
    std::uint64_t value(const RegisterDef& def) const { return read(def.space, def.offset, def.size); }

    void reset();
    void set_write_hook(WriteHook hook) { hook_ = std::move(hook); }
    void set_lock_predicate(LockPredicate pred) { locked_ = std::move(pred); }

private:
    struct Space {
        std::vector<std::uint8_t> bytes;
        std::vector<std::uint8_t> mask;
        std::vector<int> owner; // index into layout_ or -1
    };
    Space& space(RegSpace s) { return s == RegSpace::Config ? cfg_ : mmio_; }
    const Space& space(RegSpace s) const { return s == RegSpace::Config ? cfg_ : mmio_; }
    void check_range(RegSpace s, std::uint32_t offset, std::size_t len) const;

    std::vector<RegisterDef> layout_;
    Space cfg_;
    Space mmio_;
    WriteHook hook_;
    LockPredicate locked_;
};

enum class MailboxPhase : std::uint8_t { Idle, CommandWritten, DoorbellSet, Executing, Complete };
std::string_view to_string(MailboxPhase p);

namespace mbox {
inline constexpr std::uint16_t kIdentify = 0x4000;
inline constexpr std::uint16_t kGetPartitionInfo = 0x4100;
inline constexpr std::uint16_t kSetPartitionInfo = 0x4101;
inline constexpr std::uint16_t kGetHealthInfo = 0x4200;
inline constexpr std::uint16_t kGetStatus = 0xC000; // vendor specific

inline constexpr std::uint16_t kSuccess = 0x0000;
inline constexpr std::uint16_t kInvalidInput = 0x0002;
inline constexpr std::uint16_t kUnsupported = 0x0003;

inline constexpr std::size_t kIdentifyBytes = 0x43;
} // namespace mbox

struct MailboxTransition {
    Tick at = 0;
    MailboxPhase from = MailboxPhase::Idle;
    MailboxPhase to = MailboxPhase::Idle;
};

struct MailboxResult {
    std::uint16_t return_code = 0;
    std::vector<std::uint8_t> payload;
};

/// Decoded IDENTIFY output payload.
struct IdentifyInfo {
    std::string fw_revision;
    std::uint64_t total_capacity = 0; // bytes
    std::uint64_t volatile_capacity = 0;
    std::uint64_t persistent_capacity = 0;
    std::uint64_t partition_alignment = 0;
    std::uint32_t lsa_size = 0;

    static IdentifyInfo decode(std::span<const std::uint8_t> payload);
};

struct DeviceConfig {
    unsigned id = 0;
    std::uint64_t capacity = 1ull << 30;
    std::uint16_t vendor_id = 0x8086;
    std::uint16_t device_id = 0x0d93;
    std::uint64_t serial = 0;
    unsigned hdm_decoders = 1;
    Tick mailbox_latency = 2'000'000; // 2 us
    std::string fw_revision = "cxlsim 1.0";
    std::uint64_t bar0_base = 0;
    unsigned znuma_node = 1;
    unsigned host_bridge_uid = 0;
};

struct OnlinedRegion {
    std::uint64_t host_base = 0;
    std::uint64_t size = 0;
    NumaMode mode = NumaMode::Znuma;
    unsigned numa_node = 0;
};

struct DeviceState {
    std::uint64_t capacity = 0;
    std::uint64_t online_bytes = 0;
    std::vector<OnlinedRegion> regions;
};

/// A CXL Type-3 single-logical-device memory expander: register file,
/// mailbox state machine, media and online capacity bookkeeping.
class CxlMemDevice {
public:
    /// Decoders in `map` that target this device are mirrored into the
    /// HDM decoder registers; register commits are pushed back into `map`.
    explicit CxlMemDevice(DeviceConfig cfg, AddressMap* map = nullptr);
    CxlMemDevice(const CxlMemDevice&) = delete;
    CxlMemDevice& operator=(const CxlMemDevice&) = delete;

    const DeviceConfig& config() const { return cfg_; }
    unsigned id() const { return cfg_.id; }
    RegisterFile& regs() { return regs_; }
    const RegisterFile& regs() const { return regs_; }
    DeviceMedia& media() { return media_; }

    std::uint64_t cfg_read(std::uint32_t off, unsigned size) const { return regs_.read(RegSpace::Config, off, size); }
    void cfg_write(std::uint32_t off, unsigned size, std::uint64_t v) { regs_.write(RegSpace::Config, off, size, v); }
    std::uint64_t mmio_read(std::uint32_t off, unsigned size) const { return regs_.read(RegSpace::Mmio, off, size); }
    void mmio_write(std::uint32_t off, unsigned size, std::uint64_t v) { regs_.write(RegSpace::Mmio, off, size, v); }

    /// HDM decoder n as currently programmed in the registers.
    HdmDecoder decoder_from_regs(unsigned n) const;

    /// Registers the mailbox with the engine; the doorbell schedules work on it.
    void attach(Engine& engine);

    MailboxPhase mailbox_phase() const { return phase_; }
    bool doorbell() const;
    /// Writes payload, command and doorbell. Throws MailboxBusy unless Idle.
    void mailbox_submit(std::uint16_t opcode, std::span<const std::uint8_t> payload = {});
    /// Reads the result of a completed command and returns the mailbox to Idle.
    MailboxResult mailbox_collect();
    const std::vector<MailboxTransition>& mailbox_transitions() const { return transitions_; }
    std::uint64_t commands_completed() const { return completed_; }

    /// Onlines `bytes` of capacity behind the device's first enabled decoder.
    /// Throws MisalignedSize or ExceedsCapacity.
    PhysRegion online_memory(AddressMap& map, std::uint64_t bytes, NumaMode mode, unsigned dram_node = 0);
    const DeviceState& state() const { return state_; }
    /// Records CXL regions already present in `map` that decode to this device.
    void adopt_regions(const AddressMap& map);
    /// Forgets onlined capacity (the map must drop the regions separately).
    void offline_all();

private:
    void on_register_write(const RegisterDef& def, std::uint64_t old_value);
    bool register_locked(const RegisterDef& def) const;
    void on_event(const Event& ev);
    void transition(MailboxPhase to);
    void sync_doorbell();
    void execute();
    void mirror_decoders();

    DeviceConfig cfg_;
    AddressMap* map_;
    RegisterFile regs_;
    DeviceMedia media_;
    Engine* engine_ = nullptr;
    ComponentId component_ = 0;
    MailboxPhase phase_ = MailboxPhase::Idle;
    std::vector<MailboxTransition> transitions_;
    std::uint64_t completed_ = 0;
    DeviceState state_;
};

/// Runs one mailbox command to completion on `engine` and collects it.
MailboxResult run_mailbox_command(Engine& engine, CxlMemDevice& dev, std::uint16_t opcode,
                                  std::span<const std::uint8_t> payload = {});

} // namespace cxlsim
