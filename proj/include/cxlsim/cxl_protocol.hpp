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
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "cxlsim/cxl_flit.hpp"
#include "cxlsim/engine.hpp"
#include "cxlsim/error.hpp"
#include "cxlsim/types.hpp"

namespace cxlsim {

/// Per-hop delays of the CXL.mem path, in ticks. Every field is exposed in
/// the run config so it can be calibrated against hardware.
struct LatencyConfig {
    Tick iobus = 10'000;       // host I/O bus to the Root Complex
    Tick pack = 5'000;         // Root Complex packetization; also paid to de-packetize responses
    Tick link = 15'000;        // CXL link, each direction
    Tick depack = 5'000;       // endpoint de-packetization
    Tick device_ctrl = 10'000; // device memory controller
    Tick media_read = 45'000;
    Tick media_write = 45'000;
    Tick service[4] = {1'000, 2'000, 1'000, 2'000}; // per ChannelKind
    std::size_t max_outstanding = 64;

    Tick service_interval(ChannelKind ch) const { return service[static_cast<int>(ch)]; }
    Tick& service_interval(ChannelKind ch) { return service[static_cast<int>(ch)]; }
};

/// Unloaded load-to-use latency of an LLC miss served by CXL memory, measured
/// from the moment the miss leaves the L2:
///   iobus + pack + svc(M2SReq) + link + depack + device_ctrl + media_read
///         + svc(S2MDRS) + link + pack
/// The response pays the link again and a Root Complex de-packetization
/// equal to pack; the I/O bus is charged once.
constexpr Tick cxl_read_path(const LatencyConfig& l)
{
    return l.iobus + l.pack + l.service[0] + l.link + l.depack + l.device_ctrl + l.media_read + l.service[3] +
           l.link + l.pack;
}

/// Same as cxl_read_path for a MemWr completing with Cmp on S2M NDR.
constexpr Tick cxl_write_path(const LatencyConfig& l)
{
    return l.iobus + l.pack + l.service[1] + l.link + l.depack + l.device_ctrl + l.media_write + l.service[2] +
           l.link + l.pack;
}

/// Sparse, zero-initialized device media addressed by device-local offset.
class DeviceMedia {
public:
    explicit DeviceMedia(std::uint64_t capacity) : capacity_(capacity) {}

    std::uint64_t capacity() const { return capacity_; }
    LineData read_line(std::uint64_t offset) const;
    void write_line(std::uint64_t offset, const LineData& data);
    std::size_t lines_touched() const { return lines_.size(); }

private:
    void check(std::uint64_t offset) const;

    std::uint64_t capacity_;
    std::unordered_map<std::uint64_t, LineData> lines_;
};

enum class TxnKind : std::uint8_t { Read, Write };

struct OutstandingEntry {
    MemRequest origin;
    Tick created_at = 0;
    TxnKind kind = TxnKind::Read;
};

/// Tag-indexed table of in-flight CXL.mem transactions. The lowest free tag is
/// always handed out first, so tag assignment is deterministic.
class OutstandingTable {
public:
    explicit OutstandingTable(std::size_t capacity);

    bool full() const { return live_.size() >= capacity_; }
    std::size_t size() const { return live_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool contains(std::uint16_t tag) const { return live_.contains(tag); }

    /// Throws TagExhausted when the window is full.
    std::uint16_t allocate(const OutstandingEntry& entry);
    /// Throws UnknownTag when the tag is not live.
    OutstandingEntry release(std::uint16_t tag);
    std::uint64_t allocated_total() const { return allocated_total_; }
    std::uint64_t released_total() const { return released_total_; }

private:
    std::size_t capacity_;
    std::set<std::uint16_t> free_;
    std::map<std::uint16_t, OutstandingEntry> live_;
    std::uint64_t allocated_total_ = 0;
    std::uint64_t released_total_ = 0;
};

struct ChannelStats {
    std::uint64_t flits = 0;
    std::uint64_t depth_sum = 0;
    std::uint64_t max_depth = 0;
    Tick queue_delay_sum = 0;

    double mean_depth() const { return flits == 0 ? 0.0 : static_cast<double>(depth_sum) / static_cast<double>(flits); }
};

/// One CXL.mem channel: a FIFO with a fixed per-flit service interval.
/// departure = max(arrival, previous departure) + service_interval.
class CxlChannel {
public:
    CxlChannel(ChannelKind kind, Tick service_interval) : kind_(kind), interval_(service_interval) {}

    /// Enqueues a flit arriving at `arrival` (non-decreasing across calls) and
    /// returns its departure tick. Throws ProtocolViolation on an opcode that
    /// does not belong to this channel.
    Tick enqueue(const CxlFlit& flit, Tick arrival);
    /// Removes and returns every flit whose departure is <= now, in FIFO order.
    std::vector<CxlFlit> service(Tick now);
    /// Pops the head, which must be the flit with `tag` departing at `departure`.
    CxlFlit pop_front(std::uint16_t tag);

    ChannelKind kind() const { return kind_; }
    Tick service_interval() const { return interval_; }
    std::size_t queued() const { return fifo_.size(); }
    const ChannelStats& stats() const { return stats_; }

private:
    struct Slot {
        CxlFlit flit;
        Tick departure;
    };

    ChannelKind kind_;
    Tick interval_;
    Tick last_departure_ = 0;
    Tick last_arrival_ = 0;
    std::deque<Slot> fifo_;
    std::deque<Tick> in_service_;
    ChannelStats stats_;
};

struct Packetized {
    CxlFlit flit;
    Tick enqueue_at = 0;
};

/// Root Complex packetization. Load becomes MemRd on M2S Req, Store becomes
/// MemWr on M2S RwD carrying `data`. Allocates the tag in `table`.
Packetized packetize(const MemRequest& req, std::uint64_t offset, const std::optional<LineData>& data,
                     OutstandingTable& table, const LatencyConfig& lat, Tick now);

struct Served {
    CxlFlit response;
    Tick ready_at = 0;
};

/// Endpoint de-packetization and media access: MemRd returns MemData on S2M
/// DRS, MemWr updates media and returns Cmp on S2M NDR.
Served depacketize_and_serve(const CxlFlit& flit, DeviceMedia& media, const LatencyConfig& lat, Tick now);

struct Finished {
    MemRequest req;
    std::optional<LineData> data;
    Tick latency = 0;
    TxnKind kind = TxnKind::Read;
};

/// Matches a response flit to its outstanding request and retires it.
Finished complete(const CxlFlit& resp, OutstandingTable& table, Tick now);

/// The engine-driven CXL.mem transaction layer for one Type-3 device: the
/// Root Complex port, the four channels, the link and the endpoint.
class CxlPath {
public:
    using CompletionFn = std::function<void(const Finished&)>;

    CxlPath(Engine& engine, std::string name, const LatencyConfig& lat, DeviceMedia& media, bool strict,
            CompletionFn on_complete);
    CxlPath(const CxlPath&) = delete;
    CxlPath& operator=(const CxlPath&) = delete;

    /// Hands a line request to the I/O bus at the engine's current tick. The
    /// request reaches the Root Complex iobus ticks later; when no tag is free
    /// it waits there in arrival order.
    void post(const MemRequest& req, std::uint64_t device_offset, std::optional<LineData> data);

    const CxlChannel& channel(ChannelKind ch) const { return channels_[static_cast<int>(ch)]; }
    const OutstandingTable& outstanding() const { return table_; }
    const LatencyConfig& latency() const { return lat_; }
    std::uint64_t violations() const { return violations_; }
    std::uint64_t backpressured() const { return backpressured_; }
    std::size_t in_flight() const { return inbound_.size() + backlog_.size() + table_.size(); }

private:
    struct Inbound {
        MemRequest req;
        std::uint64_t offset;
        std::optional<LineData> data;
        Tick arrive_at;
    };

    CxlChannel& chan(ChannelKind ch) { return channels_[static_cast<int>(ch)]; }
    void on_rc_arrival();
    void issue(const Inbound& in);
    void on_endpoint(const CxlFlit& flit);
    void on_s2m_enqueue(const CxlFlit& flit);
    void on_rc_response(const CxlFlit& flit);
    void violation(const Error& e);

    Engine& engine_;
    LatencyConfig lat_;
    DeviceMedia& media_;
    bool strict_;
    CompletionFn on_complete_;
    OutstandingTable table_;
    std::vector<CxlChannel> channels_;
    std::deque<Inbound> inbound_;
    std::deque<Inbound> backlog_;
    ComponentId rc_in_, endpoint_, s2m_in_, rc_done_;
    std::uint64_t violations_ = 0;
    std::uint64_t backpressured_ = 0;
};

} // namespace cxlsim
