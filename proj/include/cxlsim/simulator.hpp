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
#include "cxlsim/cache.hpp"
#include "cxlsim/config.hpp"
#include "cxlsim/cxl_device.hpp"
#include "cxlsim/cxl_protocol.hpp"
#include "cxlsim/engine.hpp"
#include "cxlsim/workloads.hpp"

#include <iosfwd>
#include <memory>
#include <unordered_map>
#include <vector>

namespace cxlsim {

struct PoolCounters {
    std::uint64_t reads = 0;  // line fills
    std::uint64_t writes = 0; // line writebacks
    std::uint64_t bytes = 0;
    std::vector<Tick> fill_latencies; // fill completion minus the original request's issue time
};

/// Cumulative counters captured at each workload pass boundary.
struct PassRecord {
    std::uint64_t pass = 0;
    Tick at = 0;
    std::uint64_t core_accesses = 0;
    std::uint64_t l1_misses = 0;
    std::uint64_t l2_accesses = 0;
    std::uint64_t l2_misses = 0;
    std::uint64_t pool_bytes[2] = {0, 0};
    std::uint64_t workload_bytes = 0;
};

struct SimOptions {
    std::ostream* dispatch_log = nullptr;
};

struct RunOutcome {
    bool completed = false;
    Tick elapsed = 0;
    std::uint64_t retired = 0;
};

std::unique_ptr<Workload> make_workload(const RunConfig& cfg);

/// One simulated machine: cores, the cache hierarchy, a home agent that
/// routes LLC traffic to DRAM over the memory bus or to CXL devices over the
/// I/O bus, and the CXL devices themselves.
class Simulator final : public WorkloadHost, private MemoryPort {
public:
    explicit Simulator(const RunConfig& cfg, std::unique_ptr<Workload> workload = nullptr, SimOptions opts = {});
    ~Simulator() override;
    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    /// Binds the workload (if not yet bound) and runs until it retires every
    /// request. Throws SimulationError on max_ticks or a stall.
    RunOutcome run();

    const RunConfig& config() const { return cfg_; }
    Engine& engine() { return engine_; }
    const Engine& engine() const { return engine_; }
    const AddressMap& map() const { return map_; }
    CacheHierarchy& caches() { return *caches_; }
    const CacheHierarchy& caches() const { return *caches_; }
    Workload& workload() { return *workload_; }
    const Workload& workload() const { return *workload_; }
    std::size_t device_count() const { return devices_.size(); }
    CxlMemDevice& device(std::size_t i) { return *devices_.at(i); }
    const CxlMemDevice& device(std::size_t i) const { return *devices_.at(i); }
    const CxlPath& path(std::size_t i) const { return *paths_.at(i); }

    const PoolCounters& pool(Pool p) const { return pools_[static_cast<int>(p)]; }
    const std::vector<Tick>& retired_latencies() const { return retired_latencies_; }
    std::uint64_t retired() const { return retired_latencies_.size(); }
    std::uint64_t issued() const { return issued_; }
    const std::vector<PassRecord>& passes() const { return passes_; }
    Tick elapsed() const { return engine_.last_dispatch(); }
    /// Requests issued but not retired, plus outstanding memory-side work.
    std::size_t in_flight() const;

    // WorkloadHost
    AddressMap& address_map() override { return map_; }
    unsigned cores() const override { return cfg_.cpu.cores; }
    std::uint64_t l2_bytes() const override { return cfg_.caches.l2.size_bytes; }
    void backdoor_write(std::uint64_t paddr, std::uint64_t value) override;
    std::uint64_t coherent_read(std::uint64_t paddr) const override;
    /// The coherent 64-byte image of a line.
    LineData coherent_line(std::uint64_t line_addr) const;

    /// Binds the workload and primes the cores without running; tests may
    /// then step the engine themselves.
    void start();

private:
    enum class HomeOpKind : std::uint8_t { RouteFill, RouteWriteback, DramFillDone, DramWritebackDone };
    struct HomeOp {
        HomeOpKind kind;
        MemRequest req;
        LineData data;
    };
    struct CoreState {
        ComponentId id = 0;
        unsigned in_flight = 0;
        Tick next_issue = 0;
        bool wake_pending = false;
        Tick wake_at = 0;
    };

    // MemoryPort
    void fill_request(const MemRequest& line_req, Tick at) override;
    void writeback(const MemRequest& line_req, const LineData& data, Tick at) override;

    void schedule_home(Tick at, HomeOpKind kind, const MemRequest& req, const LineData& data);
    void on_home(const Event& ev);
    void route_fill(const MemRequest& req);
    void route_writeback(const MemRequest& req, const LineData& data);
    void deliver_fill(Pool pool, const MemRequest& req, const LineData& data);
    void writeback_done(Pool pool, std::uint64_t line);
    void on_cxl_done(const Finished& f);
    void schedule_completions(const std::vector<Completion>& done);

    void on_core(unsigned core, const Event& ev);
    void try_issue(unsigned core);
    void wake_all();
    void record_pass(std::uint64_t pass);

    std::size_t device_index(unsigned device_id) const;
    LineData backing_line(std::uint64_t line_addr) const;

    RunConfig cfg_;
    SimOptions opts_;
    Engine engine_;
    AddressMap map_;
    std::unique_ptr<CacheHierarchy> caches_;
    std::vector<std::unique_ptr<CxlMemDevice>> devices_;
    std::vector<std::unique_ptr<CxlPath>> paths_;
    std::unique_ptr<Workload> workload_;
    std::unordered_map<std::uint64_t, LineData> dram_;
    std::vector<CoreState> cores_;
    unsigned window_ = 1;
    ComponentId home_ = 0;
    std::uint64_t next_cookie_ = 1;
    std::unordered_map<std::uint64_t, HomeOp> home_ops_;
    std::unordered_map<std::uint64_t, LineData> writebacks_in_flight_;
    std::unordered_map<std::uint64_t, std::vector<MemRequest>> deferred_fills_;
    PoolCounters pools_[2];
    std::vector<Tick> retired_latencies_;
    std::vector<PassRecord> passes_;
    std::uint64_t next_req_id_ = 1;
    std::uint64_t issued_ = 0;
    bool started_ = false;
};

} // namespace cxlsim
