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
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cxlsim/types.hpp"

namespace cxlsim {

enum class Mesi : std::uint8_t { I, S, E, M };

std::string_view to_string(Mesi s);

struct CacheGeometry {
    std::uint64_t size_bytes = 32 * KiB;
    std::uint64_t line_bytes = kLineBytes;
    unsigned assoc = 8;
    Tick hit_latency = 1000;

    std::uint64_t lines() const { return size_bytes / line_bytes; }
    std::uint64_t sets() const { return size_bytes / (line_bytes * assoc); }
    std::vector<std::string> violations(std::string_view name) const;
};

struct HierarchyConfig {
    CacheGeometry l1;
    CacheGeometry l2{1 * MiB, kLineBytes, 16, 5000};
    Tick coherence_latency = 3000;
    unsigned cores = 1;
};

enum class CacheOutcome : std::uint8_t { L1Hit, L2Hit, L2HitIntervention, LLCMiss };

std::string_view to_string(CacheOutcome o);

/// For L1 caches `writebacks` counts dirty lines written into L2; for L2 it
/// counts dirty lines sent downstream.
struct CacheStats {
    std::uint64_t accesses = 0;
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t evictions = 0;
    std::uint64_t writebacks = 0;
    std::uint64_t interventions = 0;
    std::uint64_t back_invalidations = 0;
    std::uint64_t pending_hits = 0;

    /// 0 when there were no accesses.
    double miss_rate() const { return accesses == 0 ? 0.0 : static_cast<double>(misses) / static_cast<double>(accesses); }
    friend bool operator==(const CacheStats&, const CacheStats&) = default;
};

struct Completion {
    MemRequest req;
    Tick done_at = 0;
    CacheOutcome outcome = CacheOutcome::L1Hit;
};

struct AccessResult {
    CacheOutcome outcome = CacheOutcome::L1Hit;
    /// Every way of the target L2 set is waiting on a fill; the request is
    /// parked inside the hierarchy and retried on the next fill.
    bool blocked = false;
    /// Present when the access finished without waiting on a fill.
    std::optional<Completion> completion;
};

/// Where the LLC sends line fills and dirty victims.
class MemoryPort {
public:
    virtual ~MemoryPort() = default;
    virtual void fill_request(const MemRequest& line_req, Tick at) = 0;
    virtual void writeback(const MemRequest& line_req, const LineData& data, Tick at) = 0;
};

struct DirectoryEntry {
    bool present = false;
    bool pending = false;
    bool dirty = false;
    bool exclusive = false;
    std::uint32_t sharers = 0;
};

/// Per-core L1s in front of a shared, inclusive L2 that embeds a full-map MESI
/// directory. Tag and coherence state change at access time; line data lives
/// in the L2 and data operations on a line waiting for its fill are queued
/// in order and applied when the fill arrives.
class CacheHierarchy {
public:
    CacheHierarchy(const HierarchyConfig& cfg, MemoryPort& port);

    AccessResult access(const MemRequest& req, Tick now);
    /// Installs fill data for a pending line and returns every access that
    /// finishes as a result, including parked requests that could now proceed.
    std::vector<Completion> fill(std::uint64_t line_addr, const LineData& data, Tick now);

    Mesi l1_state(unsigned core, std::uint64_t line_addr) const;
    DirectoryEntry directory(std::uint64_t line_addr) const;
    /// Reads resident, non-pending data; nullopt when the line is not in L2.
    std::optional<LineData> peek_line(std::uint64_t line_addr) const;

    /// MESI safety, directory consistency and inclusion; empty when all hold.
    std::vector<std::string> check_invariants() const;

    const CacheStats& l1_stats(unsigned core) const { return l1_[core].stats; }
    const CacheStats& l2_stats() const { return l2_.stats; }
    void reset_stats();

    std::size_t pending_fills() const { return waiters_.size(); }
    std::size_t parked() const { return blocked_.size(); }
    const HierarchyConfig& config() const { return cfg_; }

private:
    struct L1Way {
        std::uint64_t line = 0;
        Mesi state = Mesi::I;
        std::uint64_t lru = 0;
    };
    struct L1 {
        std::vector<L1Way> ways;
        CacheStats stats;
    };
    struct L2Way {
        std::uint64_t line = 0;
        bool valid = false;
        bool pending = false;
        bool dirty = false;
        bool exclusive = false;
        std::uint32_t sharers = 0;
        std::uint64_t lru = 0;
    };
    struct L2 {
        std::vector<L2Way> ways;
        std::vector<std::uint8_t> data;
        CacheStats stats;
    };
    struct Waiter {
        MemRequest req;
        Tick ready = 0;
        CacheOutcome outcome = CacheOutcome::L1Hit;
    };

    std::size_t l1_set(std::uint64_t line) const { return (line / cfg_.l1.line_bytes) % l1_sets_; }
    std::size_t l2_set(std::uint64_t line) const { return (line / cfg_.l2.line_bytes) % l2_sets_; }
    L1Way* l1_find(unsigned core, std::uint64_t line);
    const L1Way* l1_find(unsigned core, std::uint64_t line) const;
    std::size_t l2_find(std::uint64_t line) const;
    std::size_t l2_victim(std::uint64_t line) const;
    std::uint8_t* l2_data(std::size_t way) { return l2_.data.data() + way * cfg_.l2.line_bytes; }
    const std::uint8_t* l2_data(std::size_t way) const { return l2_.data.data() + way * cfg_.l2.line_bytes; }
    void l1_install(unsigned core, std::uint64_t line, Mesi state);
    void evict_l2(std::size_t way, Tick at);
    void apply(MemRequest& req, std::size_t way);
    AccessResult finish(const MemRequest& req, std::size_t way, Tick ready, CacheOutcome outcome);

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    HierarchyConfig cfg_;
    MemoryPort& port_;
    std::size_t l1_sets_;
    std::size_t l2_sets_;
    std::vector<L1> l1_;
    L2 l2_;
    std::uint64_t stamp_ = 0;
    std::uint64_t next_downstream_id_ = 1;
    std::unordered_map<std::uint64_t, std::vector<Waiter>> waiters_;
    std::vector<MemRequest> blocked_;
};

} // namespace cxlsim
