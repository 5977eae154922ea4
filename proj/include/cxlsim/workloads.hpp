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
#include "cxlsim/types.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace cxlsim {

/// What a workload needs from the machine it runs on.
class WorkloadHost {
public:
    virtual ~WorkloadHost() = default;
    virtual AddressMap& address_map() = 0;
    virtual unsigned cores() const = 0;
    virtual std::uint64_t l2_bytes() const = 0;
    /// Writes 8 bytes straight into backing memory; only valid before the run.
    virtual void backdoor_write(std::uint64_t paddr, std::uint64_t value) = 0;
    /// Reads 8 bytes as the coherent memory image currently holds them.
    virtual std::uint64_t coherent_read(std::uint64_t paddr) const = 0;
};

struct WorkloadPoll {
    enum class Kind : std::uint8_t { Ready, Stalled, Done };
    Kind kind = Kind::Done;
    MemOp op = MemOp::Load;
    std::uint64_t addr = 0;
    std::uint32_t size = 8;
    std::uint64_t value = 0;
    Tick not_before = 0;
};

struct WorkloadTotals {
    std::uint64_t loads = 0;
    std::uint64_t stores = 0;
    std::uint64_t bytes_moved = 0;
    std::uint64_t expected_bytes = 0;
    std::uint64_t passes = 0;
    std::optional<bool> check_passed;
    std::string check_detail;
};

/// A request generator driven by the cores. peek() is side-effect free;
/// issued() consumes the peeked request and names its id.
class Workload {
public:
    using PassHook = std::function<void(std::uint64_t pass)>;

    virtual ~Workload() = default;
    virtual std::string_view kind() const = 0;
    virtual void bind(WorkloadHost& host) = 0;
    virtual WorkloadPoll peek(unsigned core) = 0;
    virtual void issued(unsigned core, std::uint64_t id) = 0;
    virtual void completed(const MemRequest& req, Tick now) = 0;
    /// In-flight window forced by the workload (0: use the core's).
    virtual unsigned window_limit() const { return 0; }
    /// Runs the functional check against the final memory image.
    virtual void verify(WorkloadHost& host) { (void)host; }
    const WorkloadTotals& totals() const { return totals_; }

    void set_pass_hook(PassHook hook) { pass_hook_ = std::move(hook); }

protected:
    void account(const MemRequest& req);
    void end_pass();

    WorkloadTotals totals_;
    PassHook pass_hook_;
};

enum class StreamKernel : std::uint8_t { Copy, Scale, Add, Triad };
std::string_view to_string(StreamKernel k);
StreamKernel parse_stream_kernel(std::string_view s);
unsigned stream_arrays(StreamKernel k);

struct StreamSpec {
    StreamKernel kernel = StreamKernel::Triad;
    std::uint64_t array_elems = 0;
    double footprint_multiplier = 0; // informational when array_elems is set directly
    unsigned iterations = 2;
    unsigned cores = 1;
    std::uint64_t scalar = 3;
    std::uint64_t seed = 1;

    std::uint64_t footprint_bytes() const { return stream_arrays(kernel) * array_elems * 8; }
};

/// Element count giving `multiplier` x `l2_bytes` of array data, rounded down
/// to whole pages per array (at least one page).
std::uint64_t stream_elems_for(StreamKernel k, double multiplier, std::uint64_t l2_bytes,
                               std::uint64_t page_size = kPageBytes);

/// STREAM copy/scale/add/triad. Each core streams a contiguous, line-aligned
/// slice; an element's store issues once its loads return, and all cores
/// meet at a barrier between iterations.
class StreamWorkload final : public Workload {
public:
    StreamWorkload(StreamSpec spec, InterleavePolicy policy);

    std::string_view kind() const override { return "stream"; }
    void bind(WorkloadHost& host) override;
    WorkloadPoll peek(unsigned core) override;
    void issued(unsigned core, std::uint64_t id) override;
    void completed(const MemRequest& req, Tick now) override;
    void verify(WorkloadHost& host) override;

    const StreamSpec& spec() const { return spec_; }
    std::uint64_t paddr(unsigned array, std::uint64_t elem) const;
    std::uint64_t expected(std::uint64_t elem) const;

private:
    struct Elem {
        unsigned loads_left = 0;
        std::uint64_t v[2] = {0, 0};
    };
    struct Op {
        std::uint64_t elem;
        int slot; // load slot, or -1 for the store
    };
    struct Core {
        std::uint64_t lo = 0, hi = 0;
        std::uint64_t next_elem = 0;
        unsigned next_slot = 0;
        std::deque<std::pair<std::uint64_t, std::uint64_t>> stores; // elem, value
        std::unordered_map<std::uint64_t, Elem> elems;
        std::unordered_map<std::uint64_t, Op> inflight;
        std::uint64_t stores_done = 0;
        bool at_barrier = false;
    };

    unsigned load_array(unsigned slot) const;
    unsigned store_array() const;
    unsigned loads_per_elem() const;
    std::uint64_t compute(const std::uint64_t* v) const;
    void start_iteration();

    StreamSpec spec_;
    InterleavePolicy policy_;
    std::uint64_t page_size_ = kPageBytes;
    std::uint64_t pages_per_array_ = 0;
    std::vector<std::uint64_t> page_table_; // virtual page -> physical page base
    std::vector<std::uint64_t> init_[2];    // b and c initial values
    std::vector<Core> cores_;
    unsigned iteration_ = 0;
    std::optional<Op> peeked_;
};

/// Dependent-load latency probe: each node holds the physical address of the
/// next one, so loads serialize with a window of one.
class PointerChaseWorkload final : public Workload {
public:
    PointerChaseWorkload(std::uint64_t elems, std::uint64_t stride, Pool pool, bool shuffle = false,
                         std::uint64_t seed = 1);

    std::string_view kind() const override { return "pointer_chase"; }
    void bind(WorkloadHost& host) override;
    WorkloadPoll peek(unsigned core) override;
    void issued(unsigned core, std::uint64_t id) override;
    void completed(const MemRequest& req, Tick now) override;
    unsigned window_limit() const override { return 1; }
    void verify(WorkloadHost& host) override;

    const std::vector<Tick>& latencies() const { return latencies_; }
    std::uint64_t node_paddr(std::uint64_t k) const;

private:
    std::uint64_t elems_;
    std::uint64_t stride_;
    Pool pool_;
    bool shuffle_;
    std::uint64_t seed_;
    std::uint64_t page_size_ = kPageBytes;
    std::vector<std::uint64_t> order_;
    std::vector<std::uint64_t> page_table_;
    std::uint64_t next_ = 0;
    std::uint64_t current_addr_ = 0;
    bool outstanding_ = false;
    bool chain_ok_ = true;
    std::vector<Tick> latencies_;
};

struct TraceRecord {
    Tick tick = 0;
    unsigned core = 0;
    MemOp op = MemOp::Load;
    std::uint64_t addr = 0; // virtual: page ordinal * page size + in-page offset
    std::uint32_t size = 8;
    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

/// Parses `tick,core,op,addr,size` lines; a header line and blank lines are
/// allowed. Throws ParseError naming the line.
std::vector<TraceRecord> parse_trace(std::istream& in);
std::vector<TraceRecord> load_trace(const std::string& path);

/// Replays records at their tick offsets; virtual pages are placed by the
/// interleave policy in ascending page order.
class TraceWorkload final : public Workload {
public:
    TraceWorkload(std::vector<TraceRecord> records, InterleavePolicy policy);

    std::string_view kind() const override { return "trace"; }
    void bind(WorkloadHost& host) override;
    WorkloadPoll peek(unsigned core) override;
    void issued(unsigned core, std::uint64_t id) override;
    void completed(const MemRequest& req, Tick now) override;

    const std::vector<TraceRecord>& records() const { return records_; }

private:
    std::uint64_t translate(std::uint64_t vaddr) const;

    std::vector<TraceRecord> records_;
    InterleavePolicy policy_;
    std::uint64_t page_size_ = kPageBytes;
    std::unordered_map<std::uint64_t, std::uint64_t> page_table_;
    std::vector<std::deque<std::size_t>> per_core_;
    std::uint64_t outstanding_ = 0;
    std::uint64_t remaining_ = 0;
};

} // namespace cxlsim
