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

#include "cxlsim/simulator.hpp"

#include <fmt/format.h>

#include <cstring>

namespace cxlsim {

std::unique_ptr<Workload> make_workload(const RunConfig& cfg)
{
    return std::visit(
        [&](const auto& w) -> std::unique_ptr<Workload> {
            using T = std::decay_t<decltype(w)>;
            if constexpr (std::is_same_v<T, StreamWorkloadConfig>) {
                StreamSpec spec;
                spec.kernel = w.kernel;
                spec.array_elems = w.array_elems ? *w.array_elems
                                                 : stream_elems_for(w.kernel, w.footprint_x_l2,
                                                                    cfg.caches.l2.size_bytes, cfg.topology.page_size);
                spec.footprint_multiplier = w.footprint_x_l2;
                spec.iterations = w.iterations;
                spec.cores = w.cores == 0 ? cfg.cpu.cores : w.cores;
                spec.scalar = w.scalar;
                spec.seed = cfg.seed;
                return std::make_unique<StreamWorkload>(spec, cfg.interleave);
            } else if constexpr (std::is_same_v<T, ChaseWorkloadConfig>) {
                return std::make_unique<PointerChaseWorkload>(w.elems, w.stride, w.pool, w.shuffle, cfg.seed);
            } else {
                return std::make_unique<TraceWorkload>(load_trace(resolve_path(cfg, w.path)), cfg.interleave);
            }
        },
        cfg.workload);
}

Simulator::Simulator(const RunConfig& cfg, std::unique_ptr<Workload> workload, SimOptions opts)
    : cfg_(cfg), opts_(opts),
      map_(cfg.topology.regions, cfg.topology.decoders, cfg.topology.mode, cfg.topology.cpu_nodes,
           cfg.topology.page_size)
{
    map_.validate();
    auto hcfg = cfg_.caches;
    hcfg.cores = cfg_.cpu.cores;
    cfg_.caches.cores = hcfg.cores;
    caches_ = std::make_unique<CacheHierarchy>(hcfg, static_cast<MemoryPort&>(*this));
    engine_.set_dispatch_log(opts_.dispatch_log);

    for (const auto& dc : cfg_.topology.devices) {
        auto dev = std::make_unique<CxlMemDevice>(dc, &map_);
        dev->adopt_regions(map_);
        dev->attach(engine_);
        paths_.push_back(std::make_unique<CxlPath>(engine_, fmt::format("dev{}", dc.id), cfg_.latency, dev->media(),
                                                   cfg_.strict, [this](const Finished& f) { on_cxl_done(f); }));
        devices_.push_back(std::move(dev));
    }

    home_ = engine_.add_component("home", [this](const Event& ev) { on_home(ev); });
    cores_.resize(cfg_.cpu.cores);
    for (unsigned c = 0; c < cfg_.cpu.cores; ++c)
        cores_[c].id = engine_.add_component(fmt::format("core{}", c), [this, c](const Event& ev) { on_core(c, ev); });

    workload_ = workload ? std::move(workload) : make_workload(cfg_);
}

Simulator::~Simulator() = default;

std::size_t Simulator::device_index(unsigned device_id) const
{
    for (std::size_t i = 0; i < devices_.size(); ++i)
        if (devices_[i]->id() == device_id)
            return i;
    throw Error(Errc::DeviceNotFound, fmt::format("no CXL device with id {}", device_id));
}

std::size_t Simulator::in_flight() const
{
    std::size_t n = home_ops_.size() + writebacks_in_flight_.size() + caches_->pending_fills() + caches_->parked();
    for (const auto& p : paths_)
        n += p->in_flight();
    for (const auto& c : cores_)
        n += c.in_flight;
    return n;
}

// ---------------------------------------------------------------- memory views

LineData Simulator::backing_line(std::uint64_t line_addr) const
{
    const auto* r = map_.region_at(line_addr);
    if (r != nullptr && r->kind == RegionKind::SystemDram) {
        auto it = dram_.find(line_addr);
        return it != dram_.end() ? it->second : LineData{};
    }
    if (r != nullptr && r->kind == RegionKind::CxlWindow) {
        if (auto t = map_.decode(line_addr))
            return devices_[device_index(t->device)]->media().read_line(t->offset);
    }
    throw Error(Errc::AddressOutOfRange, fmt::format("{:#x} is not backed by memory", line_addr));
}

LineData Simulator::coherent_line(std::uint64_t line_addr) const
{
    if (auto l = caches_->peek_line(line_addr))
        return *l;
    if (auto it = writebacks_in_flight_.find(line_addr); it != writebacks_in_flight_.end())
        return it->second;
    return backing_line(line_addr);
}

std::uint64_t Simulator::coherent_read(std::uint64_t paddr) const
{
    const auto line = coherent_line(line_of(paddr));
    const auto off = paddr - line_of(paddr);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 8 && off + i < kLineBytes; ++i)
        v |= std::uint64_t{line[off + i]} << (8 * i);
    return v;
}

void Simulator::backdoor_write(std::uint64_t paddr, std::uint64_t value)
{
    if (started_ && engine_.dispatched() != 0)
        throw Error(Errc::SimulationError, "backdoor write after the run started");
    const auto la = line_of(paddr);
    const auto off = paddr - la;
    if (off + 8 > kLineBytes)
        throw Error(Errc::Misaligned, fmt::format("backdoor write at {:#x} crosses a line", paddr));
    LineData line = backing_line(la);
    for (std::size_t i = 0; i < 8; ++i)
        line[off + i] = static_cast<std::uint8_t>(value >> (8 * i));
    const auto* r = map_.region_at(la);
    if (r->kind == RegionKind::SystemDram) {
        dram_[la] = line;
    } else {
        const auto t = *map_.decode(la);
        devices_[device_index(t.device)]->media().write_line(t.offset, line);
    }
}

// ---------------------------------------------------------------- home agent

void Simulator::fill_request(const MemRequest& line_req, Tick at)
{
    schedule_home(at, HomeOpKind::RouteFill, line_req, {});
}

void Simulator::writeback(const MemRequest& line_req, const LineData& data, Tick at)
{
    // The victim has already left the L2, so the coherent image of the line
    // lives in the write buffer until the backing store acknowledges it.
    writebacks_in_flight_[line_req.addr] = data;
    schedule_home(at, HomeOpKind::RouteWriteback, line_req, data);
}

void Simulator::schedule_home(Tick at, HomeOpKind kind, const MemRequest& req, const LineData& data)
{
    const auto cookie = next_cookie_++;
    home_ops_.emplace(cookie, HomeOp{kind, req, data});
    engine_.schedule(at, home_, Timer{cookie});
}

void Simulator::on_home(const Event& ev)
{
    auto node = home_ops_.extract(std::get<Timer>(ev.payload).cookie);
    if (node.empty())
        throw Error(Errc::SimulationError, "home agent event with an unknown cookie");
    auto& op = node.mapped();
    switch (op.kind) {
    case HomeOpKind::RouteFill: route_fill(op.req); break;
    case HomeOpKind::RouteWriteback: route_writeback(op.req, op.data); break;
    case HomeOpKind::DramFillDone: deliver_fill(Pool::Dram, op.req, backing_line(op.req.addr)); break;
    case HomeOpKind::DramWritebackDone:
        dram_[op.req.addr] = op.data;
        writeback_done(Pool::Dram, op.req.addr);
        break;
    }
}

void Simulator::route_fill(const MemRequest& req)
{
    if (writebacks_in_flight_.contains(req.addr)) {
        deferred_fills_[req.addr].push_back(req);
        return;
    }
    const auto* r = map_.region_at(req.addr);
    if (r != nullptr && r->kind == RegionKind::SystemDram) {
        schedule_home(engine_.now() + dram_read_path(cfg_.dram), HomeOpKind::DramFillDone, req, {});
        return;
    }
    if (r != nullptr && r->kind == RegionKind::CxlWindow) {
        if (auto t = map_.decode(req.addr)) {
            paths_[device_index(t->device)]->post(req, t->offset, std::nullopt);
            return;
        }
    }
    throw Error(Errc::SimulationError, fmt::format("line fill for {:#x} outside system memory", req.addr));
}

void Simulator::route_writeback(const MemRequest& req, const LineData& data)
{
    const auto* r = map_.region_at(req.addr);
    if (r != nullptr && r->kind == RegionKind::SystemDram) {
        schedule_home(engine_.now() + cfg_.dram.membus + cfg_.dram.write, HomeOpKind::DramWritebackDone, req, data);
        return;
    }
    if (r != nullptr && r->kind == RegionKind::CxlWindow) {
        if (auto t = map_.decode(req.addr)) {
            paths_[device_index(t->device)]->post(req, t->offset, data);
            return;
        }
    }
    throw Error(Errc::SimulationError, fmt::format("writeback for {:#x} outside system memory", req.addr));
}

void Simulator::deliver_fill(Pool pool, const MemRequest& req, const LineData& data)
{
    auto& pc = pools_[static_cast<int>(pool)];
    ++pc.reads;
    pc.bytes += kLineBytes;
    pc.fill_latencies.push_back(engine_.now() - req.issue_time);
    schedule_completions(caches_->fill(req.addr, data, engine_.now()));
}

void Simulator::writeback_done(Pool pool, std::uint64_t line)
{
    auto& pc = pools_[static_cast<int>(pool)];
    ++pc.writes;
    pc.bytes += kLineBytes;
    writebacks_in_flight_.erase(line);
    auto node = deferred_fills_.extract(line);
    if (!node.empty())
        for (const auto& req : node.mapped())
            route_fill(req);
}

void Simulator::on_cxl_done(const Finished& f)
{
    if (f.kind == TxnKind::Read)
        deliver_fill(Pool::Cxl, f.req, f.data.value_or(LineData{}));
    else
        writeback_done(Pool::Cxl, f.req.addr);
}

void Simulator::schedule_completions(const std::vector<Completion>& done)
{
    for (const auto& c : done)
        engine_.schedule(c.done_at, cores_.at(c.req.core).id, c.req);
}

// ---------------------------------------------------------------- cores

void Simulator::start()
{
    if (started_)
        return;
    started_ = true;
    workload_->bind(*this);
    workload_->set_pass_hook([this](std::uint64_t pass) { record_pass(pass); });
    const unsigned limit = workload_->window_limit();
    window_ = limit == 0 ? cfg_.cpu.window : std::min(limit, cfg_.cpu.window);
    if (window_ == 0)
        window_ = 1;
    wake_all();
}

void Simulator::wake_all()
{
    for (unsigned c = 0; c < cores_.size(); ++c)
        try_issue(c);
}

void Simulator::try_issue(unsigned core)
{
    auto& cs = cores_[core];
    const Tick now = engine_.now();
    auto wake = [&](Tick at) {
        if (!cs.wake_pending || at < cs.wake_at) {
            engine_.schedule(at, cs.id, Timer{0});
            cs.wake_at = at;
            cs.wake_pending = true;
        }
    };
    while (cs.in_flight < window_) {
        if (cs.next_issue > now) {
            wake(cs.next_issue);
            return;
        }
        const auto poll = workload_->peek(core);
        if (poll.kind != WorkloadPoll::Kind::Ready)
            return;
        if (poll.not_before > now) {
            wake(poll.not_before);
            return;
        }
        MemRequest req;
        req.id = next_req_id_++;
        req.core = core;
        req.op = poll.op;
        req.addr = poll.addr;
        req.size = poll.size;
        req.issue_time = now;
        req.value = poll.value;
        workload_->issued(core, req.id);
        ++cs.in_flight;
        ++issued_;
        cs.next_issue = now + cfg_.cpu.issue_interval;
        const auto r = caches_->access(req, now);
        if (r.completion)
            engine_.schedule(r.completion->done_at, cs.id, r.completion->req);
    }
}

void Simulator::on_core(unsigned core, const Event& ev)
{
    auto& cs = cores_[core];
    if (std::holds_alternative<Timer>(ev.payload)) {
        if (ev.fire_at >= cs.wake_at)
            cs.wake_pending = false;
        try_issue(core);
        return;
    }
    const auto& req = std::get<MemRequest>(ev.payload);
    if (cs.in_flight == 0)
        throw Error(Errc::SimulationError, fmt::format("core {} retired request {} it never issued", core, req.id));
    --cs.in_flight;
    retired_latencies_.push_back(ev.fire_at - req.issue_time);
    workload_->completed(req, ev.fire_at);
    wake_all();
}

void Simulator::record_pass(std::uint64_t pass)
{
    PassRecord p;
    p.pass = pass;
    p.at = engine_.now();
    for (unsigned c = 0; c < cores_.size(); ++c) {
        p.core_accesses += caches_->l1_stats(c).accesses;
        p.l1_misses += caches_->l1_stats(c).misses;
    }
    p.l2_accesses = caches_->l2_stats().accesses;
    p.l2_misses = caches_->l2_stats().misses;
    p.pool_bytes[0] = pools_[0].bytes;
    p.pool_bytes[1] = pools_[1].bytes;
    p.workload_bytes = workload_->totals().bytes_moved;
    passes_.push_back(p);
}

RunOutcome Simulator::run()
{
    start();
    const auto res = engine_.run_until(cfg_.max_ticks);
    if (!res.drained)
        throw Error(Errc::SimulationError,
                    fmt::format("run exceeded max_ticks ({} ps) with {} events pending", cfg_.max_ticks,
                                engine_.pending()));
    for (unsigned c = 0; c < cores_.size(); ++c)
        if (workload_->peek(c).kind != WorkloadPoll::Kind::Done)
            throw Error(Errc::SimulationError,
                        fmt::format("workload stalled on core {} with no events pending", c));
    if (in_flight() != 0)
        throw Error(Errc::SimulationError, fmt::format("{} memory operations still in flight at drain", in_flight()));
    for (const auto& p : paths_)
        if (p->outstanding().allocated_total() != p->outstanding().released_total())
            throw Error(Errc::SimulationError, "CXL tags leaked");
    workload_->verify(*this);
    return RunOutcome{true, elapsed(), retired()};
}

} // namespace cxlsim
