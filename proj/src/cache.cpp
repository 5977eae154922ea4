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

#include "cxlsim/cache.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include <fmt/format.h>

#include "cxlsim/error.hpp"

namespace cxlsim {

std::string_view to_string(Mesi s)
{
    switch (s) {
    case Mesi::I: return "I";
    case Mesi::S: return "S";
    case Mesi::E: return "E";
    case Mesi::M: return "M";
    }
    return "?";
}

std::string_view to_string(CacheOutcome o)
{
    switch (o) {
    case CacheOutcome::L1Hit: return "L1Hit";
    case CacheOutcome::L2Hit: return "L2Hit";
    case CacheOutcome::L2HitIntervention: return "L2HitIntervention";
    case CacheOutcome::LLCMiss: return "LLCMiss";
    }
    return "?";
}

std::vector<std::string> CacheGeometry::violations(std::string_view name) const
{
    std::vector<std::string> out;
    if (!is_pow2(line_bytes))
        out.push_back(fmt::format("{}: line_bytes {} is not a power of two", name, line_bytes));
    if (assoc == 0)
        out.push_back(fmt::format("{}: associativity must be >= 1", name));
    else if (line_bytes != 0 && (size_bytes == 0 || size_bytes % (line_bytes * assoc) != 0))
        out.push_back(fmt::format("{}: size {} is not a multiple of line_bytes x associativity ({})", name,
                                  size_bytes, line_bytes * assoc));
    return out;
}

CacheHierarchy::CacheHierarchy(const HierarchyConfig& cfg, MemoryPort& port) : cfg_(cfg), port_(port)
{
    auto v = cfg.l1.violations("l1");
    auto v2 = cfg.l2.violations("l2");
    v.insert(v.end(), v2.begin(), v2.end());
    if (cfg.l1.line_bytes != kLineBytes || cfg.l2.line_bytes != kLineBytes)
        v.push_back(fmt::format("line size must be {} bytes", kLineBytes));
    if (cfg.cores == 0 || cfg.cores > 32)
        v.push_back(fmt::format("core count {} is outside 1..32", cfg.cores));
    if (!v.empty())
        throw Error(Errc::ConfigError, v.front());

    l1_sets_ = cfg.l1.sets();
    l2_sets_ = cfg.l2.sets();
    l1_.resize(cfg.cores);
    for (auto& l1 : l1_)
        l1.ways.resize(cfg.l1.lines());
    l2_.ways.resize(cfg.l2.lines());
    l2_.data.assign(cfg.l2.size_bytes, 0);
}

CacheHierarchy::L1Way* CacheHierarchy::l1_find(unsigned core, std::uint64_t line)
{
    const auto base = l1_set(line) * cfg_.l1.assoc;
    for (std::size_t w = base; w < base + cfg_.l1.assoc; ++w) {
        auto& way = l1_[core].ways[w];
        if (way.state != Mesi::I && way.line == line)
            return &way;
    }
    return nullptr;
}

const CacheHierarchy::L1Way* CacheHierarchy::l1_find(unsigned core, std::uint64_t line) const
{
    return const_cast<CacheHierarchy*>(this)->l1_find(core, line);
}

std::size_t CacheHierarchy::l2_find(std::uint64_t line) const
{
    const auto base = l2_set(line) * cfg_.l2.assoc;
    for (std::size_t w = base; w < base + cfg_.l2.assoc; ++w)
        if (l2_.ways[w].valid && l2_.ways[w].line == line)
            return w;
    return npos;
}

std::size_t CacheHierarchy::l2_victim(std::uint64_t line) const
{
    const auto base = l2_set(line) * cfg_.l2.assoc;
    std::size_t best = npos;
    for (std::size_t w = base; w < base + cfg_.l2.assoc; ++w) {
        const auto& way = l2_.ways[w];
        if (!way.valid)
            return w;
        if (way.pending)
            continue;
        if (best == npos || way.lru < l2_.ways[best].lru)
            best = w;
    }
    return best;
}

void CacheHierarchy::evict_l2(std::size_t way, Tick at)
{
    auto& v = l2_.ways[way];
    if (!v.valid)
        return;
    for (unsigned c = 0; c < cfg_.cores; ++c) {
        if ((v.sharers >> c & 1U) == 0)
            continue;
        if (auto* w = l1_find(c, v.line)) {
            w->state = Mesi::I;
            ++l2_.stats.back_invalidations;
        }
    }
    ++l2_.stats.evictions;
    if (v.dirty) {
        ++l2_.stats.writebacks;
        LineData data;
        std::memcpy(data.data(), l2_data(way), kLineBytes);
        MemRequest wb;
        wb.id = next_downstream_id_++;
        wb.core = 0;
        wb.op = MemOp::Store;
        wb.addr = v.line;
        wb.size = kLineBytes;
        wb.issue_time = at;
        port_.writeback(wb, data, at);
    }
    v = L2Way{};
}

void CacheHierarchy::l1_install(unsigned core, std::uint64_t line, Mesi state)
{
    auto& l1 = l1_[core];
    const auto base = l1_set(line) * cfg_.l1.assoc;
    std::size_t victim = base;
    for (std::size_t w = base; w < base + cfg_.l1.assoc; ++w) {
        if (l1.ways[w].state == Mesi::I) {
            victim = w;
            break;
        }
        if (l1.ways[w].lru < l1.ways[victim].lru)
            victim = w;
    }
    auto& v = l1.ways[victim];
    if (v.state != Mesi::I) {
        ++l1.stats.evictions;
        if (v.state == Mesi::M)
            ++l1.stats.writebacks;
        const auto w2 = l2_find(v.line);
        if (w2 != npos) {
            auto& dir = l2_.ways[w2];
            dir.sharers &= ~(1U << core);
            if (dir.sharers == 0)
                dir.exclusive = false;
        }
    }
    v.line = line;
    v.state = state;
    v.lru = ++stamp_;
}

void CacheHierarchy::apply(MemRequest& req, std::size_t way)
{
    auto* bytes = l2_data(way) + (req.addr - line_of(req.addr));
    const std::size_t n = std::min<std::size_t>(req.size, 8);
    if (req.op == MemOp::Store) {
        for (std::size_t i = 0; i < n; ++i)
            bytes[i] = static_cast<std::uint8_t>(req.value >> (8 * i));
    } else {
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < n; ++i)
            v |= std::uint64_t{bytes[i]} << (8 * i);
        req.value = v;
    }
}

AccessResult CacheHierarchy::finish(const MemRequest& req, std::size_t way, Tick ready, CacheOutcome outcome)
{
    const auto& w = l2_.ways[way];
    if (w.pending) {
        waiters_[w.line].push_back(Waiter{req, ready, outcome});
        return AccessResult{outcome, false, std::nullopt};
    }
    Completion done{req, ready, outcome};
    apply(done.req, way);
    return AccessResult{outcome, false, done};
}

AccessResult CacheHierarchy::access(const MemRequest& req, Tick now)
{
    if (req.core >= cfg_.cores)
        throw Error(Errc::InvalidArgument, fmt::format("request {} names core {} of {}", req.id, req.core, cfg_.cores));
    if (req.size == 0 || line_of(req.addr) != line_of(req.addr + req.size - 1))
        throw Error(Errc::InvalidArgument,
                    fmt::format("request {} at {:#x} size {} crosses a line boundary", req.id, req.addr, req.size));

    const unsigned c = req.core;
    const std::uint32_t me = 1U << c;
    const std::uint64_t line = line_of(req.addr);
    const bool store = req.op == MemOp::Store;
    auto& l1 = l1_[c];

    L1Way* w1 = l1_find(c, line);
    if (w1 != nullptr && (!store || w1->state == Mesi::E || w1->state == Mesi::M)) {
        ++l1.stats.accesses;
        ++l1.stats.hits;
        w1->lru = ++stamp_;
        const auto w2 = l2_find(line);
        auto& dir = l2_.ways[w2];
        if (store) {
            w1->state = Mesi::M;
            dir.dirty = true;
        }
        if (dir.pending)
            ++l1.stats.pending_hits;
        return finish(req, w2, now + cfg_.l1.hit_latency, CacheOutcome::L1Hit);
    }

    std::size_t w2 = l2_find(line);
    std::size_t victim = npos;
    if (w2 == npos) {
        victim = l2_victim(line);
        if (victim == npos) {
            blocked_.push_back(req);
            return AccessResult{CacheOutcome::LLCMiss, true, std::nullopt};
        }
    }

    ++l1.stats.accesses;
    ++l1.stats.misses;
    ++l2_.stats.accesses;
    Tick ready = now + cfg_.l1.hit_latency + cfg_.l2.hit_latency;
    CacheOutcome outcome = CacheOutcome::LLCMiss;
    Mesi grant = store ? Mesi::M : Mesi::E;

    if (w2 != npos) {
        ++l2_.stats.hits;
        auto& dir = l2_.ways[w2];
        if (dir.pending)
            ++l2_.stats.pending_hits;
        bool intervened = false;
        const std::uint32_t others = dir.sharers & ~me;
        if (store) {
            for (unsigned o = 0; o < cfg_.cores; ++o) {
                if ((others >> o & 1U) == 0)
                    continue;
                if (auto* ow = l1_find(o, line))
                    ow->state = Mesi::I;
                intervened = true;
            }
            dir.sharers = me;
            dir.exclusive = true;
            dir.dirty = true;
        } else if (others == 0) {
            dir.sharers = me;
            dir.exclusive = true;
        } else {
            if (dir.exclusive) {
                for (unsigned o = 0; o < cfg_.cores; ++o)
                    if ((others >> o & 1U) != 0)
                        if (auto* ow = l1_find(o, line))
                            ow->state = Mesi::S;
                intervened = true;
            }
            dir.sharers |= me;
            dir.exclusive = false;
            grant = Mesi::S;
        }
        dir.lru = ++stamp_;
        if (intervened) {
            ++l2_.stats.interventions;
            ready += cfg_.coherence_latency;
            outcome = CacheOutcome::L2HitIntervention;
        } else {
            outcome = CacheOutcome::L2Hit;
        }
    } else {
        ++l2_.stats.misses;
        evict_l2(victim, ready);
        auto& dir = l2_.ways[victim];
        dir.line = line;
        dir.valid = true;
        dir.pending = true;
        dir.dirty = store;
        dir.exclusive = true;
        dir.sharers = me;
        dir.lru = ++stamp_;
        std::memset(l2_data(victim), 0, cfg_.l2.line_bytes);
        w2 = victim;
        w1 = nullptr; // a back-invalidation may have cleared the way
        MemRequest fill;
        fill.id = next_downstream_id_++;
        fill.core = c;
        fill.op = MemOp::Load;
        fill.addr = line;
        fill.size = kLineBytes;
        fill.issue_time = req.issue_time;
        port_.fill_request(fill, ready);
    }

    if (w1 != nullptr) {
        w1->state = grant;
        w1->lru = ++stamp_;
    } else {
        l1_install(c, line, grant);
    }
    return finish(req, w2, ready, outcome);
}

std::vector<Completion> CacheHierarchy::fill(std::uint64_t line_addr, const LineData& data, Tick now)
{
    const auto way = l2_find(line_addr);
    if (way == npos || !l2_.ways[way].pending)
        throw Error(Errc::SimulationError, fmt::format("fill for line {:#x} that is not pending", line_addr));
    std::memcpy(l2_data(way), data.data(), kLineBytes);
    l2_.ways[way].pending = false;

    std::vector<Completion> done;
    auto node = waiters_.extract(line_addr);
    if (!node.empty()) {
        for (auto& w : node.mapped()) {
            Completion c{w.req, std::max(now, w.ready), w.outcome};
            apply(c.req, way);
            done.push_back(c);
        }
    }
    if (!blocked_.empty()) {
        auto retry = std::move(blocked_);
        blocked_.clear();
        for (const auto& req : retry) {
            auto r = access(req, now);
            if (r.completion)
                done.push_back(*r.completion);
        }
    }
    return done;
}

Mesi CacheHierarchy::l1_state(unsigned core, std::uint64_t line_addr) const
{
    const auto* w = l1_find(core, line_of(line_addr));
    return w != nullptr ? w->state : Mesi::I;
}

DirectoryEntry CacheHierarchy::directory(std::uint64_t line_addr) const
{
    const auto w = l2_find(line_of(line_addr));
    if (w == npos)
        return {};
    const auto& d = l2_.ways[w];
    return DirectoryEntry{true, d.pending, d.dirty, d.exclusive, d.sharers};
}

std::optional<LineData> CacheHierarchy::peek_line(std::uint64_t line_addr) const
{
    const auto w = l2_find(line_of(line_addr));
    if (w == npos || l2_.ways[w].pending)
        return std::nullopt;
    LineData out;
    std::memcpy(out.data(), l2_data(w), kLineBytes);
    return out;
}

std::vector<std::string> CacheHierarchy::check_invariants() const
{
    std::vector<std::string> out;
    for (unsigned c = 0; c < cfg_.cores; ++c) {
        for (const auto& w : l1_[c].ways) {
            if (w.state == Mesi::I)
                continue;
            const auto w2 = l2_find(w.line);
            if (w2 == npos) {
                out.push_back(fmt::format("inclusion: core {} holds {:#x} ({}) absent from L2", c, w.line, to_string(w.state)));
                continue;
            }
            const auto& d = l2_.ways[w2];
            if ((d.sharers >> c & 1U) == 0)
                out.push_back(fmt::format("directory: core {} holds {:#x} but is not a sharer", c, w.line));
            const bool owner = w.state == Mesi::M || w.state == Mesi::E;
            if (owner && (!d.exclusive || d.sharers != (1U << c)))
                out.push_back(fmt::format("MESI: core {} holds {:#x} in {} but directory is not exclusive to it", c,
                                          w.line, to_string(w.state)));
            if (w.state == Mesi::S && d.exclusive)
                out.push_back(fmt::format("MESI: core {} holds {:#x} in S but directory is exclusive", c, w.line));
            if (w.state == Mesi::M && !d.dirty)
                out.push_back(fmt::format("MESI: core {} holds {:#x} in M but L2 line is clean", c, w.line));
        }
    }
    for (const auto& d : l2_.ways) {
        if (!d.valid)
            continue;
        unsigned owners = 0;
        for (unsigned c = 0; c < cfg_.cores; ++c) {
            const Mesi s = l1_state(c, d.line);
            const bool holds = s != Mesi::I;
            if (holds != ((d.sharers >> c & 1U) != 0))
                out.push_back(fmt::format("directory: sharer bit of core {} for {:#x} disagrees with L1 state {}", c,
                                          d.line, to_string(s)));
            if (s == Mesi::M || s == Mesi::E)
                ++owners;
        }
        if (owners > 1)
            out.push_back(fmt::format("MESI: {:#x} has {} holders in M/E", d.line, owners));
        if (d.exclusive && std::popcount(d.sharers) != 1)
            out.push_back(fmt::format("directory: {:#x} is exclusive with {} sharers", d.line, std::popcount(d.sharers)));
    }
    return out;
}

void CacheHierarchy::reset_stats()
{
    for (auto& l1 : l1_)
        l1.stats = {};
    l2_.stats = {};
}

} // namespace cxlsim
