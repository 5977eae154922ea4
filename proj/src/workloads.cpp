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

#include "cxlsim/workloads.hpp"

#include "cxlsim/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <random>
#include <set>

namespace cxlsim {

void Workload::account(const MemRequest& req)
{
    if (req.op == MemOp::Load)
        ++totals_.loads;
    else
        ++totals_.stores;
    totals_.bytes_moved += req.size;
}

void Workload::end_pass()
{
    ++totals_.passes;
    if (pass_hook_)
        pass_hook_(totals_.passes);
}

// ---------------------------------------------------------------- STREAM

std::string_view to_string(StreamKernel k)
{
    switch (k) {
    case StreamKernel::Copy: return "copy";
    case StreamKernel::Scale: return "scale";
    case StreamKernel::Add: return "add";
    case StreamKernel::Triad: return "triad";
    }
    return "?";
}

StreamKernel parse_stream_kernel(std::string_view s)
{
    for (auto k : {StreamKernel::Copy, StreamKernel::Scale, StreamKernel::Add, StreamKernel::Triad})
        if (to_string(k) == s)
            return k;
    throw Error(Errc::ConfigError, fmt::format("unknown STREAM kernel '{}'", s));
}

unsigned stream_arrays(StreamKernel k)
{
    return (k == StreamKernel::Copy || k == StreamKernel::Scale) ? 2 : 3;
}

std::uint64_t stream_elems_for(StreamKernel k, double multiplier, std::uint64_t l2_bytes, std::uint64_t page_size)
{
    if (!(multiplier > 0))
        throw Error(Errc::ConfigError, "footprint multiplier must be positive");
    const auto per_array = static_cast<std::uint64_t>(multiplier * static_cast<double>(l2_bytes)) / stream_arrays(k);
    const std::uint64_t elems_per_page = page_size / 8;
    return std::max<std::uint64_t>(1, per_array / page_size) * elems_per_page;
}

StreamWorkload::StreamWorkload(StreamSpec spec, InterleavePolicy policy) : spec_(spec), policy_(policy)
{
    if (spec_.array_elems == 0)
        throw Error(Errc::ConfigError, "STREAM needs at least one element");
    if (spec_.iterations == 0)
        throw Error(Errc::ConfigError, "STREAM needs at least one iteration");
    if (spec_.cores == 0)
        throw Error(Errc::ConfigError, "STREAM needs at least one core");
}

unsigned StreamWorkload::loads_per_elem() const
{
    return stream_arrays(spec_.kernel) - 1;
}

// Layout slot 0 is always the destination; the sources follow.
unsigned StreamWorkload::store_array() const { return 0; }
unsigned StreamWorkload::load_array(unsigned slot) const { return 1 + slot; }

std::uint64_t StreamWorkload::compute(const std::uint64_t* v) const
{
    switch (spec_.kernel) {
    case StreamKernel::Copy: return v[0];
    case StreamKernel::Scale: return spec_.scalar * v[0];
    case StreamKernel::Add: return v[0] + v[1];
    case StreamKernel::Triad: return v[0] + spec_.scalar * v[1];
    }
    return 0;
}

std::uint64_t StreamWorkload::expected(std::uint64_t elem) const
{
    const std::uint64_t v[2] = {init_[0][elem], init_[1].empty() ? 0 : init_[1][elem]};
    return compute(v);
}

std::uint64_t StreamWorkload::paddr(unsigned array, std::uint64_t elem) const
{
    const std::uint64_t vaddr = array * pages_per_array_ * page_size_ + elem * 8;
    return page_table_.at(vaddr / page_size_) + vaddr % page_size_;
}

void StreamWorkload::bind(WorkloadHost& host)
{
    if (spec_.cores > host.cores())
        throw Error(Errc::ConfigError,
                    fmt::format("STREAM uses {} cores but the machine has {}", spec_.cores, host.cores()));
    auto& map = host.address_map();
    page_size_ = map.page_size();
    const std::uint64_t n = spec_.array_elems;
    pages_per_array_ = (n * 8 + page_size_ - 1) / page_size_;
    const unsigned arrays = stream_arrays(spec_.kernel);
    page_table_.resize(arrays * pages_per_array_);
    for (std::uint64_t vp = 0; vp < page_table_.size(); ++vp)
        page_table_[vp] = map.map_page(vp, policy_);

    std::mt19937_64 rng(spec_.seed);
    for (unsigned s = 0; s < loads_per_elem(); ++s) {
        init_[s].resize(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            init_[s][i] = rng();
            host.backdoor_write(paddr(load_array(s), i), init_[s][i]);
        }
    }

    const std::uint64_t lines = (n + 7) / 8;
    cores_.assign(spec_.cores, Core{});
    for (unsigned c = 0; c < spec_.cores; ++c) {
        cores_[c].lo = std::min(n, c * lines / spec_.cores * 8);
        cores_[c].hi = std::min(n, (c + 1) * lines / spec_.cores * 8);
    }
    totals_.expected_bytes = n * arrays * 8 * spec_.iterations;
    iteration_ = 0;
    start_iteration();
}

void StreamWorkload::start_iteration()
{
    for (auto& c : cores_) {
        c.next_elem = c.lo;
        c.next_slot = 0;
        c.stores.clear();
        c.elems.clear();
        c.inflight.clear();
        c.stores_done = 0;
        c.at_barrier = c.lo == c.hi;
    }
}

WorkloadPoll StreamWorkload::peek(unsigned core)
{
    WorkloadPoll p;
    if (core >= cores_.size() || iteration_ >= spec_.iterations)
        return p;
    auto& c = cores_[core];
    if (c.at_barrier) {
        p.kind = WorkloadPoll::Kind::Stalled;
        return p;
    }
    if (!c.stores.empty()) {
        p.kind = WorkloadPoll::Kind::Ready;
        p.op = MemOp::Store;
        p.addr = paddr(store_array(), c.stores.front().first);
        p.value = c.stores.front().second;
        return p;
    }
    if (c.next_elem < c.hi) {
        p.kind = WorkloadPoll::Kind::Ready;
        p.op = MemOp::Load;
        p.addr = paddr(load_array(c.next_slot), c.next_elem);
        return p;
    }
    p.kind = WorkloadPoll::Kind::Stalled;
    return p;
}

void StreamWorkload::issued(unsigned core, std::uint64_t id)
{
    auto& c = cores_.at(core);
    if (!c.stores.empty()) {
        c.inflight.emplace(id, Op{c.stores.front().first, -1});
        c.stores.pop_front();
        return;
    }
    if (c.next_elem >= c.hi)
        throw Error(Errc::SimulationError, fmt::format("core {} issued with nothing ready", core));
    if (c.next_slot == 0)
        c.elems[c.next_elem].loads_left = loads_per_elem();
    c.inflight.emplace(id, Op{c.next_elem, static_cast<int>(c.next_slot)});
    if (++c.next_slot == loads_per_elem()) {
        c.next_slot = 0;
        ++c.next_elem;
    }
}

void StreamWorkload::completed(const MemRequest& req, Tick now)
{
    (void)now;
    account(req);
    auto& c = cores_.at(req.core);
    auto node = c.inflight.extract(req.id);
    if (node.empty())
        throw Error(Errc::SimulationError, fmt::format("completion for unknown request {}", req.id));
    const Op op = node.mapped();
    if (op.slot >= 0) {
        auto& e = c.elems.at(op.elem);
        e.v[op.slot] = req.value;
        if (--e.loads_left == 0) {
            c.stores.emplace_back(op.elem, compute(e.v));
            c.elems.erase(op.elem);
        }
        return;
    }
    if (++c.stores_done < c.hi - c.lo)
        return;
    c.at_barrier = true;
    if (std::all_of(cores_.begin(), cores_.end(), [](const Core& k) { return k.at_barrier; })) {
        end_pass();
        if (++iteration_ < spec_.iterations)
            start_iteration();
    }
}

void StreamWorkload::verify(WorkloadHost& host)
{
    const unsigned dst = store_array();
    for (std::uint64_t i = 0; i < spec_.array_elems; ++i) {
        const auto got = host.coherent_read(paddr(dst, i));
        if (got != expected(i)) {
            totals_.check_passed = false;
            totals_.check_detail = fmt::format("element {} holds {:#x}, expected {:#x}", i, got, expected(i));
            return;
        }
    }
    totals_.check_passed = true;
}

// ---------------------------------------------------------------- pointer chase

PointerChaseWorkload::PointerChaseWorkload(std::uint64_t elems, std::uint64_t stride, Pool pool, bool shuffle,
                                           std::uint64_t seed)
    : elems_(elems), stride_(stride), pool_(pool), shuffle_(shuffle), seed_(seed)
{
    if (elems_ < 2)
        throw Error(Errc::InsufficientChain, fmt::format("a pointer chase needs at least 2 elements, got {}", elems_));
    if (stride_ == 0 || stride_ % 8 != 0)
        throw Error(Errc::ConfigError, fmt::format("pointer chase stride {} must be a positive multiple of 8", stride_));
}

std::uint64_t PointerChaseWorkload::node_paddr(std::uint64_t k) const
{
    const std::uint64_t vaddr = order_.at(k) * stride_;
    return page_table_.at(vaddr / page_size_) + vaddr % page_size_;
}

void PointerChaseWorkload::bind(WorkloadHost& host)
{
    auto& map = host.address_map();
    page_size_ = map.page_size();
    const std::uint64_t pages = (elems_ * stride_ + page_size_ - 1) / page_size_;
    page_table_.resize(pages);
    for (auto& p : page_table_)
        p = map.allocate(pool_);
    order_.resize(elems_);
    for (std::uint64_t k = 0; k < elems_; ++k)
        order_[k] = k;
    if (shuffle_) {
        std::mt19937_64 rng(seed_);
        std::shuffle(order_.begin(), order_.end(), rng);
    }
    for (std::uint64_t k = 0; k < elems_; ++k)
        host.backdoor_write(node_paddr(k), k + 1 < elems_ ? node_paddr(k + 1) : 0);
    totals_.expected_bytes = elems_ * 8;
}

WorkloadPoll PointerChaseWorkload::peek(unsigned core)
{
    WorkloadPoll p;
    if (core != 0 || next_ >= elems_)
        return p;
    if (outstanding_) {
        p.kind = WorkloadPoll::Kind::Stalled;
        return p;
    }
    p.kind = WorkloadPoll::Kind::Ready;
    p.op = MemOp::Load;
    p.addr = next_ == 0 ? node_paddr(0) : current_addr_;
    return p;
}

void PointerChaseWorkload::issued(unsigned core, std::uint64_t id)
{
    (void)core;
    (void)id;
    outstanding_ = true;
}

void PointerChaseWorkload::completed(const MemRequest& req, Tick now)
{
    account(req);
    latencies_.push_back(now - req.issue_time);
    const std::uint64_t want = next_ + 1 < elems_ ? node_paddr(next_ + 1) : 0;
    if (req.value != want)
        chain_ok_ = false;
    current_addr_ = req.value;
    outstanding_ = false;
    if (++next_ == elems_)
        end_pass();
}

void PointerChaseWorkload::verify(WorkloadHost& host)
{
    (void)host;
    totals_.check_passed = chain_ok_ && next_ == elems_;
    if (!chain_ok_)
        totals_.check_detail = "a load returned the wrong next-node address";
}

// ---------------------------------------------------------------- traces

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::uint64_t parse_num(std::string_view s, std::size_t line, std::string_view field)
{
    s = trim(s);
    int base = 10;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
        s.remove_prefix(2);
        base = 16;
    }
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        throw Error(Errc::ParseError, fmt::format("trace line {}: {} '{}' is not a number", line, field, s));
    return v;
}

MemOp parse_op(std::string_view s, std::size_t line)
{
    std::string t(trim(s));
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (t == "load" || t == "l" || t == "r" || t == "read")
        return MemOp::Load;
    if (t == "store" || t == "s" || t == "w" || t == "write")
        return MemOp::Store;
    throw Error(Errc::ParseError, fmt::format("trace line {}: unknown op '{}'", line, s));
}

} // namespace

std::vector<TraceRecord> parse_trace(std::istream& in)
{
    std::vector<TraceRecord> out;
    std::string raw;
    std::size_t line = 0;
    bool seen_content = false;
    while (std::getline(in, raw)) {
        ++line;
        const auto text = trim(raw);
        if (text.empty() || text.front() == '#')
            continue;
        if (!seen_content) {
            seen_content = true;
            if (!std::isdigit(static_cast<unsigned char>(text.front())))
                continue; // header
        }
        std::vector<std::string_view> f;
        std::size_t start = 0;
        while (true) {
            const auto comma = text.find(',', start);
            f.push_back(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos)
                break;
            start = comma + 1;
        }
        if (f.size() != 5)
            throw Error(Errc::ParseError, fmt::format("trace line {}: expected 5 fields, found {}", line, f.size()));
        TraceRecord r;
        r.tick = parse_num(f[0], line, "tick");
        r.core = static_cast<unsigned>(parse_num(f[1], line, "core"));
        r.op = parse_op(f[2], line);
        r.addr = parse_num(f[3], line, "addr");
        const auto size = parse_num(f[4], line, "size");
        if (size == 0 || size > kLineBytes)
            throw Error(Errc::ParseError, fmt::format("trace line {}: size {} must be 1..64", line, size));
        r.size = static_cast<std::uint32_t>(size);
        if (r.addr % kLineBytes + r.size > kLineBytes)
            throw Error(Errc::ParseError, fmt::format("trace line {}: access crosses a cache line", line));
        if (!out.empty() && r.tick < out.back().tick)
            throw Error(Errc::ParseError, fmt::format("trace line {}: tick {} is earlier than the previous record's {}",
                                                      line, r.tick, out.back().tick));
        out.push_back(r);
    }
    return out;
}

std::vector<TraceRecord> load_trace(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::IoError, fmt::format("cannot open trace '{}'", path));
    return parse_trace(in);
}

TraceWorkload::TraceWorkload(std::vector<TraceRecord> records, InterleavePolicy policy)
    : records_(std::move(records)), policy_(policy)
{
}

std::uint64_t TraceWorkload::translate(std::uint64_t vaddr) const
{
    return page_table_.at(vaddr / page_size_) + vaddr % page_size_;
}

void TraceWorkload::bind(WorkloadHost& host)
{
    auto& map = host.address_map();
    page_size_ = map.page_size();
    std::set<std::uint64_t> pages;
    per_core_.assign(host.cores(), {});
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        if (r.core >= host.cores())
            throw Error(Errc::ConfigError,
                        fmt::format("trace record {} targets core {} but the machine has {}", i, r.core, host.cores()));
        pages.insert(r.addr / page_size_);
        per_core_[r.core].push_back(i);
        totals_.expected_bytes += r.size;
    }
    for (auto vp : pages)
        page_table_[vp] = map.map_page(vp, policy_);
    remaining_ = records_.size();
}

WorkloadPoll TraceWorkload::peek(unsigned core)
{
    WorkloadPoll p;
    if (core >= per_core_.size() || per_core_[core].empty())
        return p;
    const auto& r = records_[per_core_[core].front()];
    p.kind = WorkloadPoll::Kind::Ready;
    p.op = r.op;
    p.addr = translate(r.addr);
    p.size = r.size;
    p.value = per_core_[core].front() + 1;
    p.not_before = r.tick;
    return p;
}

void TraceWorkload::issued(unsigned core, std::uint64_t id)
{
    (void)id;
    per_core_.at(core).pop_front();
    ++outstanding_;
}

void TraceWorkload::completed(const MemRequest& req, Tick now)
{
    (void)now;
    account(req);
    --outstanding_;
    if (--remaining_ == 0)
        end_pass();
}

} // namespace cxlsim
