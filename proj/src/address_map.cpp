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

#include "cxlsim/address_map.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>

#include <fmt/format.h>

#include "cxlsim/error.hpp"

namespace cxlsim {

std::string_view to_string(RegionKind kind)
{
    switch (kind) {
    case RegionKind::SystemDram: return "SystemDram";
    case RegionKind::CxlWindow: return "CxlWindow";
    case RegionKind::Reserved: return "Reserved";
    case RegionKind::Mmio: return "Mmio";
    }
    return "?";
}

std::string_view to_string(NumaMode mode) { return mode == NumaMode::Znuma ? "znuma" : "flat"; }
std::string_view to_string(Pool pool) { return pool == Pool::Dram ? "dram" : "cxl"; }

std::uint64_t NumaNode::bytes() const
{
    std::uint64_t total = 0;
    for (const auto& r : regions)
        total += r.size;
    return total;
}

const NumaNode* NumaTopology::node(unsigned id) const
{
    for (const auto& n : nodes)
        if (n.node_id == id)
            return &n;
    return nullptr;
}

InterleavePolicy::InterleavePolicy(std::uint64_t dram_weight, std::uint64_t cxl_weight, std::uint64_t page_size)
    : page_size_(page_size)
{
    if (dram_weight < 1)
        throw Error(Errc::ConfigError, "interleave dram_weight must be >= 1");
    if (!is_pow2_page(page_size))
        throw Error(Errc::ConfigError, fmt::format("page size {} must be a power of two >= 4096", page_size));
    const std::uint64_t g = std::gcd(dram_weight, cxl_weight);
    dram_ = dram_weight / g;
    cxl_ = cxl_weight / g;
}

bool InterleavePolicy::is_pow2_page(std::uint64_t page_size) { return page_size >= kPageBytes && (page_size & (page_size - 1)) == 0; }

InterleavePolicy InterleavePolicy::parse(std::string_view text, std::uint64_t page_size)
{
    const auto colon = text.find(':');
    auto parse_u64 = [&](std::string_view s) {
        std::uint64_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
            throw Error(Errc::ConfigError, fmt::format("interleave '{}' is not of the form a:b", text));
        return v;
    };
    if (colon == std::string_view::npos)
        throw Error(Errc::ConfigError, fmt::format("interleave '{}' is not of the form a:b", text));
    return InterleavePolicy(parse_u64(text.substr(0, colon)), parse_u64(text.substr(colon + 1)), page_size);
}

std::string InterleavePolicy::to_string() const { return fmt::format("{}:{}", dram_, cxl_); }

Pool assign_page(std::uint64_t page_index, const InterleavePolicy& policy)
{
    return page_index % policy.period() < policy.dram_weight() ? Pool::Dram : Pool::Cxl;
}

std::optional<HdmTarget> decode_hdm(std::uint64_t host_addr, std::span<const HdmDecoder> decoders)
{
    std::optional<HdmTarget> hit;
    for (const auto& d : decoders) {
        if (!d.enabled || !d.contains(host_addr))
            continue;
        if (hit)
            return std::nullopt;
        hit = HdmTarget{d.target_device, host_addr - d.base};
    }
    return hit;
}

namespace {

bool overlaps(std::uint64_t a_base, std::uint64_t a_size, std::uint64_t b_base, std::uint64_t b_size)
{
    return a_base < b_base + b_size && b_base < a_base + a_size;
}

std::string describe(const HdmDecoder& d)
{
    return fmt::format("decoder {}.{} [{:#x}, {:#x})", d.target_device, d.index, d.base, d.end());
}

} // namespace

std::vector<std::string> check_decoders(std::span<const HdmDecoder> decoders)
{
    std::vector<std::string> out;
    for (std::size_t i = 0; i < decoders.size(); ++i) {
        const auto& d = decoders[i];
        if (!d.enabled)
            continue;
        if (d.size == 0)
            out.push_back(fmt::format("{} has zero size", describe(d)));
        if (d.base % kHdmGranularity != 0 || d.size % kHdmGranularity != 0)
            out.push_back(fmt::format("{} is not 256 MiB aligned", describe(d)));
        for (std::size_t j = 0; j < i; ++j) {
            const auto& e = decoders[j];
            if (e.enabled && overlaps(d.base, d.size, e.base, e.size))
                out.push_back(fmt::format("{} overlaps {}", describe(d), describe(e)));
        }
    }
    return out;
}

AddressMap::AddressMap(std::vector<PhysRegion> regions, std::vector<HdmDecoder> decoders, NumaMode mode,
                       std::set<unsigned> cpu_nodes, std::uint64_t page_size)
    : regions_(std::move(regions)), decoders_(std::move(decoders)), mode_(mode), cpu_nodes_(std::move(cpu_nodes)),
      page_size_(page_size)
{
    sort_regions();
}

void AddressMap::sort_regions()
{
    std::stable_sort(regions_.begin(), regions_.end(),
                     [](const PhysRegion& a, const PhysRegion& b) { return a.base < b.base; });
}

std::vector<std::string> AddressMap::violations() const
{
    std::vector<std::string> out;
    if (!InterleavePolicy::is_pow2_page(page_size_))
        out.push_back(fmt::format("page size {} must be a power of two >= 4096", page_size_));
    const std::uint64_t align = std::max<std::uint64_t>(kPageBytes, page_size_);
    std::set<unsigned> dram_nodes;
    for (const auto& r : regions_)
        if (r.kind == RegionKind::SystemDram && r.numa_node)
            dram_nodes.insert(*r.numa_node);
    bool has_cxl = false;
    std::size_t cpuless_cxl = 0;

    for (std::size_t i = 0; i < regions_.size(); ++i) {
        const auto& r = regions_[i];
        const auto label = fmt::format("region '{}' [{:#x}, {:#x})", r.name, r.base, r.end());
        if (r.size == 0)
            out.push_back(fmt::format("{} has zero size", label));
        if (r.base % align != 0 || r.size % align != 0)
            out.push_back(fmt::format("{} is not {}-byte aligned", label, align));
        if (r.base + r.size < r.base)
            out.push_back(fmt::format("{} wraps the address space", label));
        const bool memory = r.kind == RegionKind::SystemDram || r.kind == RegionKind::CxlWindow;
        if (memory && !r.numa_node)
            out.push_back(fmt::format("{} needs a NUMA node", label));
        if (!memory && r.numa_node)
            out.push_back(fmt::format("{} ({}) must not carry a NUMA node", label, to_string(r.kind)));
        for (std::size_t j = 0; j < i; ++j)
            if (overlaps(r.base, r.size, regions_[j].base, regions_[j].size))
                out.push_back(fmt::format("{} overlaps region '{}'", label, regions_[j].name));

        if (r.kind == RegionKind::CxlWindow) {
            has_cxl = true;
            std::size_t covering = 0;
            for (const auto& d : decoders_)
                if (d.enabled && r.base >= d.base && r.end() <= d.end())
                    ++covering;
            if (covering != 1)
                out.push_back(fmt::format("{} is covered by {} enabled HDM decoders (expected exactly 1)", label,
                                          covering));
            if (r.numa_node) {
                // zNUMA mode tolerates a flat remainder on a DRAM node.
                if (mode_ == NumaMode::Znuma && cpu_nodes_.contains(*r.numa_node) && !dram_nodes.contains(*r.numa_node))
                    out.push_back(fmt::format("{} is on CPU node {} which has no system DRAM", label, *r.numa_node));
                if (!cpu_nodes_.contains(*r.numa_node) && !dram_nodes.contains(*r.numa_node))
                    ++cpuless_cxl;
                if (mode_ == NumaMode::Flat && !dram_nodes.contains(*r.numa_node))
                    out.push_back(fmt::format("{} is on node {} but flat mode requires a system DRAM node", label,
                                              *r.numa_node));
            }
        }
    }
    if (mode_ == NumaMode::Znuma && has_cxl && cpuless_cxl == 0)
        out.push_back("znuma mode needs at least one CXL region on a CPU-less node");
    for (auto& msg : check_decoders(decoders_))
        out.push_back(std::move(msg));
    return out;
}

void AddressMap::validate() const
{
    const auto v = violations();
    if (v.empty())
        return;
    std::string msg = "address map is inconsistent:";
    for (const auto& s : v)
        msg += "\n  - " + s;
    throw Error(Errc::ConfigError, msg);
}

const PhysRegion* AddressMap::region_at(std::uint64_t addr) const
{
    auto it = std::upper_bound(regions_.begin(), regions_.end(), addr,
                               [](std::uint64_t a, const PhysRegion& r) { return a < r.base; });
    if (it == regions_.begin())
        return nullptr;
    --it;
    return it->contains(addr) ? &*it : nullptr;
}

RegionKind AddressMap::classify(std::uint64_t addr) const
{
    const auto* r = region_at(addr);
    return r != nullptr ? r->kind : RegionKind::Reserved;
}

std::vector<std::size_t> AddressMap::pool_regions(Pool pool) const
{
    const RegionKind kind = pool == Pool::Dram ? RegionKind::SystemDram : RegionKind::CxlWindow;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < regions_.size(); ++i)
        if (regions_[i].kind == kind)
            out.push_back(i);
    return out;
}

std::uint64_t AddressMap::allocate(Pool pool)
{
    auto& cur = cursors_[static_cast<int>(pool)];
    const auto idx = pool_regions(pool);
    while (cur.region < idx.size()) {
        const auto& r = regions_[idx[cur.region]];
        if (cur.offset + page_size_ <= r.size) {
            const std::uint64_t addr = r.base + cur.offset;
            cur.offset += page_size_;
            ++cur.allocated;
            return addr;
        }
        ++cur.region;
        cur.offset = 0;
    }
    throw Error(Errc::PoolExhausted, fmt::format("{} pool has no free pages after {} allocations", to_string(pool),
                                                 cur.allocated));
}

std::uint64_t AddressMap::map_page(std::uint64_t page_index, const InterleavePolicy& policy)
{
    return allocate(assign_page(page_index, policy));
}

std::uint64_t AddressMap::pages_allocated(Pool pool) const { return cursors_[static_cast<int>(pool)].allocated; }

std::uint64_t AddressMap::pool_pages(Pool pool) const
{
    std::uint64_t n = 0;
    for (auto i : pool_regions(pool))
        n += regions_[i].size / page_size_;
    return n;
}

const HdmDecoder* AddressMap::find_decoder(unsigned device, unsigned index) const
{
    for (const auto& d : decoders_)
        if (d.target_device == device && d.index == index)
            return &d;
    return nullptr;
}

void AddressMap::commit_decoder(const HdmDecoder& decoder)
{
    std::vector<HdmDecoder> next = decoders_;
    auto it = std::find_if(next.begin(), next.end(), [&](const HdmDecoder& d) {
        return d.target_device == decoder.target_device && d.index == decoder.index;
    });
    if (it != next.end())
        *it = decoder;
    else
        next.push_back(decoder);

    if (decoder.enabled) {
        if (decoder.size == 0 || decoder.base % kHdmGranularity != 0 || decoder.size % kHdmGranularity != 0)
            throw Error(Errc::MisalignedSize, fmt::format("{} is not a non-empty 256 MiB aligned window", describe(decoder)));
        for (const auto& d : next) {
            if (d.enabled && !(d.target_device == decoder.target_device && d.index == decoder.index) &&
                overlaps(d.base, d.size, decoder.base, decoder.size))
                throw Error(Errc::DecoderOverlap, fmt::format("{} overlaps {}", describe(decoder), describe(d)));
        }
    }
    decoders_ = std::move(next);
}

void AddressMap::disable_decoder(unsigned device, unsigned index)
{
    for (auto& d : decoders_)
        if (d.target_device == device && d.index == index)
            d.enabled = false;
}

void AddressMap::add_region(PhysRegion region)
{
    if (cursors_[0].allocated != 0 || cursors_[1].allocated != 0)
        throw Error(Errc::InvalidArgument, "regions cannot change once pages are allocated");
    for (const auto& r : regions_)
        if (overlaps(r.base, r.size, region.base, region.size))
            throw Error(Errc::ConfigError, fmt::format("region '{}' overlaps region '{}'", region.name, r.name));
    regions_.push_back(std::move(region));
    sort_regions();
}

void AddressMap::remove_regions_of_device(unsigned device)
{
    if (cursors_[0].allocated != 0 || cursors_[1].allocated != 0)
        throw Error(Errc::InvalidArgument, "regions cannot change once pages are allocated");
    std::erase_if(regions_, [&](const PhysRegion& r) {
        if (r.kind != RegionKind::CxlWindow)
            return false;
        auto t = decode(r.base);
        return t && t->device == device;
    });
}

NumaTopology AddressMap::topology() const
{
    NumaTopology topo;
    topo.mode = mode_;
    auto node_for = [&](unsigned id) -> NumaNode& {
        for (auto& n : topo.nodes)
            if (n.node_id == id)
                return n;
        topo.nodes.push_back(NumaNode{id, cpu_nodes_.contains(id), {}});
        return topo.nodes.back();
    };
    for (unsigned id : cpu_nodes_)
        node_for(id);
    for (const auto& r : regions_)
        if (r.numa_node)
            node_for(*r.numa_node).regions.push_back(r);
    std::sort(topo.nodes.begin(), topo.nodes.end(),
              [](const NumaNode& a, const NumaNode& b) { return a.node_id < b.node_id; });
    return topo;
}

} // namespace cxlsim
