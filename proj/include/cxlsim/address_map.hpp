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
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cxlsim {

inline constexpr std::uint64_t kPageBytes = 4096;
inline constexpr std::uint64_t kHdmGranularity = 256ull << 20;

enum class RegionKind : std::uint8_t { SystemDram, CxlWindow, Reserved, Mmio };
enum class NumaMode : std::uint8_t { Znuma, Flat };
enum class Pool : std::uint8_t { Dram, Cxl };

std::string_view to_string(RegionKind kind);
std::string_view to_string(NumaMode mode);
std::string_view to_string(Pool pool);

struct PhysRegion {
    std::string name;
    std::uint64_t base = 0;
    std::uint64_t size = 0;
    RegionKind kind = RegionKind::Reserved;
    std::optional<unsigned> numa_node;

    std::uint64_t end() const { return base + size; }
    bool contains(std::uint64_t addr) const { return addr >= base && addr - base < size; }
    friend bool operator==(const PhysRegion&, const PhysRegion&) = default;
};

struct HdmDecoder {
    unsigned index = 0;
    std::uint64_t base = 0;
    std::uint64_t size = 0;
    unsigned target_device = 0;
    bool enabled = false;

    std::uint64_t end() const { return base + size; }
    bool contains(std::uint64_t addr) const { return addr >= base && addr - base < size; }
    friend bool operator==(const HdmDecoder&, const HdmDecoder&) = default;
};

struct NumaNode {
    unsigned node_id = 0;
    bool has_cpus = false;
    std::vector<PhysRegion> regions;

    std::uint64_t bytes() const;
};

struct NumaTopology {
    std::vector<NumaNode> nodes;
    NumaMode mode = NumaMode::Znuma;

    const NumaNode* node(unsigned id) const;
};

/// Weighted page interleave between system DRAM and CXL memory. Weights are
/// kept gcd-reduced, so 2:2 and 1:1 describe the same policy.
class InterleavePolicy {
public:
    InterleavePolicy(std::uint64_t dram_weight, std::uint64_t cxl_weight, std::uint64_t page_size = kPageBytes);

    /// Parses "a:b".
    static InterleavePolicy parse(std::string_view text, std::uint64_t page_size = kPageBytes);

    std::uint64_t dram_weight() const { return dram_; }
    std::uint64_t cxl_weight() const { return cxl_; }
    std::uint64_t period() const { return dram_ + cxl_; }
    std::uint64_t page_size() const { return page_size_; }
    std::string to_string() const;

    static bool is_pow2_page(std::uint64_t page_size);

    friend bool operator==(const InterleavePolicy&, const InterleavePolicy&) = default;

private:
    std::uint64_t dram_;
    std::uint64_t cxl_;
    std::uint64_t page_size_;
};

/// Deterministic weighted round-robin: in every window of (a + b) pages the
/// first a go to DRAM and the remaining b to CXL.
Pool assign_page(std::uint64_t page_index, const InterleavePolicy& policy);

struct HdmTarget {
    unsigned device = 0;
    std::uint64_t offset = 0;
    friend bool operator==(const HdmTarget&, const HdmTarget&) = default;
};

/// Returns the target of the single enabled decoder containing host_addr.
std::optional<HdmTarget> decode_hdm(std::uint64_t host_addr, std::span<const HdmDecoder> decoders);

/// Collects HDM decoder invariant violations (alignment, overlap), one message each.
std::vector<std::string> check_decoders(std::span<const HdmDecoder> decoders);

/// Physical address space: E820-style regions, HDM decoders, NUMA assignment
/// and the page allocator backing the interleave policy.
class AddressMap {
public:
    AddressMap(std::vector<PhysRegion> regions, std::vector<HdmDecoder> decoders, NumaMode mode,
               std::set<unsigned> cpu_nodes = {0}, std::uint64_t page_size = kPageBytes);

    /// Every violated invariant, empty when the map is consistent.
    std::vector<std::string> violations() const;
    /// Throws ConfigError listing all violations.
    void validate() const;

    RegionKind classify(std::uint64_t addr) const;
    const PhysRegion* region_at(std::uint64_t addr) const;

    std::optional<HdmTarget> decode(std::uint64_t addr) const { return decode_hdm(addr, decoders_); }

    /// Next-lowest free page in the pool chosen by the policy for page_index.
    std::uint64_t map_page(std::uint64_t page_index, const InterleavePolicy& policy);
    /// Next-lowest free page in an explicit pool. Throws PoolExhausted.
    std::uint64_t allocate(Pool pool);
    std::uint64_t pages_allocated(Pool pool) const;
    std::uint64_t pool_pages(Pool pool) const;

    /// Commits or replaces decoder (target_device, index). Throws
    /// DecoderOverlap or MisalignedSize and leaves the map unchanged.
    void commit_decoder(const HdmDecoder& decoder);
    void disable_decoder(unsigned device, unsigned index);
    const HdmDecoder* find_decoder(unsigned device, unsigned index) const;

    /// Adds a region; throws ConfigError when it overlaps an existing one.
    void add_region(PhysRegion region);
    void remove_regions_of_device(unsigned device);

    NumaTopology topology() const;

    NumaMode mode() const { return mode_; }
    void set_mode(NumaMode mode) { mode_ = mode; }
    const std::set<unsigned>& cpu_nodes() const { return cpu_nodes_; }
    std::uint64_t page_size() const { return page_size_; }
    const std::vector<PhysRegion>& regions() const { return regions_; }
    const std::vector<HdmDecoder>& decoders() const { return decoders_; }

private:
    struct Cursor {
        std::size_t region = 0;
        std::uint64_t offset = 0;
        std::uint64_t allocated = 0;
    };

    std::vector<std::size_t> pool_regions(Pool pool) const;
    void sort_regions();

    std::vector<PhysRegion> regions_;
    std::vector<HdmDecoder> decoders_;
    NumaMode mode_;
    std::set<unsigned> cpu_nodes_;
    std::uint64_t page_size_;
    Cursor cursors_[2];
};

} // namespace cxlsim
