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
#include <random>
#include <set>
#include <string>

#include "cxlsim/address_map.hpp"
#include "cxlsim/firmware_tables.hpp"
#include "cxlsim/types.hpp"

namespace cxlsim::test {

struct Topology {
    AddressMap map;
    PlatformDesc platform;
};

/// Random but valid platform: one or two CPU nodes with DRAM, up to three
/// expanders each with up to three windows, each window either on its own
/// CPU-less node or folded into a DRAM node.
inline Topology random_topology(std::mt19937_64& rng)
{
    auto pick = [&](std::uint64_t lo, std::uint64_t hi) { return lo + rng() % (hi - lo + 1); };

    std::vector<PhysRegion> regions;
    std::vector<HdmDecoder> decoders;
    PlatformDesc plat;
    plat.cpus.clear();
    plat.host_bridges.clear();

    const unsigned cpu_nodes = static_cast<unsigned>(pick(1, 2));
    std::set<unsigned> cpu_set;
    std::uint64_t at = 0;
    for (unsigned n = 0; n < cpu_nodes; ++n) {
        const std::uint64_t size = pick(1, 6) * 256 * MiB;
        regions.push_back({"dram" + std::to_string(n), at, size, RegionKind::SystemDram, n});
        at += size;
        cpu_set.insert(n);
    }
    const unsigned cpus = static_cast<unsigned>(pick(cpu_nodes, 8));
    for (unsigned c = 0; c < cpus; ++c)
        plat.cpus.push_back({static_cast<std::uint8_t>(c * 2), static_cast<unsigned>(c % cpu_nodes)});

    const std::uint8_t start_bus = static_cast<std::uint8_t>(pick(0, 0x20));
    const std::uint8_t end_bus = static_cast<std::uint8_t>(pick(start_bus, 0xFF));
    plat.ecam = {0xC000'0000, 0, start_bus, end_bus};
    regions.push_back({"ecam", 0xC000'0000, plat.ecam.window_bytes(), RegionKind::Mmio, std::nullopt});

    const unsigned bridges = static_cast<unsigned>(pick(1, 2));
    for (unsigned h = 0; h < bridges; ++h)
        plat.host_bridges.push_back({h + 7, 0xFED0'0000 + h * 0x10000, static_cast<std::uint8_t>(0x10 + h)});
    regions.push_back({"chbs", 0xFED0'0000, 0x10'0000, RegionKind::Mmio, std::nullopt});

    const unsigned devices = static_cast<unsigned>(pick(0, 3));
    std::uint64_t hpa = 0x1'0000'0000;
    unsigned next_node = cpu_nodes;
    for (unsigned d = 0; d < devices; ++d) {
        plat.device_host_bridge[d] = plat.host_bridges[rng() % bridges].uid;
        const unsigned windows = static_cast<unsigned>(pick(1, 3));
        for (unsigned w = 0; w < windows; ++w) {
            const std::uint64_t size = pick(1, 4) * 256 * MiB;
            decoders.push_back({w, hpa, size, d, true});
            const bool flat = rng() % 3 == 0;
            const unsigned node = flat ? static_cast<unsigned>(rng() % cpu_nodes) : next_node++;
            regions.push_back({"cxl" + std::to_string(d) + "." + std::to_string(w), hpa, size, RegionKind::CxlWindow,
                               node});
            hpa += size + pick(0, 2) * 256 * MiB;
        }
    }
    const bool any_cpuless = next_node > cpu_nodes;
    AddressMap map(regions, decoders, any_cpuless ? NumaMode::Znuma : NumaMode::Flat, cpu_set);
    return Topology{std::move(map), std::move(plat)};
}

} // namespace cxlsim::test
