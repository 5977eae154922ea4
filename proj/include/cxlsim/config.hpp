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
#include "cxlsim/cxl_device.hpp"
#include "cxlsim/cxl_protocol.hpp"
#include "cxlsim/firmware_tables.hpp"
#include "cxlsim/workloads.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace cxlsim {

inline constexpr int kConfigSchemaVersion = 1;

struct CpuConfig {
    unsigned cores = 1;
    unsigned window = 16;
    Tick issue_interval = 500;
};

struct DramConfig {
    Tick membus = 5'000;
    Tick read = 45'000;
    Tick write = 45'000;
};

constexpr Tick dram_read_path(const DramConfig& d) { return d.membus + d.read; }

struct TopologyConfig {
    std::vector<PhysRegion> regions;
    std::vector<HdmDecoder> decoders;
    NumaMode mode = NumaMode::Znuma;
    std::set<unsigned> cpu_nodes{0};
    std::uint64_t page_size = kPageBytes;
    std::vector<DeviceConfig> devices;
    PlatformDesc platform;
};

struct StreamWorkloadConfig {
    StreamKernel kernel = StreamKernel::Triad;
    std::optional<std::uint64_t> array_elems;
    double footprint_x_l2 = 2.0;
    unsigned iterations = 2;
    std::uint64_t scalar = 3;
    unsigned cores = 0; // 0: every core
};

struct ChaseWorkloadConfig {
    std::uint64_t elems = 2;
    std::uint64_t stride = 64;
    Pool pool = Pool::Cxl;
    bool shuffle = false;
};

struct TraceWorkloadConfig {
    std::string path;
};

using WorkloadConfig = std::variant<StreamWorkloadConfig, ChaseWorkloadConfig, TraceWorkloadConfig>;

struct RunConfig {
    std::string name = "run";
    std::uint64_t seed = 1;
    Tick max_ticks = 10'000'000'000'000ull; // 10 s of simulated time
    bool strict = true;
    TopologyConfig topology;
    CpuConfig cpu;
    HierarchyConfig caches;
    DramConfig dram;
    LatencyConfig latency;
    InterleavePolicy interleave{1, 0};
    WorkloadConfig workload;
    std::string base_dir; // resolves relative trace paths
};

/// Parse outcome. `violations` lists every problem with its config path; a
/// config is usable only when it is empty.
struct ConfigLoad {
    std::optional<RunConfig> config;
    std::vector<std::string> violations;
};

/// Throws ParseError on malformed JSON text.
nlohmann::json read_json_file(const std::string& path);

/// Structural decode plus semantic validation of the whole document.
ConfigLoad parse_run_config(const nlohmann::json& doc, std::string base_dir = ".");
ConfigLoad load_run_config(const std::string& path);

/// Semantic checks across modules (address map, decoders, devices, caches).
std::vector<std::string> validate_run_config(const RunConfig& cfg);

/// Canonical JSON form; parse_run_config(to_json(c)) reproduces c.
nlohmann::ordered_json to_json(const RunConfig& cfg);

/// Parses sizes given as integers or strings such as "0x1000", "512MiB", "1GiB".
std::optional<std::uint64_t> parse_size(const nlohmann::json& v);

std::string resolve_path(const RunConfig& cfg, const std::string& path);

/// Default desk-scale machine: 2 GiB DRAM on node 0 and one 1 GiB CXL
/// expander onlined as a CPU-less node 1.
RunConfig default_run_config();

} // namespace cxlsim
