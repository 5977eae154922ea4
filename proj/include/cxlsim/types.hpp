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

#include <array>
#include <cstdint>
#include <string_view>

namespace cxlsim {

/// Simulated time in picoseconds since the start of the run.
using Tick = std::uint64_t;

inline constexpr Tick kTicksPerNs = 1000;
inline constexpr std::uint64_t kLineBytes = 64;
inline constexpr std::uint64_t KiB = 1024;
inline constexpr std::uint64_t MiB = 1024 * KiB;
inline constexpr std::uint64_t GiB = 1024 * MiB;

/// Converts a nanosecond latency to ticks. Throws ConfigError when the
/// value is negative or not a whole number of picoseconds.
Tick ns_to_ticks(double ns);

constexpr double ticks_to_ns(Tick t) { return static_cast<double>(t) / kTicksPerNs; }

using LineData = std::array<std::uint8_t, kLineBytes>;

enum class MemOp : std::uint8_t { Load, Store };

constexpr std::string_view to_string(MemOp op) { return op == MemOp::Load ? "Load" : "Store"; }

/// One load or store. `value` carries the store data on the way down and
/// the loaded data on the way back (little-endian, first min(size, 8) bytes).
struct MemRequest {
    std::uint64_t id = 0;
    unsigned core = 0;
    MemOp op = MemOp::Load;
    std::uint64_t addr = 0;
    std::uint32_t size = 8;
    Tick issue_time = 0;
    std::uint64_t value = 0;

    friend bool operator==(const MemRequest&, const MemRequest&) = default;
};

constexpr std::uint64_t line_of(std::uint64_t addr) { return addr & ~(kLineBytes - 1); }

constexpr bool is_pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

} // namespace cxlsim
