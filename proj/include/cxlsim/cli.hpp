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

#include "cxlsim/register_layout.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace cxlsim {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1; // semantic or simulation error
inline constexpr int kExitUsage = 2;   // bad arguments or unparsable input

/// Entry point of the `cxlsim` tool. Output goes to `out`, diagnostics to `err`.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Markdown table of a register layout, as committed in docs/register_map.md.
std::string register_map_markdown(const std::vector<RegisterDef>& layout);

} // namespace cxlsim
