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

#include <stdexcept>
#include <string>
#include <string_view>

namespace cxlsim {

enum class Errc {
    SchedulingInPast,
    TickOverflow,
    PoolExhausted,
    TagExhausted,
    AddressOutOfRange,
    UnknownTag,
    ProtocolViolation,
    Misaligned,
    OutOfRange,
    DecoderOverlap,
    MailboxBusy,
    ExceedsCapacity,
    MisalignedSize,
    InconsistentTopology,
    BadSignature,
    BadChecksum,
    TruncatedTable,
    BadStructure,
    InsufficientChain,
    ParseError,
    ConfigError,
    IoError,
    DeviceNotFound,
    InvalidArgument,
    SimulationError,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure the simulator reports is an Error carrying a stable code;
/// the message is for humans, the code is for callers and tests.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code)
    {
    }

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace cxlsim
