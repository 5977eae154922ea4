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

#include "cxlsim/error.hpp"

namespace cxlsim {

std::string_view errc_name(Errc code) noexcept
{
    switch (code) {
    case Errc::SchedulingInPast: return "SchedulingInPast";
    case Errc::TickOverflow: return "TickOverflow";
    case Errc::PoolExhausted: return "PoolExhausted";
    case Errc::TagExhausted: return "TagExhausted";
    case Errc::AddressOutOfRange: return "AddressOutOfRange";
    case Errc::UnknownTag: return "UnknownTag";
    case Errc::ProtocolViolation: return "ProtocolViolation";
    case Errc::Misaligned: return "Misaligned";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::DecoderOverlap: return "DecoderOverlap";
    case Errc::MailboxBusy: return "MailboxBusy";
    case Errc::ExceedsCapacity: return "ExceedsCapacity";
    case Errc::MisalignedSize: return "MisalignedSize";
    case Errc::InconsistentTopology: return "InconsistentTopology";
    case Errc::BadSignature: return "BadSignature";
    case Errc::BadChecksum: return "BadChecksum";
    case Errc::TruncatedTable: return "TruncatedTable";
    case Errc::BadStructure: return "BadStructure";
    case Errc::InsufficientChain: return "InsufficientChain";
    case Errc::ParseError: return "ParseError";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
    case Errc::DeviceNotFound: return "DeviceNotFound";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::SimulationError: return "SimulationError";
    }
    return "Unknown";
}

} // namespace cxlsim
