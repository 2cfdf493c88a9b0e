// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace ctxs {

// Malformed circuit/plan/manifest text. offset() is a byte offset into the
// offending text when known, npos otherwise.
class ParseError : public std::runtime_error {
public:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    explicit ParseError(const std::string& msg, std::size_t offset = npos)
        : std::runtime_error(offset == npos ? msg
                                            : msg + " (at offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

class PlanError : public std::runtime_error {
public:
    enum class Kind {
        NegativeLatency,
        TooManyStates,
        BudgetExceeded,
        InvalidCircuit,
        InvalidPlan,
    };

    PlanError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

class CodecError : public std::runtime_error {
public:
    enum class Kind {
        BadMagic,
        BadVersion,
        CircuitDigestMismatch,
        PlanDigestMismatch,
        CrcMismatch,
        Truncated,
        TrailingBytes,
        BadStateIndex,
        NotACheckpoint,
        BadPayloadLength,
        PaddingNotZero,
        ValueOutOfRange,
    };

    CodecError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

class SimError : public std::runtime_error {
public:
    enum class Kind {
        InputUnderrun,
        SteppedHaltState,
        InvalidPlan,
    };

    SimError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

class StorageError : public std::runtime_error {
public:
    enum class Kind {
        Io,
        JobCollision,
        UnknownJob,
        AlreadyClaimed,
        NotClaimHolder,
        StaleSequence,
        Lifecycle,
        InvalidPlan,
    };

    StorageError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

} // namespace ctxs
