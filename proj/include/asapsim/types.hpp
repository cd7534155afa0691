#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace asapsim {

using Cycle = std::uint64_t;
using LineAddr = std::uint64_t;   // cache-line number (byte address >> 6)
using Word = std::uint64_t;
using LockId = std::uint64_t;
using ThreadId = std::uint32_t;

inline constexpr int kWordsPerLine = 8;            // 64-byte line, 8-byte words
inline constexpr int kLineShift = 6;
inline constexpr Cycle kNoCycle = std::numeric_limits<Cycle>::max();

using LineWords = std::array<Word, kWordsPerLine>;

inline LineWords zero_line() { return LineWords{}; }

// Identity of an atomic region: owning thread plus per-thread sequence number.
struct RegionId {
    ThreadId thread = 0;
    std::uint32_t seq = 0;

    auto operator<=>(const RegionId&) const = default;
};

inline std::string to_string(const RegionId& r) {
    return "r" + std::to_string(r.thread) + "." + std::to_string(r.seq);
}

// Simulation failures that abort a run (not recoverable inside the run).
class SimError : public std::runtime_error {
public:
    enum class Kind {
        InvalidTrace,
        LogFullDeadlock,
        LockDeadlock,
        DependenceCycle,
        Internal,
    };

    SimError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

}  // namespace asapsim

template <>
struct std::hash<asapsim::RegionId> {
    std::size_t operator()(const asapsim::RegionId& r) const noexcept {
        return (static_cast<std::size_t>(r.thread) << 32) ^ r.seq;
    }
};
