#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "asapsim/pm.hpp"
#include "asapsim/types.hpp"

namespace asapsim {

class Machine;

// Everything the machine and schemes jointly track about one atomic region.
struct RegionRecord {
    RegionId id;
    enum class State { Active, Pending, Committed };
    State state = State::Active;
    Cycle begin_cycle = 0;
    Cycle end_cycle = kNoCycle;   // cycle the End instruction started
    Cycle commit_cycle = kNoCycle;
    Cycle end_stall = 0;          // cycles the End instruction spent blocked
    bool ended = false;           // End instruction finished

    std::set<LineAddr> write_set;
    std::set<LineAddr> logged;               // lines with a log entry from this region
    std::vector<std::uint64_t> log_ops;      // LPO ids
    std::vector<std::uint32_t> log_slots;    // ring slots held until freed
    std::vector<std::uint64_t> data_ops;     // DPOs carrying this region's data

    // Outstanding data-persist obligations: line -> the op currently carrying
    // it, or kNoOp if the op was dropped and the obligation floats until the
    // line's next DPO absorbs it.
    static constexpr std::uint64_t kNoOp = UINT64_MAX;
    std::map<LineAddr, std::uint64_t> pending_data;

    std::optional<std::uint64_t> mark_op;
    bool mark_requested = false;
    bool log_freed = false;

    // Dependence edges (populated by the asap scheme).
    std::set<RegionId> depends_on;
    std::set<RegionId> dependents;
    std::set<RegionId> edges_ever;  // every edge ever added, kept for audits

    bool committed() const { return state == State::Committed; }
};

struct StoreAction {
    enum class K { Proceed, WaitOps, WaitLogSpace };
    K k = K::Proceed;
    std::vector<std::uint64_t> ops;

    static StoreAction proceed() { return {}; }
    static StoreAction wait(std::vector<std::uint64_t> ops) {
        return {K::WaitOps, std::move(ops)};
    }
    static StoreAction wait_log_space() { return {K::WaitLogSpace, {}}; }
};

struct EndAction {
    enum class K { Done, WaitOps };
    K k = K::Done;
    std::vector<std::uint64_t> ops;

    static EndAction done() { return {}; }
    static EndAction wait(std::vector<std::uint64_t> ops) {
        return {K::WaitOps, std::move(ops)};
    }
};

// Persistence scheme callbacks, invoked by the machine's event loop. All
// callbacks run in the single simulation thread.
class Scheme {
public:
    virtual ~Scheme() = default;
    virtual std::string name() const = 0;
    virtual LogDiscipline log_discipline() const = 0;

    virtual void on_begin(Machine&, RegionRecord&) {}

    // Called before the store value is applied; the machine's line content
    // still shows the pre-store words. May be re-invoked after a wait.
    virtual StoreAction on_store(Machine&, RegionRecord&, LineAddr, int word, Word value) = 0;

    virtual void on_load(Machine&, RegionRecord&, LineAddr) {}

    // End protocol, driven phase by phase; each WaitOps resumes at phase+1.
    virtual EndAction on_end_step(Machine&, RegionRecord&, int phase) = 0;

    // A dirty victim line leaves the cache. Returns op ids the evicting
    // thread must wait for before proceeding (empty = no stall).
    virtual std::vector<std::uint64_t> on_evict(Machine&, LineAddr line, RegionRecord* writer) = 0;

    virtual void on_persist_complete(Machine&, const PersistOp&) {}
    virtual void on_region_committed(Machine&, RegionRecord&) {}

    // Extra detail for deadlock diagnostics (e.g. a dependence cycle).
    virtual std::string deadlock_detail(Machine&) { return ""; }
};

}  // namespace asapsim
