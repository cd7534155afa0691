#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "asapsim/config.hpp"
#include "asapsim/types.hpp"

namespace asapsim {

enum class PersistKind { Lpo, Dpo, Mark };
enum class TrafficCat { Log, Data, Commit, Evict };
enum class OpState { Queued, Held, InService, Complete, Dropped };

inline const char* to_string(PersistKind k) {
    switch (k) {
        case PersistKind::Lpo: return "LPO";
        case PersistKind::Dpo: return "DPO";
        case PersistKind::Mark: return "MARK";
    }
    return "?";
}

// Reserved per-thread line that commit marks are written to. Far outside any
// data line a trace can address (traces address bytes, so lines < 2^58).
inline LineAddr mark_line(ThreadId t) { return (1ull << 60) + t; }
inline bool is_mark_line(LineAddr l) { return l >= (1ull << 60); }

struct PersistOp {
    std::uint64_t id = 0;
    PersistKind kind = PersistKind::Dpo;
    TrafficCat category = TrafficCat::Data;
    RegionId region;                  // issuing/primary region
    std::vector<RegionId> covers;     // all regions whose obligation this op carries
    LineAddr line = 0;
    std::uint32_t bank = 0;
    LineWords words{};                // LPO pre/post image, DPO data
    std::uint32_t log_slot = 0;       // LPO only
    bool log_redo = false;            // LPO only
    std::uint32_t mark_seq = 0;       // Mark only
    std::vector<std::uint64_t> required_ops;  // must be Complete before service

    Cycle issue_time = 0;
    Cycle service_start = kNoCycle;
    Cycle complete_time = kNoCycle;
    std::uint64_t complete_seq = 0;   // global persist-order stamp (1-based)

    bool dropped = false;

    bool complete() const { return complete_time != kNoCycle; }
    bool in_service() const { return service_start != kNoCycle && !complete(); }
    bool live() const { return !dropped && service_start == kNoCycle; }
};

// A log entry as it exists durably in PM.
struct PLogEntry {
    RegionId region;
    LineAddr line = 0;
    LineWords words{};
    bool redo = false;
    std::uint64_t stamp = 0;  // global persist-order stamp
    std::uint32_t slot = 0;
};

// The durably persisted state: data lines, per-thread log entries, and
// per-thread highest persisted committed sequence number (-1 = none).
struct PMImage {
    std::map<LineAddr, LineWords> data;
    std::vector<std::vector<PLogEntry>> logs;  // per thread, ascending stamp
    std::vector<std::int64_t> commit_marks;

    explicit PMImage(std::uint32_t threads = 0)
        : logs(threads), commit_marks(threads, -1) {}

    // Data restricted to a line universe, absent lines read as zero.
    std::map<LineAddr, LineWords> normalized(const std::set<LineAddr>& universe) const {
        std::map<LineAddr, LineWords> out;
        for (LineAddr l : universe) {
            auto it = data.find(l);
            out[l] = it == data.end() ? LineWords{} : it->second;
        }
        return out;
    }

    bool operator==(const PMImage& o) const {
        return data == o.data && commit_marks == o.commit_marks &&
               logs.size() == o.logs.size() && [&] {
                   for (size_t t = 0; t < logs.size(); ++t) {
                       if (logs[t].size() != o.logs[t].size()) return false;
                       for (size_t i = 0; i < logs[t].size(); ++i) {
                           const auto& a = logs[t][i];
                           const auto& b = o.logs[t][i];
                           if (!(a.region == b.region && a.line == b.line && a.words == b.words &&
                                 a.redo == b.redo && a.stamp == b.stamp && a.slot == b.slot))
                               return false;
                       }
                   }
                   return true;
               }();
    }
};

// Banked PM service queues. Each line maps to bank (line mod banks); each
// bank services ops FIFO, one at a time, pm_write_latency cycles each. The
// only reordering allowed is skipping ops whose required_ops are not yet all
// Complete (the WAL hold rule and the redo hold-on-mark rule).
class PersistEngine {
public:
    PersistEngine(const MachineConfig& cfg, std::uint32_t threads)
        : cfg_(cfg), threads_(threads), banks_(cfg.pm_banks) {}

    std::uint64_t issue(PersistOp op, Cycle now) {
        op.id = ops_.size();
        op.issue_time = now;
        op.bank = static_cast<std::uint32_t>(op.line % cfg_.pm_banks);
        ops_.push_back(std::move(op));
        banks_[ops_.back().bank].queue.push_back(ops_.back().id);
        try_start(ops_.back().bank, now);
        return ops_.back().id;
    }

    // Drops a Queued/Held op. Returns false if it already entered service.
    bool drop(std::uint64_t id) {
        PersistOp& op = ops_.at(id);
        if (!op.live()) return false;
        op.dropped = true;
        auto& q = banks_[op.bank].queue;
        q.erase(std::find(q.begin(), q.end(), id));
        return true;
    }

    const PersistOp& op(std::uint64_t id) const { return ops_.at(id); }
    PersistOp& op_mut(std::uint64_t id) { return ops_.at(id); }
    const std::vector<PersistOp>& ops() const { return ops_; }
    std::size_t size() const { return ops_.size(); }

    OpState state(std::uint64_t id) const {
        const PersistOp& op = ops_.at(id);
        if (op.dropped) return OpState::Dropped;
        if (op.complete()) return OpState::Complete;
        if (op.in_service()) return OpState::InService;
        return requirements_met(op) ? OpState::Queued : OpState::Held;
    }

    bool idle() const {
        for (const auto& b : banks_)
            if (b.in_service || !b.queue.empty()) return false;
        return true;
    }

    // Earliest in-service completion; bank index breaks ties. kNoCycle if
    // nothing is in service.
    Cycle next_completion(std::uint32_t* bank_out = nullptr) const {
        Cycle best = kNoCycle;
        for (std::uint32_t b = 0; b < banks_.size(); ++b) {
            if (!banks_[b].in_service) continue;
            Cycle c = banks_[b].busy_until;
            if (c < best) {
                best = c;
                if (bank_out) *bank_out = b;
            }
        }
        return best;
    }

    // Completes the earliest in-service op (caller must pass its cycle as
    // `now`); returns its id. Starts successor service on every bank.
    std::uint64_t complete_next(Cycle now) {
        std::uint32_t bank = 0;
        Cycle c = next_completion(&bank);
        if (c == kNoCycle || c != now) throw SimError(SimError::Kind::Internal, "bad completion cycle");
        Bank& b = banks_[bank];
        std::uint64_t id = *b.in_service;
        PersistOp& op = ops_[id];
        op.complete_time = now;
        op.complete_seq = ++stamp_;
        b.in_service.reset();
        b.busy_until = kNoCycle;
        b.service_order.push_back(id);
        for (std::uint32_t i = 0; i < banks_.size(); ++i) try_start(i, now);
        return id;
    }

    // After requirement-completing events, banks may have become startable.
    void kick(Cycle now) {
        for (std::uint32_t i = 0; i < banks_.size(); ++i) try_start(i, now);
    }

    // True if some queued op could enter service (used by deadlock checks).
    bool has_startable() const {
        for (const auto& b : banks_) {
            if (b.in_service) return true;
            for (std::uint64_t id : b.queue)
                if (requirements_met(ops_[id])) return true;
        }
        return false;
    }

    const std::vector<std::uint64_t>& service_order(std::uint32_t bank) const {
        return banks_.at(bank).service_order;
    }

private:
    struct Bank {
        std::optional<std::uint64_t> in_service;
        Cycle busy_until = kNoCycle;  // scheduled completion of in_service
        std::deque<std::uint64_t> queue;
        std::vector<std::uint64_t> service_order;  // completed, in service order
    };

    bool requirements_met(const PersistOp& op) const {
        for (std::uint64_t r : op.required_ops)
            if (!ops_[r].complete()) return false;
        return true;
    }

    void try_start(std::uint32_t bank, Cycle now) {
        Bank& b = banks_[bank];
        if (b.in_service || b.queue.empty()) return;
        for (auto it = b.queue.begin(); it != b.queue.end(); ++it) {
            PersistOp& op = ops_[*it];
            if (!requirements_met(op)) continue;
            op.service_start = now;
            b.in_service = *it;
            b.busy_until = now + cfg_.pm_write_latency;
            b.queue.erase(it);
            return;
        }
    }

    MachineConfig cfg_;
    std::uint32_t threads_;
    std::vector<Bank> banks_;
    std::vector<PersistOp> ops_;
    std::uint64_t stamp_ = 0;
};

// The durable image as of cycle `now`: exactly the ops complete by then,
// applied in global persist order. Pure function of the op table.
inline PMImage snapshot_at(const std::vector<PersistOp>& ops, std::uint32_t threads, Cycle now) {
    std::vector<const PersistOp*> done;
    for (const auto& op : ops)
        if (op.complete() && op.complete_time <= now) done.push_back(&op);
    std::sort(done.begin(), done.end(),
              [](const PersistOp* a, const PersistOp* b) { return a->complete_seq < b->complete_seq; });

    PMImage img(threads);
    // Ring semantics: a later entry to the same slot overwrites the older one.
    std::vector<std::map<std::uint32_t, PLogEntry>> slots(threads);
    for (const PersistOp* op : done) {
        switch (op->kind) {
            case PersistKind::Lpo:
                slots[op->region.thread][op->log_slot] =
                    PLogEntry{op->region, op->line, op->words, op->log_redo, op->complete_seq, op->log_slot};
                break;
            case PersistKind::Dpo:
                img.data[op->line] = op->words;
                break;
            case PersistKind::Mark:
                img.commit_marks[op->region.thread] = static_cast<std::int64_t>(op->mark_seq);
                break;
        }
    }
    for (std::uint32_t t = 0; t < threads; ++t) {
        for (auto& [slot, e] : slots[t]) img.logs[t].push_back(e);
        std::sort(img.logs[t].begin(), img.logs[t].end(),
                  [](const PLogEntry& a, const PLogEntry& b) { return a.stamp < b.stamp; });
    }
    return img;
}

enum class LogDiscipline { None, Undo, Redo };

// Independent write-ahead audit over the finished op table. For undo
// disciplines: a serviced data write covering region r on line L must start
// no earlier than the completion of every one of r's log ops for L that was
// issued by then. For redo: data writes are install writes and must start
// after their region's commit mark completes.
inline std::vector<std::string> check_wal(const std::vector<PersistOp>& ops, LogDiscipline disc) {
    std::vector<std::string> bad;
    if (disc == LogDiscipline::None) return bad;
    // (region, line) -> lpo op ids
    std::map<std::pair<RegionId, LineAddr>, std::vector<const PersistOp*>> lpos;
    std::map<RegionId, const PersistOp*> marks;
    for (const auto& op : ops) {
        if (op.dropped) continue;
        if (op.kind == PersistKind::Lpo) lpos[{op.region, op.line}].push_back(&op);
        if (op.kind == PersistKind::Mark) marks[op.region] = &op;
    }
    for (const auto& op : ops) {
        if (op.kind != PersistKind::Dpo || op.service_start == kNoCycle) continue;
        if (disc == LogDiscipline::Redo) {
            auto it = marks.find(op.region);
            if (it == marks.end() || !it->second->complete() ||
                it->second->complete_time > op.service_start)
                bad.push_back("install write op " + std::to_string(op.id) + " for " +
                              to_string(op.region) + " serviced before its commit mark");
            continue;
        }
        for (const RegionId& r : op.covers) {
            for (const PersistOp* l : lpos[{r, op.line}]) {
                if (l->issue_time > op.service_start) continue;
                if (!l->complete() || l->complete_time > op.service_start)
                    bad.push_back("data write op " + std::to_string(op.id) + " line " +
                                  std::to_string(op.line) + " serviced at " +
                                  std::to_string(op.service_start) + " before log op " +
                                  std::to_string(l->id) + " of " + to_string(r) + " completed");
            }
        }
    }
    return bad;
}

// Bank discipline audit: completion = service + latency, service intervals
// on one bank never overlap, completion order equals service order.
inline std::vector<std::string> check_bank_fifo(const std::vector<PersistOp>& ops,
                                                const MachineConfig& cfg) {
    std::vector<std::string> bad;
    std::map<std::uint32_t, std::vector<const PersistOp*>> by_bank;
    for (const auto& op : ops) {
        if (op.dropped) continue;
        if (op.service_start == kNoCycle) continue;
        if (op.complete() && op.complete_time != op.service_start + cfg.pm_write_latency)
            bad.push_back("op " + std::to_string(op.id) + " latency mismatch");
        if (op.complete() && op.complete_time < op.issue_time + cfg.pm_write_latency)
            bad.push_back("op " + std::to_string(op.id) + " completed impossibly early");
        if (op.bank != op.line % cfg.pm_banks)
            bad.push_back("op " + std::to_string(op.id) + " wrong bank");
        by_bank[op.bank].push_back(&op);
    }
    for (auto& [bank, v] : by_bank) {
        std::sort(v.begin(), v.end(),
                  [](const PersistOp* a, const PersistOp* b) { return a->service_start < b->service_start; });
        for (size_t i = 1; i < v.size(); ++i) {
            if (!v[i - 1]->complete()) continue;
            if (v[i]->service_start < v[i - 1]->complete_time)
                bad.push_back("bank " + std::to_string(bank) + " ops " + std::to_string(v[i - 1]->id) +
                              "/" + std::to_string(v[i]->id) + " overlap in service");
            if (v[i]->complete() && v[i]->complete_seq <= v[i - 1]->complete_seq)
                bad.push_back("bank " + std::to_string(bank) + " completion order diverges from service order");
        }
    }
    return bad;
}

}  // namespace asapsim
