#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "asapsim/cache.hpp"
#include "asapsim/config.hpp"
#include "asapsim/pm.hpp"
#include "asapsim/scheme.hpp"
#include "asapsim/trace.hpp"
#include "asapsim/types.hpp"

namespace asapsim {

struct Metrics {
    Cycle total_cycles = 0;
    std::uint64_t pm_log = 0;
    std::uint64_t pm_data = 0;
    std::uint64_t pm_commit = 0;
    std::uint64_t pm_evict = 0;
    Cycle stall_persist = 0;
    Cycle stall_lock = 0;
    Cycle stall_logfull = 0;
    std::uint64_t regions_committed = 0;
    // Region end-to-commit latency histogram, power-of-two buckets:
    // bucket b counts latencies in [2^b, 2^(b+1)), bucket 0 counts {0, 1}.
    std::map<int, std::uint64_t> commit_latency_hist;

    std::uint64_t pm_writes_logdatacommit() const { return pm_log + pm_data + pm_commit; }
    std::uint64_t pm_writes_total() const { return pm_writes_logdatacommit() + pm_evict; }

    bool operator==(const Metrics& o) const {
        return total_cycles == o.total_cycles && pm_log == o.pm_log && pm_data == o.pm_data &&
               pm_commit == o.pm_commit && pm_evict == o.pm_evict &&
               stall_persist == o.stall_persist && stall_lock == o.stall_lock &&
               stall_logfull == o.stall_logfull && regions_committed == o.regions_committed &&
               commit_latency_hist == o.commit_latency_hist;
    }
};

struct EventRecord {
    Cycle cycle = 0;
    const char* kind = "";
    std::int64_t thread = -1;
    std::int64_t region = -1;  // region sequence within its thread
    std::int64_t line = -1;
    std::int64_t bank = -1;
};

// One architectural access in realized execution order.
struct AccessRecord {
    RegionId region;
    LineAddr line = 0;
    int word = 0;
    Word value = 0;
    bool is_store = false;
};

struct RunResult {
    Metrics metrics;
    PMImage final_image;
    std::vector<PersistOp> ops;
    std::vector<std::vector<RegionRecord>> regions;  // per thread, by sequence
    std::vector<EventRecord> events;
    std::vector<AccessRecord> journal;            // stores and loads, realized order
    std::map<LineAddr, LineWords> volatile_data;  // architectural state at drain
    Cycle last_cycle = 0;
    std::uint32_t threads = 0;

    RunResult() : final_image(0) {}

    const RegionRecord& region(RegionId id) const { return regions.at(id.thread).at(id.seq); }

    // Regions ordered by realized begin cycle (thread id breaks ties).
    std::vector<RegionId> realized_order() const {
        std::vector<const RegionRecord*> all;
        for (const auto& tr : regions)
            for (const auto& r : tr) all.push_back(&r);
        std::stable_sort(all.begin(), all.end(), [](const RegionRecord* a, const RegionRecord* b) {
            if (a->begin_cycle != b->begin_cycle) return a->begin_cycle < b->begin_cycle;
            return a->id.thread < b->id.thread;
        });
        std::vector<RegionId> out;
        for (auto* r : all) out.push_back(r->id);
        return out;
    }
};

// Deterministic discrete-event executor: a global cycle clock, per-thread
// instruction streams, a write-back cache, and the banked persist engine.
// Persist completions at a cycle are processed before thread steps at that
// cycle; runnable threads step in earliest-ready order, thread id breaking
// ties.
class Machine {
public:
    Machine(const Trace& trace, Scheme& scheme, const MachineConfig& cfg)
        : trace_(trace),
          scheme_(scheme),
          cfg_(cfg),
          engine_(cfg, trace.thread_count()),
          cache_(cfg.cache_capacity_lines),
          threads_(trace.thread_count()),
          regions_(trace.thread_count()),
          ring_used_(trace.thread_count(), 0),
          ring_head_(trace.thread_count(), 0) {
        cfg_.check();
        for (ThreadId t = 0; t < trace.thread_count(); ++t)
            if (trace_.streams[t].empty()) threads_[t].st = Thread::St::Done;
    }

    RunResult run() {
        while (true) {
            ThreadId tsel = 0;
            Cycle tn = next_thread(&tsel);
            Cycle en = engine_.next_completion();
            Cycle dn = deferred_.empty() ? kNoCycle : deferred_.begin()->first;
            Cycle now = std::min({tn, en, dn});
            if (now == kNoCycle) {
                if (all_done()) {
                    if (!engine_.idle())
                        throw SimError(SimError::Kind::Internal,
                                       "persist ops queued forever with nothing in service");
                    break;
                }
                diagnose_deadlock();
            }
            clock_ = now;
            if (dn == now) {
                issue_deferred();
                continue;
            }
            if (en == now) {
                handle_completion();
                continue;
            }
            step_thread(tsel);
        }
        return finish();
    }

    // --- scheme-facing API -------------------------------------------------

    const MachineConfig& cfg() const { return cfg_; }
    Cycle clock() const { return clock_; }
    std::uint32_t thread_count() const { return trace_.thread_count(); }

    LineWords line_words(LineAddr line) const {
        auto it = arch_.find(line);
        return it == arch_.end() ? LineWords{} : it->second;
    }

    RegionRecord& region(RegionId id) { return regions_.at(id.thread).at(id.seq); }

    RegionRecord* prev_region(const RegionRecord& r) {
        if (r.id.seq == 0) return nullptr;
        return &regions_[r.id.thread][r.id.seq - 1];
    }

    bool ring_full(ThreadId t) const {
        return ring_used_[t] >= cfg_.log_capacity_entries_per_thread;
    }

    const PersistOp& op(std::uint64_t id) const { return engine_.op(id); }
    OpState op_state(std::uint64_t id) const { return engine_.state(id); }
    bool line_dirty(LineAddr line) const { return cache_.dirty(line); }
    const std::vector<std::vector<RegionRecord>>& all_regions() const { return regions_; }

    // Unpersisted log writes covering `line`, any region.
    std::vector<std::uint64_t> incomplete_log_ops_for_line(LineAddr line) {
        return incomplete_lpos(line);
    }

    std::vector<std::uint64_t> incomplete(const std::vector<std::uint64_t>& ids) const {
        std::vector<std::uint64_t> out;
        for (std::uint64_t id : ids)
            if (!engine_.op(id).complete() && !engine_.op(id).dropped) out.push_back(id);
        return out;
    }

    std::uint64_t issue_lpo(RegionRecord& r, LineAddr line, const LineWords& words, bool redo) {
        ThreadId t = r.id.thread;
        if (ring_full(t)) throw SimError(SimError::Kind::Internal, "LPO issued into a full log ring");
        std::uint32_t slot = ring_head_[t] % cfg_.log_capacity_entries_per_thread;
        ring_head_[t]++;
        ring_used_[t]++;
        PersistOp op;
        op.kind = PersistKind::Lpo;
        op.category = TrafficCat::Log;
        op.region = r.id;
        op.covers = {r.id};
        op.line = line;
        op.words = words;
        op.log_slot = slot;
        op.log_redo = redo;
        std::uint64_t id = engine_.issue(std::move(op), clock_);
        r.log_ops.push_back(id);
        r.log_slots.push_back(slot);
        r.logged.insert(line);
        lpos_by_line_[line].push_back(id);
        log_event("lpo", r.id, line, id);
        return id;
    }

    // `primary` registers the op as that region's pending data persist;
    // pass nullptr for writes that carry no obligation (np evictions).
    std::uint64_t issue_dpo(RegionRecord* primary, LineAddr line, const LineWords& words,
                            TrafficCat cat, std::vector<std::uint64_t> extra_required,
                            RegionId attrib) {
        PersistOp op;
        op.kind = PersistKind::Dpo;
        op.category = cat;
        op.region = primary ? primary->id : attrib;
        op.line = line;
        op.words = words;
        op.required_ops = incomplete_lpos(line);
        for (std::uint64_t e : extra_required) op.required_ops.push_back(e);
        if (primary) op.covers.push_back(primary->id);
        // Absorb floating obligations from dropped DPOs on this line.
        auto fl = floating_.find(line);
        if (fl != floating_.end()) {
            for (const RegionId& rid : fl->second)
                if (!(primary && rid == primary->id)) op.covers.push_back(rid);
            floating_.erase(fl);
        }
        std::uint64_t id = engine_.issue(std::move(op), clock_);
        for (const RegionId& rid : engine_.op(id).covers) {
            RegionRecord& rr = region(rid);
            rr.pending_data[line] = id;
            rr.data_ops.push_back(id);
        }
        live_dpo_[line] = id;
        cache_.mark_clean(line);
        log_event(cat == TrafficCat::Evict ? "evict_write" : "dpo", attrib, line, id);
        return id;
    }

    // Rides an existing Queued/Held DPO: refreshes its payload to the current
    // words and registers `r`'s obligation on it.
    void coalesce_dpo(std::uint64_t id, RegionRecord& r, LineAddr line, const LineWords& words) {
        PersistOp& op = engine_.op_mut(id);
        if (!op.live() || op.kind != PersistKind::Dpo)
            throw SimError(SimError::Kind::Internal, "coalesce on a non-live op");
        op.words = words;
        for (std::uint64_t need : incomplete_lpos(line)) {
            if (std::find(op.required_ops.begin(), op.required_ops.end(), need) ==
                op.required_ops.end())
                op.required_ops.push_back(need);
        }
        if (std::find(op.covers.begin(), op.covers.end(), r.id) == op.covers.end())
            op.covers.push_back(r.id);
        r.pending_data[line] = id;
        r.data_ops.push_back(id);
        cache_.mark_clean(line);
        log_event("dpo_coalesce", r.id, line, id);
    }

    std::optional<std::uint64_t> live_dpo(LineAddr line) {
        auto it = live_dpo_.find(line);
        if (it == live_dpo_.end()) return std::nullopt;
        if (!engine_.op(it->second).live()) {
            live_dpo_.erase(it);
            return std::nullopt;
        }
        return it->second;
    }

    // DPO dropping: retire a Queued/Held DPO for this line; its obligations
    // float until the line's next DPO. No-op if none is droppable.
    bool drop_live_dpo(LineAddr line) {
        auto live = live_dpo(line);
        if (!live) return false;
        std::uint64_t id = *live;
        if (!engine_.drop(id)) return false;
        const PersistOp& op = engine_.op(id);
        for (const RegionId& rid : op.covers) {
            RegionRecord& rr = region(rid);
            auto it = rr.pending_data.find(line);
            if (it != rr.pending_data.end() && it->second == id) {
                it->second = RegionRecord::kNoOp;
                floating_[line].insert(rid);
            }
        }
        live_dpo_.erase(line);
        log_event("dpo_drop", op.region, line, id);
        return true;
    }

    std::uint64_t issue_mark(RegionRecord& r) {
        PersistOp op;
        op.kind = PersistKind::Mark;
        op.category = TrafficCat::Commit;
        op.region = r.id;
        op.covers = {r.id};
        op.line = mark_line(r.id.thread);
        op.mark_seq = r.id.seq;
        std::uint64_t id = engine_.issue(std::move(op), clock_);
        r.mark_op = id;
        log_event("mark", r.id, op.line, id);
        return id;
    }

    // Marks triggered from completion handling are issued next cycle, so a
    // dependent's mark is never issued at the very cycle its prerequisite's
    // mark completes.
    void defer_mark(RegionRecord& r) { deferred_.emplace(clock_ + 1, r.id); }

    void commit_region(RegionRecord& r) {
        if (r.committed()) throw SimError(SimError::Kind::Internal, "double commit");
        r.state = RegionRecord::State::Committed;
        r.commit_cycle = clock_;
        metrics_.regions_committed++;
        if (r.end_cycle != kNoCycle) {
            Cycle lat = clock_ - r.end_cycle;
            int bucket = 0;
            while ((2ull << bucket) <= lat) ++bucket;
            metrics_.commit_latency_hist[bucket]++;
        }
        log_event("commit", r.id, -1, std::nullopt);
        scheme_.on_region_committed(*this, r);
    }

    void free_log_entries(RegionRecord& r) {
        if (r.log_freed || r.log_slots.empty()) {
            r.log_freed = true;
            return;
        }
        r.log_freed = true;
        ThreadId t = r.id.thread;
        ring_used_[t] -= static_cast<std::uint32_t>(r.log_slots.size());
        Thread& th = threads_[t];
        if (th.st == Thread::St::WaitLogSpace) wake(t, &Metrics::stall_logfull);
    }

    // --- introspection for tests -------------------------------------------

    const std::vector<PersistOp>& ops() const { return engine_.ops(); }
    const Metrics& metrics() const { return metrics_; }

private:
    struct Thread {
        std::size_t ip = 0;
        int phase = 0;
        Cycle ready = 0;
        enum class St { Ready, WaitOps, WaitLock, WaitLogSpace, Done };
        St st = St::Ready;
        Cycle wait_start = 0;
        std::set<std::uint64_t> wait_ops;
        Cycle latched_cost = kNoCycle;
        std::int64_t cur_region = -1;
        Cycle retire = 0;
    };

    struct LockState {
        std::optional<ThreadId> holder;
        std::vector<ThreadId> waiters;  // FIFO by enqueue order
    };

    // --- event loop pieces --------------------------------------------------

    Cycle next_thread(ThreadId* out) const {
        Cycle best = kNoCycle;
        for (ThreadId t = 0; t < threads_.size(); ++t) {
            const Thread& th = threads_[t];
            if (th.st != Thread::St::Ready) continue;
            if (th.ready < best) {
                best = th.ready;
                *out = t;
            }
        }
        return best;
    }

    bool all_done() const {
        for (const auto& th : threads_)
            if (th.st != Thread::St::Done) return false;
        return true;
    }

    void issue_deferred() {
        while (!deferred_.empty() && deferred_.begin()->first == clock_) {
            RegionId rid = deferred_.begin()->second;
            deferred_.erase(deferred_.begin());
            issue_mark(region(rid));
        }
    }

    void handle_completion() {
        std::uint64_t id = engine_.complete_next(clock_);
        const PersistOp op = engine_.op(id);  // copy: callbacks may grow the op table
        switch (op.category) {
            case TrafficCat::Log: metrics_.pm_log++; break;
            case TrafficCat::Data: metrics_.pm_data++; break;
            case TrafficCat::Commit: metrics_.pm_commit++; break;
            case TrafficCat::Evict: metrics_.pm_evict++; break;
        }
        log_event("complete", op.region, op.line, id);
        // Clear satisfied data obligations.
        if (op.kind == PersistKind::Dpo) {
            for (const RegionId& rid : op.covers) {
                RegionRecord& rr = region(rid);
                auto it = rr.pending_data.find(op.line);
                if (it != rr.pending_data.end() && it->second == id) rr.pending_data.erase(it);
            }
        }
        if (op.kind == PersistKind::Mark) commit_region(region(op.region));
        scheme_.on_persist_complete(*this, op);
        // Wake threads whose wait set drained.
        for (ThreadId t = 0; t < threads_.size(); ++t) {
            Thread& th = threads_[t];
            if (th.st != Thread::St::WaitOps) continue;
            th.wait_ops.erase(id);
            if (th.wait_ops.empty()) wake(t, &Metrics::stall_persist);
        }
    }

    void wake(ThreadId t, Cycle Metrics::* bucket) {
        Thread& th = threads_[t];
        metrics_.*bucket += clock_ - th.wait_start;
        th.st = Thread::St::Ready;
        th.ready = clock_;
    }

    // Blocks t on the incomplete subset of `ids`; false if nothing to wait on.
    bool block_on_ops(ThreadId t, const std::vector<std::uint64_t>& ids) {
        auto pending = incomplete(ids);
        if (pending.empty()) return false;
        Thread& th = threads_[t];
        th.st = Thread::St::WaitOps;
        th.wait_start = clock_;
        th.wait_ops = std::set<std::uint64_t>(pending.begin(), pending.end());
        return true;
    }

    void step_thread(ThreadId t) {
        Thread& th = threads_[t];
        const TraceEvent& e = trace_.streams[t][th.ip];
        switch (e.kind) {
            case EventKind::Begin: do_begin(t); break;
            case EventKind::End: do_end(t); break;
            case EventKind::Store: do_store(t, e); break;
            case EventKind::Load: do_load(t, e); break;
            case EventKind::Lock: do_lock(t, e); break;
            case EventKind::Unlock: do_unlock(t, e); break;
            case EventKind::Nop:
                finish_instr(t, e.count * cfg_.nop_cost);
                break;
        }
    }

    void finish_instr(ThreadId t, Cycle cost) {
        Thread& th = threads_[t];
        th.ready = clock_ + cost;
        th.ip++;
        th.phase = 0;
        th.latched_cost = kNoCycle;
        if (th.ip == trace_.streams[t].size()) {
            th.st = Thread::St::Done;
            th.retire = th.ready;
        }
    }

    // The open region for access events; END re-entries use its index directly.
    RegionRecord& cur_region(ThreadId t) {
        Thread& th = threads_[t];
        if (th.cur_region < 0 ||
            regions_[t][static_cast<std::size_t>(th.cur_region)].ended)
            throw SimError(SimError::Kind::InvalidTrace,
                           "T" + std::to_string(t) + ": access outside an atomic region");
        return regions_[t][static_cast<std::size_t>(th.cur_region)];
    }

    void do_begin(ThreadId t) {
        Thread& th = threads_[t];
        if (th.cur_region >= 0 && !regions_[t][static_cast<std::size_t>(th.cur_region)].ended)
            throw SimError(SimError::Kind::InvalidTrace,
                           "T" + std::to_string(t) + ": nested BEGIN");
        RegionRecord r;
        r.id = RegionId{t, static_cast<std::uint32_t>(regions_[t].size())};
        r.begin_cycle = clock_;
        regions_[t].push_back(std::move(r));
        th.cur_region = static_cast<std::int64_t>(regions_[t].size()) - 1;
        scheme_.on_begin(*this, regions_[t].back());
        log_event("begin", regions_[t].back().id, -1, std::nullopt);
        finish_instr(t, 1);
    }

    void do_end(ThreadId t) {
        Thread& th = threads_[t];
        if (th.cur_region < 0)
            throw SimError(SimError::Kind::InvalidTrace,
                           "T" + std::to_string(t) + ": END without BEGIN");
        RegionRecord& r = regions_[t][static_cast<std::size_t>(th.cur_region)];
        if (th.phase == 0) {
            r.end_cycle = clock_;
            log_event("end", r.id, -1, std::nullopt);
        }
        while (true) {
            EndAction a = scheme_.on_end_step(*this, r, th.phase);
            if (a.k == EndAction::K::Done) break;
            th.phase++;
            if (block_on_ops(t, a.ops)) return;
        }
        r.ended = true;
        r.end_stall = clock_ - r.end_cycle;
        finish_instr(t, 1);
    }

    // Ensures residency; returns stall ops for an eviction, latching the
    // hit/miss cost for loads on first attempt.
    std::vector<std::uint64_t> ensure_resident(ThreadId t, LineAddr line, bool for_load) {
        Thread& th = threads_[t];
        bool hit = false;
        auto victim = cache_.touch(line, &hit);
        if (th.latched_cost == kNoCycle)
            th.latched_cost = for_load ? (hit ? cfg_.load_hit_cost : cfg_.pm_read_latency)
                                       : cfg_.store_cost;
        if (victim && victim->dirty) {
            log_event("evict", victim->writer, static_cast<std::int64_t>(victim->line),
                      std::nullopt);
            RegionRecord& w = region(victim->writer);
            return scheme_.on_evict(*this, victim->line, &w);
        }
        return {};
    }

    void do_store(ThreadId t, const TraceEvent& e) {
        Thread& th = threads_[t];
        RegionRecord& r = cur_region(t);
        // A stall (eviction or log wait) can let another thread evict this
        // line; residency is re-established on every resume.
        while (th.phase == 0 || !cache_.resident(e.line)) {
            th.phase = 0;
            auto stall = ensure_resident(t, e.line, false);
            th.phase = 1;
            if (block_on_ops(t, stall)) return;
        }
        StoreAction a = scheme_.on_store(*this, r, e.line, e.word, e.value);
        switch (a.k) {
            case StoreAction::K::WaitOps:
                if (block_on_ops(t, a.ops)) return;
                a = scheme_.on_store(*this, r, e.line, e.word, e.value);
                if (a.k != StoreAction::K::Proceed)
                    throw SimError(SimError::Kind::Internal, "store retry did not proceed");
                break;
            case StoreAction::K::WaitLogSpace:
                th.st = Thread::St::WaitLogSpace;
                th.wait_start = clock_;
                return;
            case StoreAction::K::Proceed: break;
        }
        r.write_set.insert(e.line);
        arch_[e.line][e.word] = e.value;
        cache_.mark_dirty(e.line, r.id);
        journal_.push_back(AccessRecord{r.id, e.line, e.word, e.value, true});
        log_event("store", r.id, static_cast<std::int64_t>(e.line), std::nullopt);
        finish_instr(t, th.latched_cost);
    }

    void do_load(ThreadId t, const TraceEvent& e) {
        Thread& th = threads_[t];
        RegionRecord& r = cur_region(t);
        while (th.phase == 0 || !cache_.resident(e.line)) {
            th.phase = 0;
            auto stall = ensure_resident(t, e.line, true);
            th.phase = 1;
            if (block_on_ops(t, stall)) return;
        }
        scheme_.on_load(*this, r, e.line);
        journal_.push_back(AccessRecord{r.id, e.line, e.word, 0, false});
        log_event("load", r.id, static_cast<std::int64_t>(e.line), std::nullopt);
        finish_instr(t, th.latched_cost);
    }

    void do_lock(ThreadId t, const TraceEvent& e) {
        Thread& th = threads_[t];
        LockState& l = locks_[e.lock_id];
        if (th.phase == 1 || !l.holder) {
            // Granted (either free now, or do_unlock granted it to us).
            if (th.phase != 1) l.holder = t;
            log_raw("lock", t, -1, static_cast<std::int64_t>(e.lock_id));
            finish_instr(t, 1);
            return;
        }
        l.waiters.push_back(t);
        th.st = Thread::St::WaitLock;
        th.wait_start = clock_;
    }

    void do_unlock(ThreadId t, const TraceEvent& e) {
        LockState& l = locks_[e.lock_id];
        if (!l.holder || *l.holder != t)
            throw SimError(SimError::Kind::InvalidTrace,
                           "T" + std::to_string(t) + ": UNLOCK of a lock it does not hold");
        log_raw("unlock", t, -1, static_cast<std::int64_t>(e.lock_id));
        if (l.waiters.empty()) {
            l.holder.reset();
        } else {
            ThreadId next = l.waiters.front();
            l.waiters.erase(l.waiters.begin());
            l.holder = next;
            Thread& w = threads_[next];
            w.phase = 1;  // its LOCK instruction resumes as granted
            metrics_.stall_lock += clock_ - w.wait_start;
            w.st = Thread::St::Ready;
            w.ready = clock_;
        }
        finish_instr(t, 1);
    }

    void diagnose_deadlock() {
        std::string detail = scheme_.deadlock_detail(*this);
        if (!detail.empty()) throw SimError(SimError::Kind::DependenceCycle, detail);
        bool logfull = false, lock = false;
        for (const auto& th : threads_) {
            if (th.st == Thread::St::WaitLogSpace) logfull = true;
            if (th.st == Thread::St::WaitLock) lock = true;
        }
        if (logfull)
            throw SimError(SimError::Kind::LogFullDeadlock,
                           "all runnable threads stalled on full log rings with no persist in flight");
        if (lock)
            throw SimError(SimError::Kind::LockDeadlock,
                           "threads blocked on locks with no runnable holder");
        throw SimError(SimError::Kind::Internal, "event loop wedged with blocked threads");
    }

    std::vector<std::uint64_t> incomplete_lpos(LineAddr line) {
        auto it = lpos_by_line_.find(line);
        if (it == lpos_by_line_.end()) return {};
        std::vector<std::uint64_t>& v = it->second;
        v.erase(std::remove_if(v.begin(), v.end(),
                               [&](std::uint64_t id) { return engine_.op(id).complete(); }),
                v.end());
        return v;
    }

    void log_event(const char* kind, RegionId region, std::int64_t line,
                   std::optional<std::uint64_t> op_id) {
        EventRecord rec;
        rec.cycle = clock_;
        rec.kind = kind;
        rec.thread = region.thread;
        rec.region = region.seq;
        rec.line = line;
        rec.bank = op_id ? static_cast<std::int64_t>(engine_.op(*op_id).bank) : -1;
        events_.push_back(rec);
    }

    void log_raw(const char* kind, std::int64_t thread, std::int64_t region, std::int64_t line) {
        events_.push_back(EventRecord{clock_, kind, thread, region, line, -1});
    }

    RunResult finish() {
        RunResult res;
        res.threads = trace_.thread_count();
        Cycle total = 0;
        for (const auto& th : threads_) total = std::max(total, th.retire);
        metrics_.total_cycles = total;
        res.metrics = metrics_;
        res.final_image = snapshot_at(engine_.ops(), trace_.thread_count(), clock_);
        res.ops = engine_.ops();
        res.regions = regions_;
        res.events = std::move(events_);
        res.journal = std::move(journal_);
        res.volatile_data = arch_;
        res.last_cycle = clock_;
        return res;
    }

    const Trace& trace_;
    Scheme& scheme_;
    MachineConfig cfg_;
    PersistEngine engine_;
    LruCache cache_;

    std::vector<Thread> threads_;
    std::vector<std::vector<RegionRecord>> regions_;
    std::map<LockId, LockState> locks_;
    std::map<LineAddr, LineWords> arch_;

    std::vector<std::uint32_t> ring_used_;
    std::vector<std::uint32_t> ring_head_;
    std::map<LineAddr, std::vector<std::uint64_t>> lpos_by_line_;
    std::map<LineAddr, std::uint64_t> live_dpo_;
    std::map<LineAddr, std::set<RegionId>> floating_;
    std::multimap<Cycle, RegionId> deferred_;

    Metrics metrics_;
    std::vector<EventRecord> events_;
    std::vector<AccessRecord> journal_;
    Cycle clock_ = 0;
};

// Commit-order audit. For every dependence edge b -> a ever recorded, a must
// commit no later than b; when both regions persisted marks, a's mark must
// complete strictly before b's mark is issued. Consecutive regions of one
// thread obey the same mark ordering whether or not an edge was recorded.
inline std::vector<std::string> check_commit_order(const RunResult& res) {
    std::vector<std::string> bad;
    auto mark_pair = [&](const RegionRecord& a, const RegionRecord& b, const char* why) {
        if (a.committed() && b.committed() && a.commit_cycle > b.commit_cycle)
            bad.push_back(to_string(b.id) + " committed before " + to_string(a.id) + " (" + why + ")");
        if (b.committed() && !a.committed())
            bad.push_back(to_string(b.id) + " committed but " + to_string(a.id) +
                          " never did (" + why + ")");
        if (a.mark_op && b.mark_op) {
            const PersistOp& ma = res.ops[*a.mark_op];
            const PersistOp& mb = res.ops[*b.mark_op];
            if (ma.complete() && !(ma.complete_time < mb.issue_time))
                bad.push_back("mark of " + to_string(b.id) + " issued at " +
                              std::to_string(mb.issue_time) + ", not after the completion (" +
                              std::to_string(ma.complete_time) + ") of the mark of " +
                              to_string(a.id) + " (" + why + ")");
        }
    };
    for (const auto& per_thread : res.regions) {
        for (const RegionRecord& b : per_thread) {
            for (const RegionId& aid : b.edges_ever) mark_pair(res.region(aid), b, "dependence");
            if (b.id.seq > 0) mark_pair(res.region(RegionId{b.id.thread, b.id.seq - 1}), b,
                                        "program order");
        }
    }
    return bad;
}

}  // namespace asapsim
