#pragma once

// Crash injection and recovery checking.
//
// A crash is a cut of the persist-op stream: the durable image at cycle c is
// the fold of every persist completed by c (snapshot_at). Recovery is a pure
// function of that image: commit marks decide which regions survive, and the
// log entries repair the data (undo: roll back unmarked regions youngest
// first; redo: replay marked regions oldest first).
//
// The checker never trusts the scheme. Ground truth comes from the run's
// access journal: which regions wrote which words in which realized order.
// From it we derive the dependence relation (a later access to a line depends
// on the line's previous writer) and the state any committed set must decode
// to. A recovered image is consistent iff its committed set is a dependence-
// closed per-thread prefix and its data is exactly that set's fold. On small
// traces the whole family of valid states is enumerated outright and the
// recovered state is required to be a member.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "asapsim/asap.hpp"
#include "asapsim/machine.hpp"
#include "asapsim/pm.hpp"
#include "asapsim/trace.hpp"

namespace asapsim {

struct RecoveryResult {
    std::map<LineAddr, LineWords> data;       // universe-normalized
    std::vector<std::int64_t> committed_seq;  // per thread, from the marks
    std::vector<std::string> anomalies;
};

inline RecoveryResult recover(const PMImage& img, LogDiscipline disc,
                              const std::set<LineAddr>& universe) {
    RecoveryResult out;
    out.committed_seq = img.commit_marks;
    std::map<LineAddr, LineWords> data = img.normalized(universe);

    std::vector<const PLogEntry*> picked;
    for (std::uint32_t t = 0; t < img.logs.size(); ++t) {
        for (const PLogEntry& e : img.logs[t]) {
            bool committed = static_cast<std::int64_t>(e.region.seq) <= img.commit_marks[t];
            if (disc == LogDiscipline::Undo) {
                if (e.redo) out.anomalies.push_back("redo-flagged entry in an undo log");
                if (!committed) picked.push_back(&e);
            } else if (disc == LogDiscipline::Redo) {
                if (!e.redo) out.anomalies.push_back("undo-flagged entry in a redo log");
                if (committed) picked.push_back(&e);
            }
        }
    }
    if (disc == LogDiscipline::Undo) {
        // Roll back in reverse global persist order.
        std::sort(picked.begin(), picked.end(),
                  [](const PLogEntry* a, const PLogEntry* b) { return a->stamp > b->stamp; });
    } else {
        std::sort(picked.begin(), picked.end(),
                  [](const PLogEntry* a, const PLogEntry* b) { return a->stamp < b->stamp; });
    }
    for (const PLogEntry* e : picked) data[e->line] = e->words;

    for (LineAddr l : universe) out.data[l] = data.count(l) ? data[l] : LineWords{};
    return out;
}

// Journal-derived truth about one finished run.
class CrashOracle {
public:
    CrashOracle(const Trace& trace, const RunResult& res)
        : universe_(trace.stored_lines()), threads_(trace.thread_count()) {
        region_count_.assign(threads_, 0);
        for (std::uint32_t t = 0; t < threads_; ++t)
            region_count_[t] = res.regions[t].size();
        journal_ = res.journal;
        std::map<LineAddr, RegionId> last_writer;
        for (const AccessRecord& a : journal_) {
            auto it = last_writer.find(a.line);
            if (it != last_writer.end() && !(it->second == a.region))
                deps_[a.region].insert(it->second);
            if (a.is_store) {
                last_writer[a.line] = a.region;
                has_store_.insert(a.region);
            }
        }
    }

    const std::set<LineAddr>& universe() const { return universe_; }

    // committed = {(t, s) : s <= k[t]}. Dependence closure of that set.
    bool closed(const std::vector<std::int64_t>& k) const {
        for (const auto& [b, ds] : deps_) {
            if (static_cast<std::int64_t>(b.seq) > k[b.thread]) continue;
            for (const RegionId& a : ds)
                if (static_cast<std::int64_t>(a.seq) > k[a.thread]) return false;
        }
        return true;
    }

    std::string closure_hole(const std::vector<std::int64_t>& k) const {
        for (const auto& [b, ds] : deps_) {
            if (static_cast<std::int64_t>(b.seq) > k[b.thread]) continue;
            for (const RegionId& a : ds)
                if (static_cast<std::int64_t>(a.seq) > k[a.thread])
                    return to_string(b) + " committed without its dependence " + to_string(a);
        }
        return {};
    }

    std::map<LineAddr, LineWords> expected(const std::vector<std::int64_t>& k) const {
        std::map<LineAddr, LineWords> out;
        for (LineAddr l : universe_) out[l] = LineWords{};
        for (const AccessRecord& a : journal_)
            if (a.is_store && static_cast<std::int64_t>(a.region.seq) <= k[a.region.thread])
                out[a.line][a.word] = a.value;
        return out;
    }

    // The marks a crash image would show for prefix k: trailing regions that
    // stored nothing leave no mark behind.
    std::vector<std::int64_t> implied_marks(const std::vector<std::int64_t>& k) const {
        std::vector<std::int64_t> m(threads_, -1);
        for (std::uint32_t t = 0; t < threads_; ++t)
            for (std::int64_t s = 0; s <= k[t]; ++s)
                if (has_store_.count(RegionId{t, static_cast<std::uint32_t>(s)})) m[t] = s;
        return m;
    }

    std::uint64_t total_regions() const {
        std::uint64_t n = 0;
        for (auto c : region_count_) n += c;
        return n;
    }

    std::uint64_t prefix_combinations() const {
        std::uint64_t n = 1;
        for (auto c : region_count_) {
            n *= c + 1;
            if (n > (1ull << 40)) return n;  // saturate
        }
        return n;
    }

    std::vector<std::int64_t> full_prefix() const {
        std::vector<std::int64_t> k(threads_);
        for (std::uint32_t t = 0; t < threads_; ++t)
            k[t] = static_cast<std::int64_t>(region_count_[t]) - 1;
        return k;
    }

    // Brute force: every dependence-closed per-thread-prefix subset, keyed by
    // the (marks, data) pair a crash image of that subset would present.
    void enumerate_valid_states() {
        family_.clear();
        std::vector<std::int64_t> k(threads_, -1);
        enumerate_rec(0, k);
    }

    bool in_family(const std::vector<std::int64_t>& marks,
                   const std::map<LineAddr, LineWords>& data) const {
        return family_.count(key_of(marks, data)) != 0;
    }

    std::size_t family_size() const { return family_.size(); }

private:
    void enumerate_rec(std::uint32_t t, std::vector<std::int64_t>& k) {
        if (t == threads_) {
            if (closed(k)) family_.insert(key_of(implied_marks(k), expected(k)));
            return;
        }
        for (std::int64_t s = -1; s < static_cast<std::int64_t>(region_count_[t]); ++s) {
            k[t] = s;
            enumerate_rec(t + 1, k);
        }
        k[t] = -1;
    }

    static std::string key_of(const std::vector<std::int64_t>& marks,
                              const std::map<LineAddr, LineWords>& data) {
        std::string key;
        for (auto m : marks) key += std::to_string(m) + ";";
        key += "|";
        for (const auto& [l, w] : data) {
            key += std::to_string(l) + ":";
            for (Word x : w) key += std::to_string(x) + ",";
            key += ";";
        }
        return key;
    }

    std::set<LineAddr> universe_;
    std::uint32_t threads_;
    std::vector<std::size_t> region_count_;
    std::vector<AccessRecord> journal_;
    std::map<RegionId, std::set<RegionId>> deps_;
    std::set<RegionId> has_store_;
    std::set<std::string> family_;
};

struct CrashVerdict {
    bool checked = false;  // np has no recovery story to check
    std::uint64_t images = 0;
    std::uint64_t family_size = 0;  // 0 when enumeration was skipped
    std::vector<std::string> failures;

    bool consistent() const { return checked && failures.empty(); }
};

struct CrashPoint {
    Cycle cycle = 0;
    std::uint64_t committed_regions = 0;  // regions with a completed mark at the cut
    bool ok = true;
    std::string detail;
};

// Runs `scheme` on `trace`, then recovers from every distinct crash image
// (or a deterministic sample of max_images of them) and validates each
// against the journal oracle. The run itself is audited for bank-FIFO,
// write-ahead, and commit-order discipline on the way.
inline CrashVerdict crash_sweep(const Trace& trace, const std::string& scheme,
                                const MachineConfig& cfg, std::size_t max_images = 0,
                                std::uint64_t seed = 1, bool all_cycles = false,
                                std::vector<CrashPoint>* points = nullptr) {
    auto s = make_scheme(scheme);
    Machine machine(trace, *s, cfg);
    RunResult res = machine.run();

    CrashVerdict v;
    if (s->log_discipline() == LogDiscipline::None) return v;
    v.checked = true;

    for (const std::string& msg : check_bank_fifo(res.ops, cfg)) v.failures.push_back(msg);
    for (const std::string& msg : check_wal(res.ops, s->log_discipline()))
        v.failures.push_back(msg);
    for (const std::string& msg : check_commit_order(res)) v.failures.push_back(msg);

    CrashOracle oracle(trace, res);
    bool family = oracle.total_regions() <= 12 && oracle.prefix_combinations() <= 20000;
    if (family) {
        oracle.enumerate_valid_states();
        v.family_size = oracle.family_size();
    }

    std::vector<Cycle> cuts;
    if (all_cycles) {
        for (Cycle c = 0; c <= res.last_cycle; ++c) cuts.push_back(c);
    } else {
        // The image only changes at persist completions, so completion
        // boundaries (plus cycle 0) cover every distinct crash state.
        cuts.push_back(0);
        for (const PersistOp& op : res.ops)
            if (op.complete()) cuts.push_back(op.complete_time);
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    }
    if (max_images != 0 && cuts.size() > max_images) {
        detail::Rng rng(seed);
        std::vector<Cycle> sample{cuts.front(), cuts.back()};
        while (sample.size() < max_images) sample.push_back(cuts[rng.below(cuts.size())]);
        std::sort(sample.begin(), sample.end());
        sample.erase(std::unique(sample.begin(), sample.end()), sample.end());
        cuts.swap(sample);
    }

    bool context_dumped = false;
    for (Cycle c : cuts) {
        PMImage img = snapshot_at(res.ops, trace.thread_count(), c);
        RecoveryResult rec = recover(img, s->log_discipline(), oracle.universe());
        v.images++;
        std::string where = " (crash at cycle " + std::to_string(c) + ")";
        std::size_t before = v.failures.size();
        for (const std::string& a : rec.anomalies) v.failures.push_back(a + where);
        std::string hole = oracle.closure_hole(rec.committed_seq);
        if (!hole.empty()) {
            v.failures.push_back(hole + where);
        } else {
            if (oracle.expected(rec.committed_seq) != rec.data)
                v.failures.push_back("recovered data diverges from the committed set's fold" +
                                     where);
            if (family && !oracle.in_family(img.commit_marks, rec.data))
                v.failures.push_back("recovered state outside the valid-state family" + where);
        }

        bool ok = v.failures.size() == before;
        if (!ok && !context_dumped) {
            // First counterexample gets the tail of the event log for context.
            context_dumped = true;
            std::string ctx = "events before the failing crash point:";
            std::vector<const EventRecord*> tail;
            for (const EventRecord& e : res.events)
                if (e.cycle <= c) tail.push_back(&e);
            std::size_t first = tail.size() > 16 ? tail.size() - 16 : 0;
            for (std::size_t i = first; i < tail.size(); ++i) {
                const EventRecord& e = *tail[i];
                ctx += "\n  cycle " + std::to_string(e.cycle) + " " + e.kind + " thread " +
                       std::to_string(e.thread) + " region " + std::to_string(e.region) +
                       " line " + std::to_string(e.line);
            }
            v.failures.push_back(ctx);
        }
        if (points) {
            std::uint64_t marked = 0;
            for (std::int64_t m : img.commit_marks)
                if (m >= 0) marked += static_cast<std::uint64_t>(m) + 1;
            std::string why;
            for (std::size_t i = before; i < v.failures.size(); ++i) {
                if (!why.empty()) why += "; ";
                why += v.failures[i];
            }
            points->push_back(CrashPoint{c, marked, ok, why});
        }
    }

    // Full drain must recover to the complete execution's state.
    PMImage fin = snapshot_at(res.ops, trace.thread_count(), res.last_cycle);
    RecoveryResult rec = recover(fin, s->log_discipline(), oracle.universe());
    if (rec.committed_seq != oracle.implied_marks(oracle.full_prefix()))
        v.failures.push_back("post-drain marks do not cover every region");
    if (oracle.expected(oracle.full_prefix()) != rec.data)
        v.failures.push_back("post-drain recovery diverges from the final architectural state");

    return v;
}

}  // namespace asapsim
