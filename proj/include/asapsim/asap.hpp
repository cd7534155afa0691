#pragma once

// Asynchronous undo-logged commit with hardware dependence tracking.
//
// Stores and log writes never stall the issuing thread (log-capacity back
// pressure aside). Region end stalls for nothing: the region is parked in
// Pending state and a small piece of bookkeeping decides, as persists drain,
// when its commit mark may be written. Ordering between regions is carried by
// an explicit dependence graph fed from a last-writer table, so a region
// commits only after every region it observed has committed. Commit marks are
// deferred one cycle past the deciding event, which keeps mark issue strictly
// after the completion of every mark it depends on.

#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "asapsim/machine.hpp"
#include "asapsim/schemes.hpp"

namespace asapsim {

class AsapScheme final : public Scheme {
public:
    std::string name() const override { return "asap"; }
    LogDiscipline log_discipline() const override { return LogDiscipline::Undo; }

    StoreAction on_store(Machine& m, RegionRecord& r, LineAddr line, int, Word) override {
        const bool need_lpo = m.cfg().opt_lpo_drop ? r.logged.count(line) == 0 : true;
        if (need_lpo && m.ring_full(r.id.thread)) return StoreAction::wait_log_space();
        note_dependence(m, r, line);
        if (need_lpo) m.issue_lpo(r, line, m.line_words(line), /*redo=*/false);
        lw_[line] = r.id;
        if (m.cfg().opt_dpo_drop) m.drop_live_dpo(line);
        return StoreAction::proceed();
    }

    void on_load(Machine& m, RegionRecord& r, LineAddr line) override {
        note_dependence(m, r, line);
    }

    EndAction on_end_step(Machine& m, RegionRecord& r, int) override {
        // Program order on the same thread is a dependence like any other.
        if (RegionRecord* prev = m.prev_region(r); prev && !prev->committed())
            add_edge(m, r, *prev);
        for (LineAddr line : r.write_set) {
            std::optional<std::uint64_t> live;
            if (m.cfg().opt_dpo_coalesce) live = m.live_dpo(line);
            if (live)
                m.coalesce_dpo(*live, r, line, m.line_words(line));
            else
                m.issue_dpo(&r, line, m.line_words(line), TrafficCat::Data, {}, r.id);
        }
        r.state = RegionRecord::State::Pending;
        try_commit(m, r);
        return EndAction::done();
    }

    std::vector<std::uint64_t> on_evict(Machine& m, LineAddr line, RegionRecord* writer) override {
        if (writer == nullptr || writer->committed())
            throw SimError(SimError::Kind::Internal,
                           "dirty line evicted without a live uncommitted writer");
        m.issue_dpo(writer, line, m.line_words(line), TrafficCat::Data, {}, writer->id);
        return {};
    }

    void on_persist_complete(Machine& m, const PersistOp& op) override {
        if (op.kind == PersistKind::Mark) return;  // machine commits on mark completion
        std::set<RegionId> cands(op.covers.begin(), op.covers.end());
        cands.insert(op.region);
        for (const RegionId& rid : cands) try_commit(m, m.region(rid));
    }

    void on_region_committed(Machine& m, RegionRecord& r) override {
        for (auto it = lw_.begin(); it != lw_.end();)
            it = it->second == r.id ? lw_.erase(it) : std::next(it);
        m.free_log_entries(r);
        std::set<RegionId> deps;
        deps.swap(r.dependents);
        for (const RegionId& d : deps) m.region(d).depends_on.erase(r.id);
        for (const RegionId& d : deps) try_commit(m, m.region(d));
    }

    std::string deadlock_detail(Machine& m) override {
        // Walk depends_on among Pending regions; report the first cycle found.
        std::map<RegionId, int> color;  // 0 white, 1 on stack, 2 done
        std::vector<RegionId> stack;
        std::string found;
        auto dfs = [&](auto&& self, const RegionId& v) -> bool {
            color[v] = 1;
            stack.push_back(v);
            for (const RegionId& w : m.region(v).depends_on) {
                if (m.region(w).committed()) continue;
                int c = color.count(w) ? color[w] : 0;
                if (c == 1) {
                    std::ostringstream os;
                    auto it = std::find(stack.begin(), stack.end(), w);
                    for (; it != stack.end(); ++it) os << to_string(*it) << " -> ";
                    os << to_string(w);
                    found = os.str();
                    return true;
                }
                if (c == 0 && self(self, w)) return true;
            }
            stack.pop_back();
            color[v] = 2;
            return false;
        };
        for (const auto& per_thread : m.all_regions())
            for (const RegionRecord& r : per_thread)
                if (r.state == RegionRecord::State::Pending && !color.count(r.id))
                    if (dfs(dfs, r.id)) return "dependence cycle: " + found;
        return {};
    }

private:
    void note_dependence(Machine& m, RegionRecord& r, LineAddr line) {
        auto it = lw_.find(line);
        if (it == lw_.end() || it->second == r.id) return;
        RegionRecord& w = m.region(it->second);
        if (w.committed()) {  // stale entry (purge at commit keeps this rare)
            lw_.erase(it);
            return;
        }
        add_edge(m, r, w);
    }

    void add_edge(Machine&, RegionRecord& from, RegionRecord& to) {
        if (from.id == to.id || to.committed()) return;
        from.edges_ever.insert(to.id);
        if (from.depends_on.insert(to.id).second) to.dependents.insert(from.id);
    }

    // A Pending region commits once its log is persistent, its data
    // obligations are settled, and every region it depends on has committed.
    // Regions that wrote nothing commit in place without a mark.
    void try_commit(Machine& m, RegionRecord& r) {
        if (r.state != RegionRecord::State::Pending) return;
        if (!m.incomplete(r.log_ops).empty()) return;
        if (!r.pending_data.empty()) return;
        if (!r.depends_on.empty()) return;
        if (r.write_set.empty()) {
            m.commit_region(r);
            return;
        }
        if (!r.mark_requested) {
            r.mark_requested = true;
            m.defer_mark(r);
        }
    }

    std::map<LineAddr, RegionId> lw_;  // last uncommitted writer per line
};

inline std::unique_ptr<Scheme> make_scheme(const std::string& name) {
    if (name == "np") return std::make_unique<NpScheme>();
    if (name == "sw") return std::make_unique<SwScheme>();
    if (name == "hwundo") return std::make_unique<HwUndoScheme>();
    if (name == "hwredo") return std::make_unique<HwRedoScheme>();
    if (name == "asap") return std::make_unique<AsapScheme>();
    throw SimError(SimError::Kind::InvalidTrace, "unknown scheme: " + name);
}

inline std::vector<std::string> scheme_names() {
    return {"np", "sw", "hwundo", "hwredo", "asap"};
}

}  // namespace asapsim
