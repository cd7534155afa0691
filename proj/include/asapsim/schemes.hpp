#pragma once

#include <memory>
#include <string>
#include <vector>

#include "asapsim/machine.hpp"
#include "asapsim/scheme.hpp"

namespace asapsim {

// No persistence guarantee: stores stay in the cache, only dirty evictions
// reach PM, regions commit (volatilely) the moment they end.
class NpScheme : public Scheme {
public:
    std::string name() const override { return "np"; }
    LogDiscipline log_discipline() const override { return LogDiscipline::None; }

    StoreAction on_store(Machine&, RegionRecord&, LineAddr, int, Word) override {
        return StoreAction::proceed();
    }

    EndAction on_end_step(Machine& m, RegionRecord& r, int) override {
        m.commit_region(r);
        return EndAction::done();
    }

    std::vector<std::uint64_t> on_evict(Machine& m, LineAddr line, RegionRecord* writer) override {
        m.issue_dpo(nullptr, line, m.line_words(line), TrafficCat::Evict, {}, writer->id);
        return {};
    }
};

namespace detail {

// Shared undo-logging plumbing: first store to a line captures its pre-image;
// dirty evictions of uncommitted data become early DPOs under the WAL hold.
class UndoBase : public Scheme {
public:
    LogDiscipline log_discipline() const override { return LogDiscipline::Undo; }

    std::vector<std::uint64_t> on_evict(Machine& m, LineAddr line, RegionRecord* writer) override {
        if (writer->committed())
            throw SimError(SimError::Kind::Internal, "dirty line owned by a committed region");
        m.issue_dpo(writer, line, m.line_words(line), TrafficCat::Data, {}, writer->id);
        return {};
    }

protected:
    // Issues DPOps for every write-set line still dirty in the cache; lines
    // already covered by a pending eviction write need no second persist.
    void issue_end_dpos(Machine& m, RegionRecord& r) {
        for (LineAddr line : r.write_set)
            if (m.line_dirty(line)) m.issue_dpo(&r, line, m.line_words(line), TrafficCat::Data, {}, r.id);
    }
};

}  // namespace detail

// Software undo logging: every persist sits on the critical path. The first
// store to each line stalls on its log write; End waits for the write set,
// then for the commit mark.
class SwScheme : public detail::UndoBase {
public:
    std::string name() const override { return "sw"; }

    StoreAction on_store(Machine& m, RegionRecord& r, LineAddr line, int, Word) override {
        if (r.logged.count(line)) return StoreAction::proceed();
        if (m.ring_full(r.id.thread)) return StoreAction::wait_log_space();
        std::uint64_t id = m.issue_lpo(r, line, m.line_words(line), false);
        return StoreAction::wait({id});
    }

    EndAction on_end_step(Machine& m, RegionRecord& r, int phase) override {
        switch (phase) {
            case 0:
                issue_end_dpos(m, r);
                return EndAction::wait(r.data_ops);
            case 1:
                if (r.write_set.empty()) {
                    m.commit_region(r);
                    return EndAction::done();
                }
                return EndAction::wait({m.issue_mark(r)});
            default:
                return EndAction::done();
        }
    }

    void on_region_committed(Machine& m, RegionRecord& r) override { m.free_log_entries(r); }
};

// Hardware undo logging: log writes overlap execution inside the region, but
// End stalls until every LPO and DPO completes, then persists the mark.
class HwUndoScheme : public detail::UndoBase {
public:
    std::string name() const override { return "hwundo"; }

    StoreAction on_store(Machine& m, RegionRecord& r, LineAddr line, int, Word) override {
        if (r.logged.count(line)) return StoreAction::proceed();
        if (m.ring_full(r.id.thread)) return StoreAction::wait_log_space();
        m.issue_lpo(r, line, m.line_words(line), false);
        return StoreAction::proceed();
    }

    EndAction on_end_step(Machine& m, RegionRecord& r, int phase) override {
        switch (phase) {
            case 0: {
                issue_end_dpos(m, r);
                std::vector<std::uint64_t> all = r.log_ops;
                all.insert(all.end(), r.data_ops.begin(), r.data_ops.end());
                return EndAction::wait(std::move(all));
            }
            case 1:
                if (r.write_set.empty()) {
                    m.commit_region(r);
                    return EndAction::done();
                }
                return EndAction::wait({m.issue_mark(r)});
            default:
                return EndAction::done();
        }
    }

    void on_region_committed(Machine& m, RegionRecord& r) override { m.free_log_entries(r); }
};

// Hardware redo logging: every store appends a post-image log entry; End
// stalls only for the log (not the data), persists the mark, then installs
// the data asynchronously. Install writes are held until the mark completes.
class HwRedoScheme : public Scheme {
public:
    std::string name() const override { return "hwredo"; }
    LogDiscipline log_discipline() const override { return LogDiscipline::Redo; }

    StoreAction on_store(Machine& m, RegionRecord& r, LineAddr line, int word, Word value) override {
        if (m.ring_full(r.id.thread)) return StoreAction::wait_log_space();
        LineWords post = m.line_words(line);
        post[word] = value;
        m.issue_lpo(r, line, post, true);
        return StoreAction::proceed();
    }

    EndAction on_end_step(Machine& m, RegionRecord& r, int phase) override {
        switch (phase) {
            case 0:
                return EndAction::wait(r.log_ops);
            case 1:
                if (r.write_set.empty()) {
                    m.commit_region(r);
                    return EndAction::done();
                }
                return EndAction::wait({m.issue_mark(r)});
            default:
                // Committed at mark completion; install the data in the background.
                for (LineAddr line : r.write_set)
                    m.issue_dpo(&r, line, m.line_words(line), TrafficCat::Data, {*r.mark_op}, r.id);
                return EndAction::done();
        }
    }

    // Redo data never reaches PM before commit: an eviction writes nothing,
    // but the evictor waits out any unpersisted log entries for the line.
    std::vector<std::uint64_t> on_evict(Machine& m, LineAddr line, RegionRecord*) override {
        return m.incomplete_log_ops_for_line(line);
    }

    void on_persist_complete(Machine& m, const PersistOp& op) override {
        if (op.kind != PersistKind::Dpo) return;
        RegionRecord& r = m.region(op.region);
        if (r.committed() && !r.log_freed && m.incomplete(r.data_ops).empty())
            m.free_log_entries(r);
    }
};

}  // namespace asapsim
