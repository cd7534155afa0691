#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "asapsim/types.hpp"

namespace asapsim {

enum class EventKind { Begin, End, Store, Load, Lock, Unlock, Nop };

// One instruction of a simulated thread. Only the fields relevant to the
// kind are meaningful (line/word/value for Store, line/word for Load,
// lock_id for Lock/Unlock, count for Nop).
struct TraceEvent {
    EventKind kind = EventKind::Nop;
    LineAddr line = 0;
    int word = 0;
    Word value = 0;
    LockId lock_id = 0;
    Cycle count = 1;
    int src_line = 0;  // 1-based source line in the trace file, 0 if synthetic

    static TraceEvent region_begin() { return {EventKind::Begin}; }
    static TraceEvent region_end() { return {EventKind::End}; }
    static TraceEvent store(LineAddr line, int word, Word value) {
        TraceEvent e{EventKind::Store};
        e.line = line, e.word = word, e.value = value;
        return e;
    }
    static TraceEvent load(LineAddr line, int word) {
        TraceEvent e{EventKind::Load};
        e.line = line, e.word = word;
        return e;
    }
    static TraceEvent lock(LockId id) {
        TraceEvent e{EventKind::Lock};
        e.lock_id = id;
        return e;
    }
    static TraceEvent unlock(LockId id) {
        TraceEvent e{EventKind::Unlock};
        e.lock_id = id;
        return e;
    }
    static TraceEvent nop(Cycle n) {
        TraceEvent e{EventKind::Nop};
        e.count = n;
        return e;
    }

    bool operator==(const TraceEvent& o) const {
        if (kind != o.kind) return false;
        switch (kind) {
            case EventKind::Begin:
            case EventKind::End: return true;
            case EventKind::Store: return line == o.line && word == o.word && value == o.value;
            case EventKind::Load: return line == o.line && word == o.word;
            case EventKind::Lock:
            case EventKind::Unlock: return lock_id == o.lock_id;
            case EventKind::Nop: return count == o.count;
        }
        return false;
    }
};

inline std::ostream& operator<<(std::ostream& os, const TraceEvent& e) {
    switch (e.kind) {
        case EventKind::Begin: return os << "BEGIN";
        case EventKind::End: return os << "END";
        case EventKind::Store:
            return os << "ST line=" << e.line << " w=" << e.word << " v=" << e.value;
        case EventKind::Load: return os << "LD line=" << e.line << " w=" << e.word;
        case EventKind::Lock: return os << "LOCK " << e.lock_id;
        case EventKind::Unlock: return os << "UNLOCK " << e.lock_id;
        case EventKind::Nop: return os << "NOP " << e.count;
    }
    return os;
}

// Per-thread instruction streams. The file encodes no global interleaving;
// the simulator derives timing.
struct Trace {
    std::vector<std::vector<TraceEvent>> streams;

    std::uint32_t thread_count() const { return static_cast<std::uint32_t>(streams.size()); }

    std::size_t event_count() const {
        std::size_t n = 0;
        for (const auto& s : streams) n += s.size();
        return n;
    }

    std::size_t region_count() const {
        std::size_t n = 0;
        for (const auto& s : streams)
            for (const auto& e : s)
                if (e.kind == EventKind::Begin) ++n;
        return n;
    }

    // All lines touched by any Store in the trace (the data universe for
    // state comparisons).
    std::set<LineAddr> stored_lines() const {
        std::set<LineAddr> out;
        for (const auto& s : streams)
            for (const auto& e : s)
                if (e.kind == EventKind::Store) out.insert(e.line);
        return out;
    }

    bool operator==(const Trace& o) const { return streams == o.streams; }
};

class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

inline std::uint64_t parse_uint(const std::string& tok, int base, int lineno, const char* what) {
    try {
        size_t pos = 0;
        unsigned long long v = std::stoull(tok, &pos, base);
        if (pos != tok.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ParseError(lineno, std::string("bad ") + what + ": " + tok);
    }
}

}  // namespace detail

// Parses the trace text grammar. One event per line, `#` comments and blank
// lines ignored. Byte addresses are canonicalized to line numbers (>> 6).
inline Trace parse_trace(const std::string& text) {
    std::map<ThreadId, std::vector<TraceEvent>> streams;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        auto hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        auto toks = detail::split_ws(raw);
        if (toks.empty()) continue;

        const std::string& head = toks[0];
        if (head.size() < 2 || (head[0] != 'T' && head[0] != 't'))
            throw ParseError(lineno, "expected T<tid>, got: " + head);
        ThreadId tid = static_cast<ThreadId>(
            detail::parse_uint(head.substr(1), 10, lineno, "thread id"));
        if (toks.size() < 2) throw ParseError(lineno, "missing event keyword");
        std::string kw = toks[1];
        std::transform(kw.begin(), kw.end(), kw.begin(), ::toupper);

        auto need_args = [&](size_t n) {
            if (toks.size() != 2 + n)
                throw ParseError(lineno, kw + " expects " + std::to_string(n) + " argument(s)");
        };
        auto parse_addr = [&](const std::string& tok) -> LineAddr {
            std::uint64_t byte_addr = detail::parse_uint(tok, 16, lineno, "address");
            return byte_addr >> kLineShift;
        };
        auto parse_word = [&](const std::string& tok) -> int {
            std::uint64_t w = detail::parse_uint(tok, 10, lineno, "word index");
            if (w >= kWordsPerLine)
                throw ParseError(lineno, "word index out of range [0,8): " + tok);
            return static_cast<int>(w);
        };

        TraceEvent ev;
        if (kw == "BEGIN") {
            need_args(0);
            ev = TraceEvent::region_begin();
        } else if (kw == "END") {
            need_args(0);
            ev = TraceEvent::region_end();
        } else if (kw == "ST") {
            need_args(3);
            ev = TraceEvent::store(parse_addr(toks[2]), parse_word(toks[3]),
                                   detail::parse_uint(toks[4], 0, lineno, "store value"));
        } else if (kw == "LD") {
            need_args(2);
            ev = TraceEvent::load(parse_addr(toks[2]), parse_word(toks[3]));
        } else if (kw == "LOCK") {
            need_args(1);
            ev = TraceEvent::lock(detail::parse_uint(toks[2], 10, lineno, "lock id"));
        } else if (kw == "UNLOCK") {
            need_args(1);
            ev = TraceEvent::unlock(detail::parse_uint(toks[2], 10, lineno, "lock id"));
        } else if (kw == "NOP") {
            need_args(1);
            std::uint64_t n = detail::parse_uint(toks[2], 10, lineno, "nop count");
            if (n < 1) throw ParseError(lineno, "NOP count must be >= 1");
            ev = TraceEvent::nop(n);
        } else {
            throw ParseError(lineno, "unknown event: " + kw);
        }
        ev.src_line = lineno;
        streams[tid].push_back(ev);
    }

    Trace trace;
    if (!streams.empty()) {
        ThreadId max_tid = streams.rbegin()->first;
        for (ThreadId t = 0; t <= max_tid; ++t)
            if (!streams.count(t))
                throw ParseError(0, "thread ids must be dense from 0; missing T" + std::to_string(t));
        trace.streams.resize(max_tid + 1);
        for (auto& [tid, evs] : streams) trace.streams[tid] = std::move(evs);
    }
    return trace;
}

// Canonical serializer; parse_trace(render(t)) == t for canonical traces.
inline std::string render(const Trace& trace) {
    std::ostringstream out;
    for (ThreadId t = 0; t < trace.thread_count(); ++t) {
        for (const auto& e : trace.streams[t]) {
            out << "T" << t << " ";
            switch (e.kind) {
                case EventKind::Begin: out << "BEGIN"; break;
                case EventKind::End: out << "END"; break;
                case EventKind::Store: {
                    std::ostringstream hex;
                    hex << std::hex << (e.line << kLineShift);
                    out << "ST 0x" << hex.str() << " " << e.word << " " << e.value;
                    break;
                }
                case EventKind::Load: {
                    std::ostringstream hex;
                    hex << std::hex << (e.line << kLineShift);
                    out << "LD 0x" << hex.str() << " " << e.word;
                    break;
                }
                case EventKind::Lock: out << "LOCK " << e.lock_id; break;
                case EventKind::Unlock: out << "UNLOCK " << e.lock_id; break;
                case EventKind::Nop: out << "NOP " << e.count; break;
            }
            out << "\n";
        }
    }
    return out.str();
}

struct Violation {
    ThreadId thread = 0;
    std::string message;
};

// Checks every Trace invariant: Begin/End alternation, accesses inside
// regions, lock nesting, regions not straddling lock boundaries, and
// race-freedom (conflicting cross-thread regions share a lock).
inline std::vector<Violation> validate(const Trace& trace) {
    std::vector<Violation> out;

    struct RegionInfo {
        ThreadId thread;
        std::uint32_t seq;
        std::set<LockId> held;
        std::set<LineAddr> lines;
    };
    std::vector<RegionInfo> regions;

    for (ThreadId t = 0; t < trace.thread_count(); ++t) {
        bool in_region = false;
        std::uint32_t seq = 0;
        std::vector<LockId> lock_stack;
        std::set<LockId> held;
        RegionInfo current;
        for (const auto& e : trace.streams[t]) {
            switch (e.kind) {
                case EventKind::Begin:
                    if (in_region) {
                        out.push_back({t, "nested region (BEGIN inside region)"});
                    } else {
                        in_region = true;
                        current = RegionInfo{t, seq, held, {}};
                    }
                    break;
                case EventKind::End:
                    if (!in_region) {
                        out.push_back({t, "END without matching BEGIN"});
                    } else {
                        in_region = false;
                        regions.push_back(current);
                        ++seq;
                    }
                    break;
                case EventKind::Store:
                case EventKind::Load:
                    if (e.word < 0 || e.word >= kWordsPerLine)
                        out.push_back({t, "word index out of range"});
                    if (!in_region) {
                        out.push_back({t, std::string(e.kind == EventKind::Store ? "store" : "load") +
                                              " outside atomic region"});
                    } else {
                        current.lines.insert(e.line);
                    }
                    break;
                case EventKind::Lock:
                    if (in_region) {
                        out.push_back({t, "region straddles lock boundary (LOCK inside region)"});
                    } else if (held.count(e.lock_id)) {
                        out.push_back({t, "lock " + std::to_string(e.lock_id) + " acquired twice"});
                    } else {
                        lock_stack.push_back(e.lock_id);
                        held.insert(e.lock_id);
                    }
                    break;
                case EventKind::Unlock:
                    if (in_region) {
                        out.push_back({t, "region straddles lock boundary (UNLOCK inside region)"});
                    } else if (lock_stack.empty() || lock_stack.back() != e.lock_id) {
                        out.push_back({t, "improper lock nesting at UNLOCK " + std::to_string(e.lock_id)});
                    } else {
                        lock_stack.pop_back();
                        held.erase(e.lock_id);
                    }
                    break;
                case EventKind::Nop:
                    break;
            }
        }
        if (in_region) out.push_back({t, "unterminated region at end of stream"});
        if (!lock_stack.empty())
            out.push_back({t, "lock " + std::to_string(lock_stack.back()) + " never released"});
    }

    // Race-freedom: two regions on different threads touching a common line
    // must both run under a common lock.
    for (size_t i = 0; i < regions.size(); ++i) {
        for (size_t j = i + 1; j < regions.size(); ++j) {
            const auto& a = regions[i];
            const auto& b = regions[j];
            if (a.thread == b.thread) continue;
            bool lines_overlap = false;
            for (LineAddr l : a.lines)
                if (b.lines.count(l)) {
                    lines_overlap = true;
                    break;
                }
            if (!lines_overlap) continue;
            bool lock_shared = false;
            for (LockId l : a.held)
                if (b.held.count(l)) {
                    lock_shared = true;
                    break;
                }
            if (!lock_shared)
                out.push_back({a.thread,
                               "unsynchronized conflicting regions " + to_string({a.thread, a.seq}) +
                                   " and " + to_string({b.thread, b.seq})});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Workload generators

enum class WorkloadKind { Swap, Counter, Hashmap, Queue, ProducerConsumer };

inline const char* to_string(WorkloadKind k) {
    switch (k) {
        case WorkloadKind::Swap: return "swap";
        case WorkloadKind::Counter: return "counter";
        case WorkloadKind::Hashmap: return "hashmap";
        case WorkloadKind::Queue: return "queue";
        case WorkloadKind::ProducerConsumer: return "producer_consumer";
    }
    return "?";
}

struct WorkloadSpec {
    WorkloadKind kind = WorkloadKind::Swap;
    std::uint32_t regions = 1;            // per thread
    std::uint32_t stores_per_region = 1;
    std::uint32_t threads = 1;
    std::uint32_t line_pool = 8;
    std::uint64_t seed = 1;

    void check() const {
        if (regions < 1 || stores_per_region < 1 || threads < 1 || line_pool < 1)
            throw std::invalid_argument("workload counts must be >= 1");
        if (kind == WorkloadKind::ProducerConsumer && threads < 2)
            throw std::invalid_argument("producer_consumer requires threads >= 2");
    }
};

// Workload spec string: comma-separated key=value, e.g.
// "kind=swap,regions=4,stores_per_region=2,threads=1,line_pool=8,seed=1".
inline WorkloadSpec parse_workload_spec(const std::string& text) {
    WorkloadSpec spec;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("workload spec: expected key=value, got: " + item);
        std::string key = item.substr(0, eq);
        std::string val = item.substr(eq + 1);
        if (key == "kind") {
            if (val == "swap") spec.kind = WorkloadKind::Swap;
            else if (val == "counter") spec.kind = WorkloadKind::Counter;
            else if (val == "hashmap") spec.kind = WorkloadKind::Hashmap;
            else if (val == "queue") spec.kind = WorkloadKind::Queue;
            else if (val == "producer_consumer") spec.kind = WorkloadKind::ProducerConsumer;
            else throw std::invalid_argument("unknown workload kind: " + val);
        } else {
            std::uint64_t n;
            try {
                size_t pos = 0;
                n = std::stoull(val, &pos, 0);
                if (pos != val.size()) throw std::invalid_argument("");
            } catch (...) {
                throw std::invalid_argument("workload spec: bad integer for " + key + ": " + val);
            }
            if (key == "regions") spec.regions = static_cast<std::uint32_t>(n);
            else if (key == "stores_per_region") spec.stores_per_region = static_cast<std::uint32_t>(n);
            else if (key == "threads") spec.threads = static_cast<std::uint32_t>(n);
            else if (key == "line_pool") spec.line_pool = static_cast<std::uint32_t>(n);
            else if (key == "seed") spec.seed = n;
            else throw std::invalid_argument("unknown workload key: " + key);
        }
    }
    return spec;
}

namespace detail {

// splitmix64: deterministic across platforms, unlike <random> distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform-ish in [0, n); n >= 1.
    std::uint64_t below(std::uint64_t n) { return next() % n; }

private:
    std::uint64_t state_;
};

// Lines owned by one thread: pool indices congruent to the thread id.
inline std::vector<LineAddr> thread_partition(ThreadId t, std::uint32_t threads, std::uint32_t pool) {
    std::vector<LineAddr> lines;
    for (std::uint32_t l = t; l < pool; l += threads) lines.push_back(l);
    return lines;
}

}  // namespace detail

// Deterministic benchmark generators. Cross-thread conflicts appear only in
// producer_consumer, which serializes them with per-item locks arranged so
// the pipeline order is forced regardless of per-scheme timing.
inline Trace generate(const WorkloadSpec& spec) {
    spec.check();
    Trace trace;
    trace.streams.resize(spec.threads);

    // Virtual word values so stores carry meaningful literal data.
    std::map<std::pair<LineAddr, int>, Word> vals;
    auto get = [&](LineAddr l, int w) -> Word {
        auto it = vals.find({l, w});
        return it == vals.end() ? 0 : it->second;
    };
    auto put = [&](std::vector<TraceEvent>& s, LineAddr l, int w, Word v) {
        vals[{l, w}] = v;
        s.push_back(TraceEvent::store(l, w, v));
    };

    switch (spec.kind) {
        case WorkloadKind::Swap: {
            // Per region: pairs of stores exchanging two (line, word) slots.
            for (ThreadId t = 0; t < spec.threads; ++t) {
                detail::Rng rng(spec.seed * 0x10001 + t);
                auto part = detail::thread_partition(t, spec.threads, spec.line_pool);
                auto& s = trace.streams[t];
                std::uint32_t pairs = std::max<std::uint32_t>(1, (spec.stores_per_region + 1) / 2);
                for (std::uint32_t r = 0; r < spec.regions; ++r) {
                    s.push_back(TraceEvent::region_begin());
                    if (!part.empty()) {
                        for (std::uint32_t p = 0; p < pairs; ++p) {
                            LineAddr la = part[rng.below(part.size())];
                            LineAddr lb = part[rng.below(part.size())];
                            int wa = static_cast<int>(rng.below(kWordsPerLine));
                            int wb = static_cast<int>(rng.below(kWordsPerLine));
                            if (la == lb && wa == wb) wb = (wa + 1) % kWordsPerLine;
                            Word va = get(la, wa), vb = get(lb, wb);
                            put(s, la, wa, vb ^ (r + 1));
                            put(s, lb, wb, va ^ (r + 1));
                        }
                    }
                    s.push_back(TraceEvent::region_end());
                }
            }
            break;
        }
        case WorkloadKind::Counter: {
            // Hot-line updates: every region rewrites one or two counter lines.
            for (ThreadId t = 0; t < spec.threads; ++t) {
                detail::Rng rng(spec.seed * 0x20002 + t);
                auto part = detail::thread_partition(t, spec.threads, spec.line_pool);
                auto& s = trace.streams[t];
                size_t hot = std::min<size_t>(2, part.size());
                for (std::uint32_t r = 0; r < spec.regions; ++r) {
                    s.push_back(TraceEvent::region_begin());
                    for (std::uint32_t k = 0; k < spec.stores_per_region && hot > 0; ++k) {
                        LineAddr l = part[k % hot];
                        int w = static_cast<int>(rng.below(kWordsPerLine));
                        put(s, l, w, get(l, w) + 1);
                    }
                    s.push_back(TraceEvent::region_end());
                }
            }
            break;
        }
        case WorkloadKind::Hashmap: {
            // Scattered writes across the thread's bucket lines, with a read
            // of the bucket before each insert.
            for (ThreadId t = 0; t < spec.threads; ++t) {
                detail::Rng rng(spec.seed * 0x30003 + t);
                auto part = detail::thread_partition(t, spec.threads, spec.line_pool);
                auto& s = trace.streams[t];
                for (std::uint32_t r = 0; r < spec.regions; ++r) {
                    s.push_back(TraceEvent::region_begin());
                    for (std::uint32_t k = 0; k < spec.stores_per_region && !part.empty(); ++k) {
                        LineAddr l = part[rng.below(part.size())];
                        int w = static_cast<int>(rng.below(kWordsPerLine));
                        s.push_back(TraceEvent::load(l, w));
                        put(s, l, w, rng.next() | 1);
                    }
                    s.push_back(TraceEvent::region_end());
                }
            }
            break;
        }
        case WorkloadKind::Queue: {
            // Ring-buffer enqueues: slot write plus hot head-index update.
            for (ThreadId t = 0; t < spec.threads; ++t) {
                auto part = detail::thread_partition(t, spec.threads, spec.line_pool);
                auto& s = trace.streams[t];
                for (std::uint32_t r = 0; r < spec.regions; ++r) {
                    s.push_back(TraceEvent::region_begin());
                    if (!part.empty()) {
                        LineAddr head = part[0];
                        for (std::uint32_t k = 0; k + 1 < spec.stores_per_region; ++k) {
                            LineAddr slot = part.size() > 1
                                                ? part[1 + (r + k) % (part.size() - 1)]
                                                : head;
                            int w = static_cast<int>((r + k) % kWordsPerLine);
                            put(s, slot, w, (static_cast<Word>(r) << 16) | (k + 1));
                        }
                        s.push_back(TraceEvent::load(head, 0));
                        put(s, head, 0, get(head, 0) + 1);
                    }
                    s.push_back(TraceEvent::region_end());
                }
            }
            break;
        }
        case WorkloadKind::ProducerConsumer: {
            // Pipeline: for item k, stage i reads stage i-1's line and writes
            // its own, all stages of item k under lock k%G. Stage lines are
            // unique per (item%G, stage), so every conflict shares a lock.
            std::uint32_t groups =
                std::max<std::uint32_t>(1, spec.line_pool / spec.threads);
            auto stage_line = [&](std::uint32_t item, ThreadId stage) -> LineAddr {
                return static_cast<LineAddr>((item % groups) * spec.threads + stage);
            };
            for (ThreadId t = 0; t < spec.threads; ++t) {
                auto& s = trace.streams[t];
                for (std::uint32_t k = 0; k < spec.regions; ++k) {
                    LockId lk = k % groups;
                    s.push_back(TraceEvent::lock(lk));
                    s.push_back(TraceEvent::region_begin());
                    LineAddr mine = stage_line(k, t);
                    if (t > 0) {
                        LineAddr prev = stage_line(k, t - 1);
                        for (std::uint32_t w = 0; w < std::min<std::uint32_t>(spec.stores_per_region, kWordsPerLine); ++w)
                            s.push_back(TraceEvent::load(prev, static_cast<int>(w)));
                    }
                    for (std::uint32_t j = 0; j < spec.stores_per_region; ++j) {
                        int w = static_cast<int>(j % kWordsPerLine);
                        put(s, mine, w, (static_cast<Word>(k + 1) << 8) | (t + 1));
                    }
                    s.push_back(TraceEvent::region_end());
                    s.push_back(TraceEvent::unlock(lk));
                }
            }
            break;
        }
    }
    return trace;
}

}  // namespace asapsim
