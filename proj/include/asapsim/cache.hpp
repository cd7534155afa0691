#pragma once

#include <cstdint>
#include <list>
#include <optional>
#include <unordered_map>

#include "asapsim/types.hpp"

namespace asapsim {

// Write-back LRU cache tracking residency, dirtiness, and the region that
// last dirtied each line. Line contents live in the machine's architectural
// state; the cache only decides hits, misses, and victims.
class LruCache {
public:
    struct Victim {
        LineAddr line = 0;
        bool dirty = false;
        RegionId writer;  // meaningful only when dirty
    };

    explicit LruCache(std::uint32_t capacity) : capacity_(capacity) {}

    bool resident(LineAddr line) const { return map_.count(line) != 0; }
    bool dirty(LineAddr line) const {
        auto it = map_.find(line);
        return it != map_.end() && it->second.dirty;
    }
    RegionId writer(LineAddr line) const { return map_.at(line).writer; }
    std::size_t size() const { return map_.size(); }

    // Makes `line` resident and most-recent. Returns the evicted victim if
    // the insertion displaced one. `hit` reports prior residency.
    std::optional<Victim> touch(LineAddr line, bool* hit = nullptr) {
        auto it = map_.find(line);
        if (it != map_.end()) {
            if (hit) *hit = true;
            lru_.erase(it->second.pos);
            lru_.push_front(line);
            it->second.pos = lru_.begin();
            return std::nullopt;
        }
        if (hit) *hit = false;
        std::optional<Victim> victim;
        if (map_.size() >= capacity_) {
            LineAddr old = lru_.back();
            Entry& e = map_.at(old);
            victim = Victim{old, e.dirty, e.writer};
            lru_.pop_back();
            map_.erase(old);
        }
        lru_.push_front(line);
        map_[line] = Entry{false, RegionId{}, lru_.begin()};
        return victim;
    }

    void mark_dirty(LineAddr line, RegionId writer) {
        Entry& e = map_.at(line);
        e.dirty = true;
        e.writer = writer;
    }

    // A persist op now covers this line's content; drop the dirty bit.
    void mark_clean(LineAddr line) {
        auto it = map_.find(line);
        if (it != map_.end()) it->second.dirty = false;
    }

private:
    struct Entry {
        bool dirty = false;
        RegionId writer;
        std::list<LineAddr>::iterator pos;
    };

    std::uint32_t capacity_;
    std::list<LineAddr> lru_;
    std::unordered_map<LineAddr, Entry> map_;
};

}  // namespace asapsim
