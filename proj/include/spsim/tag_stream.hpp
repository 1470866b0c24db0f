#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace spsim {

struct Tag {
    uint64_t time;    // ticks
    uint8_t channel;

    friend bool operator==(const Tag&, const Tag&) = default;
};

// Time-ordered detector click record. `resolution_ps` is the tick size
// in picoseconds (1 everywhere in this project's simulators).
struct TagStream {
    uint64_t resolution_ps = 1;
    std::vector<Tag> tags;

    double resolution_seconds() const { return resolution_ps * 1e-12; }

    uint64_t seconds_to_ticks(double s) const {
        return uint64_t(std::llround(s * 1e12 / double(resolution_ps)));
    }

    bool sorted() const {
        return std::is_sorted(tags.begin(), tags.end(),
                              [](const Tag& a, const Tag& b) {
                                  return a.time < b.time;
                              });
    }

    uint8_t max_channel() const {
        uint8_t m = 0;
        for (const auto& t : tags) m = std::max(m, t.channel);
        return m;
    }

    friend bool operator==(const TagStream&, const TagStream&) = default;
};

inline void sort_by_time(TagStream& s) {
    std::stable_sort(s.tags.begin(), s.tags.end(),
                     [](const Tag& a, const Tag& b) { return a.time < b.time; });
}

}  // namespace spsim
