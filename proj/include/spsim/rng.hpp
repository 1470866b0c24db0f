#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace spsim {

// Philox-4x32-10 counter-based generator (Salmon et al., SC'11).
// Stateless: every 128-bit counter / 64-bit key pair maps to an
// independent 128-bit block, so disjoint slots of a simulation can be
// generated in any order, or in parallel, with identical output.
namespace philox {

inline constexpr uint32_t MUL_A = 0xD2511F53u;
inline constexpr uint32_t MUL_B = 0xCD9E8D57u;
inline constexpr uint32_t WEYL_A = 0x9E3779B9u;
inline constexpr uint32_t WEYL_B = 0xBB67AE85u;

inline std::array<uint32_t, 4> block(std::array<uint32_t, 4> ctr,
                                     std::array<uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        const uint64_t p0 = uint64_t(MUL_A) * ctr[0];
        const uint64_t p1 = uint64_t(MUL_B) * ctr[2];
        ctr = {uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], uint32_t(p1),
               uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], uint32_t(p0)};
        key[0] += WEYL_A;
        key[1] += WEYL_B;
    }
    return ctr;
}

}  // namespace philox

// Purpose tags keep the draw sequences of different generators from
// colliding even when they share a seed and slot index.
enum class RngStream : uint32_t {
    pulsed = 0,
    laser = 1,
    cw = 2,
    split = 3,
    test = 99,
};

// Double-precision variate stream for one (seed, stream, slot) triple.
// Slot is typically a pulse or event index. Draws inside the slot are
// counted, so the mapping draw -> value is fixed no matter how many
// variates earlier slots consumed.
class SlotRng {
  public:
    SlotRng(uint64_t seed, uint64_t slot, RngStream stream)
        : key_{uint32_t(seed), uint32_t(seed >> 32)},
          slot_lo_(uint32_t(slot)),
          slot_hi_(uint32_t(slot >> 32)),
          stream_(uint32_t(stream)) {}

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() {
        if (avail_ == 0) refill();
        return buf_[--avail_];
    }

    // Exponential with the given mean; strictly positive.
    double exponential(double mean) { return -mean * std::log1p(-uniform()); }

    // Standard normal, Box-Muller. The slot caches the second variate.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    bool bernoulli(double p) { return uniform() < p; }

  private:
    void refill() {
        const auto out = philox::block(
            {slot_lo_, slot_hi_, draw_++, stream_}, key_);
        buf_[1] = to_unit(out[0], out[1]);
        buf_[0] = to_unit(out[2], out[3]);
        avail_ = 2;
    }

    static double to_unit(uint32_t hi, uint32_t lo) {
        const uint64_t bits = (uint64_t(hi) << 32) | lo;
        return double(bits >> 11) * 0x1.0p-53;
    }

    std::array<uint32_t, 2> key_;
    uint32_t slot_lo_, slot_hi_, stream_;
    uint32_t draw_ = 0;
    double buf_[2] = {0, 0};
    int avail_ = 0;
    double spare_ = 0;
    bool have_spare_ = false;
};

}  // namespace spsim
