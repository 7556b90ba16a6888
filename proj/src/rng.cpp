#include "hmcgap/rng.hpp"

#include <stdexcept>

#include "hmcgap/normal.hpp"

namespace hmcgap {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(prod >> 32);
    lo = static_cast<std::uint32_t>(prod);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kPhiloxW0;
            key[1] += kPhiloxW1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t chain, std::uint64_t step)
    : seed_(seed), chain_(chain), step_(step) {
    if (chain > 0xFFFFFFFFull) throw std::out_of_range("RandomStream: chain id exceeds 32 bits");
}

void RandomStream::refill() {
    if (block_ == 0xFFFFFFFFu) throw std::overflow_error("RandomStream: block counter exhausted");
    buffer_ = philox4x32({block_, static_cast<std::uint32_t>(step_),
                          static_cast<std::uint32_t>(step_ >> 32),
                          static_cast<std::uint32_t>(chain_)},
                         {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
    ++block_;
    used_ = 0;
}

std::uint32_t RandomStream::next_word() {
    if (used_ == 4) refill();
    return buffer_[used_++];
}

double RandomStream::uniform() {
    const std::uint64_t hi = next_word() >> 5;  // 27 bits
    const std::uint64_t lo = next_word() >> 6;  // 26 bits
    const std::uint64_t k = (hi << 26) | lo;
    return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() { return std_normal_quantile(uniform()); }

void RandomStream::fill_normal(std::span<double> out) {
    for (double& x : out) x = normal();
}

}  // namespace hmcgap
