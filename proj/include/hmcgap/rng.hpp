#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace hmcgap {

/// Philox4x32-10 block function (Salmon et al., Random123). Stateless: the same
/// (counter, key) always yields the same four words.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Sequential draws from the counter-based stream keyed by (seed, chain, step).
///
/// Two streams with equal keys produce identical sequences regardless of which
/// thread owns them or in what order other streams were consumed.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t chain, std::uint64_t step);

    /// Uniform on the open interval (0,1) with 53 random bits.
    double uniform();
    /// Standard normal by inverse CDF of a single uniform.
    double normal();
    void fill_normal(std::span<double> out);
    std::uint32_t next_word();

    std::uint64_t seed() const { return seed_; }
    std::uint64_t chain() const { return chain_; }
    std::uint64_t step() const { return step_; }

private:
    void refill();

    std::uint64_t seed_;
    std::uint64_t chain_;
    std::uint64_t step_;
    std::uint32_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int used_ = 4;
};

}  // namespace hmcgap
