#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>

namespace coxpf {

/// Philox4x32-10 block function (Salmon et al. counter-based generator).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

std::uint64_t splitmix64(std::uint64_t x);

/// Named purposes used when deriving stream ids, so that e.g. the resampling
/// uniforms of step k never share a stream with particle moves of step k.
enum class StreamTag : std::uint64_t {
    initial = 1,
    propagate = 2,
    resample = 3,
    simulate = 4,
    marks = 5,
    proposal = 6,
    likelihood = 7,
    replicate = 8,
    user = 9,
};

std::uint64_t stream_id(StreamTag tag, std::uint64_t a = 0, std::uint64_t b = 0);

/**
 * @brief Counter-addressable random stream.
 *
 * Output i of stream s under seed k is a pure function of (k, s, i), so
 * draws can be regenerated anywhere without shared state. Satisfies
 * UniformRandomBitGenerator with 64-bit outputs.
 */
class RandomStream {
public:
    using result_type = std::uint64_t;

    RandomStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();

    /// Uniform on the open interval (0,1).
    double uniform();
    double normal();
    int poisson(double mean);
    double exponential(double rate);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    /// Number of 64-bit words consumed so far.
    std::uint64_t counter() const { return counter_; }

private:
    void refill();

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_;
    std::array<std::uint64_t, 2> buffer_{};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace coxpf
