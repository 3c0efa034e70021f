#ifndef GRUV_RNG_HPP
#define GRUV_RNG_HPP

#include <cstdint>
#include <limits>

/**
 * @file rng.hpp
 *
 * @brief Counter-based SplitMix64 streams.
 *
 * The i-th output of a stream is `mix(key + i * golden)`, so it depends only on the stream key and the counter.
 * Keys are derived from a master seed and a stream id, which makes every simulated block reproducible on its own.
 */

namespace gruv {

inline constexpr std::uint64_t splitmix_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream) {
    return splitmix_mix(seed ^ splitmix_mix(stream + 0x632BE59BD9B4E019ULL));
}

/**
 * @brief UniformRandomBitGenerator over one counter-based stream.
 */
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(stream_key(seed, stream)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        ++counter_;
        return splitmix_mix(key_ + counter_ * golden);
    }

    std::uint64_t counter() const { return counter_; }

private:
    static constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ULL;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}

#endif
