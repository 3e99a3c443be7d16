#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fnd::io {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

// SplitMix64 finalizer; used to derive independent seeds from tuples.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts);

// Unbiased draw in [0, bound) that only depends on the mt19937_64 stream.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t bound);

// Fisher-Yates over `items`, bit-reproducible across standard libraries.
template <typename T>
void shuffle(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

// Worker cap from FND_WORKERS, falling back to hardware concurrency.
unsigned worker_count();

// Runs body(i) for i in [0, n) on up to `workers` threads. The first
// exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& body);

// Little-endian primitives for the binary formats.
void put_u32(std::string& out, std::uint32_t v);
void put_f32(std::string& out, float v);

class ByteReader {
public:
    explicit ByteReader(std::string_view data) : data_(data) {}

    std::uint32_t u32();
    std::uint8_t u8();
    float f32();
    std::string_view bytes(std::size_t n);
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n) const;

    std::string_view data_;
    std::size_t pos_ = 0;
};

} // namespace fnd::io
