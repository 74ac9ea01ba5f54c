#pragma once

#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>

namespace normlab {

/// 64-bit FNV-1a, used to fingerprint source files and checkpoints.
class Fnv1a64 {
public:
    void update(std::span<const std::uint8_t> bytes) noexcept {
        for (std::uint8_t b : bytes) {
            state_ ^= b;
            state_ *= 0x100000001b3ULL;
        }
    }
    void update(std::string_view s) noexcept {
        update({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
    }
    std::uint64_t value() const noexcept { return state_; }
    std::string hex() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
        return buf;
    }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string digest_hex(std::span<const std::uint8_t> bytes) {
    Fnv1a64 h;
    h.update(bytes);
    return h.hex();
}

inline std::string digest_hex(std::string_view s) {
    Fnv1a64 h;
    h.update(s);
    return h.hex();
}

}  // namespace normlab
