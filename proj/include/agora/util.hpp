#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>

namespace agora {

// 64-bit FNV-1a. Used for content digests (dedup, draw keys, manifests).
inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// splitmix64 finalizer; good avalanche for key mixing.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Incremental key builder for deterministic draws. All simulated randomness
// is a pure function of the values fed in, so replay never depends on call
// order or thread scheduling.
class HashStream {
public:
    HashStream& u64(uint64_t v) {
        state_ = mix64(state_ ^ v);
        return *this;
    }
    HashStream& str(std::string_view s) { return u64(fnv1a64(s)); }
    HashStream& f64(double v) {
        uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        __builtin_memcpy(&bits, &v, sizeof(bits));
        return u64(bits);
    }

    uint64_t digest() const { return mix64(state_); }

    // Uniform draw in [0, 1) from the current key.
    double uniform() const {
        return double(digest() >> 11) * 0x1.0p-53;
    }

private:
    uint64_t state_ = 0x6a09e667f3bcc908ull;
};

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

inline std::string trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// Lowercase + collapse internal whitespace runs. The normal form used for
// answer comparison everywhere (anchor matching, self-consistency majorities).
inline std::string normalize_answer(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_ws = true;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            if (!in_ws && !out.empty()) out.push_back(' ');
            in_ws = true;
        } else {
            out.push_back(char(std::tolower(static_cast<unsigned char>(c))));
            in_ws = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

// Digest of a prompt with digits and whitespace stripped: instantiations of
// one template share a topic, which is what dataset-diversity accounting
// wants to count.
inline uint64_t topic_digest(std::string_view prompt) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : prompt) {
        if (std::isdigit(c) || std::isspace(c)) continue;
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Final-answer span: text after the last marker occurrence, up to end of line.
// No marker means no extractable answer.
inline std::optional<std::string> extract_answer_span(std::string_view text,
                                                      std::string_view marker) {
    if (marker.empty()) return std::nullopt;
    size_t pos = text.rfind(marker);
    if (pos == std::string_view::npos) return std::nullopt;
    size_t start = pos + marker.size();
    size_t eol = text.find('\n', start);
    std::string_view span = text.substr(
        start, eol == std::string_view::npos ? std::string_view::npos : eol - start);
    return trim(span);
}

}  // namespace agora
