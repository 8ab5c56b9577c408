#ifndef POACHPRED_CORE_HPP
#define POACHPRED_CORE_HPP

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace poach {

// Every failure surfaced by the library carries a short category tag
// ("schema", "validation", ...) which the CLI prints verbatim.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error(message), category_(std::move(category)) {}

    [[nodiscard]] const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

#define POACHPRED_ERROR(Name, tag)                                            \
    class Name : public Error {                                               \
    public:                                                                   \
        explicit Name(const std::string& message) : Error(tag, message) {}    \
    };

POACHPRED_ERROR(SchemaError, "schema")
POACHPRED_ERROR(ValidationError, "validation")
POACHPRED_ERROR(DuplicationError, "duplication")
POACHPRED_ERROR(ConfigError, "config")
POACHPRED_ERROR(ParameterError, "parameter")
POACHPRED_ERROR(CompletenessError, "completeness")
POACHPRED_ERROR(RangeError, "range")
POACHPRED_ERROR(FormatError, "format")
POACHPRED_ERROR(CoverageError, "coverage")
POACHPRED_ERROR(AugmentationError, "augmentation")
POACHPRED_ERROR(TrainingError, "training")
POACHPRED_ERROR(DivergenceError, "divergence")
POACHPRED_ERROR(ShapeError, "shape")
POACHPRED_ERROR(FileError, "file")

#undef POACHPRED_ERROR

// splitmix64 finalizer; used to derive independent, platform-stable seeds
// for ensemble members, folds and repeats.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

[[nodiscard]] constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    for (auto p : parts) h = mix64(h ^ mix64(p));
    return h;
}

// Runs fn(i) for i in [0, n). Work items must write to disjoint slots so the
// result does not depend on the schedule.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min(hw, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n && !failed; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

// FNV-1a, hex encoded. Used as a content digest for dataset provenance.
[[nodiscard]] inline std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    return out;
}

namespace csv {

[[nodiscard]] inline std::vector<std::string> split(std::string_view line, char sep = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        auto cell = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.remove_suffix(1);
        while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
        out.emplace_back(cell);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

[[nodiscard]] inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError("cannot open '" + path + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw FileError("failed writing '" + path + "'");
}

// Non-empty lines of a text blob; a UTF-8 BOM on the first line is dropped.
[[nodiscard]] inline std::vector<std::string> lines(std::string_view text) {
    if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto pos = text.find('\n', start);
        auto line = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) out.emplace_back(line);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

// Shortest representation that parses back to the identical double.
[[nodiscard]] inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

[[nodiscard]] inline std::string format_fixed(double v, int precision) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, precision);
    return {buf, res.ptr};
}

[[nodiscard]] inline std::optional<double> parse_double(std::string_view s) {
    double v{};
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

[[nodiscard]] inline std::optional<long long> parse_int(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    long long v{};
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace csv
}  // namespace poach

#endif  // POACHPRED_CORE_HPP
