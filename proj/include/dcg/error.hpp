#pragma once

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dcg {

/// Malformed arguments: out-of-range states, overlapping node sets, bad files.
class InvalidInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An exact (enumeration-based) operation would exceed the configuration cap.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evidence with zero probability under the model.
class DegenerateEvidence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = std::uint64_t{1} << 22;

namespace detail {
inline std::atomic<std::uint64_t>& enumeration_cap_storage() {
  static std::atomic<std::uint64_t> cap{kDefaultEnumerationCap};
  return cap;
}
}  // namespace detail

/// Process-wide limit on the number of configurations any exact
/// operation may enumerate.
inline std::uint64_t enumeration_cap() { return detail::enumeration_cap_storage().load(); }

inline void set_enumeration_cap(std::uint64_t cap) {
  if (cap == 0) throw InvalidInput("enumeration cap must be positive");
  detail::enumeration_cap_storage().store(cap);
}

/// Restores the previous cap on scope exit.
class ScopedEnumerationCap {
 public:
  explicit ScopedEnumerationCap(std::uint64_t cap) : previous_(enumeration_cap()) {
    set_enumeration_cap(cap);
  }
  ~ScopedEnumerationCap() { set_enumeration_cap(previous_); }
  ScopedEnumerationCap(const ScopedEnumerationCap&) = delete;
  ScopedEnumerationCap& operator=(const ScopedEnumerationCap&) = delete;

 private:
  std::uint64_t previous_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidInput(message);
}

}  // namespace dcg
