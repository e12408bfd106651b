#pragma once

#include <limits>
#include <ostream>

namespace qstein {

// A real number or +infinity. Infinity only arises from a failed support
// condition in a relative entropy.
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;

  static constexpr ExtendedReal finite(double v) { return ExtendedReal(v, false); }
  static constexpr ExtendedReal infinity() { return ExtendedReal(0.0, true); }

  constexpr bool is_infinite() const { return infinite_; }
  constexpr bool is_finite() const { return !infinite_; }
  // +inf as a double when infinite.
  constexpr double value() const {
    return infinite_ ? std::numeric_limits<double>::infinity() : value_;
  }

  friend constexpr ExtendedReal operator+(ExtendedReal a, ExtendedReal b) {
    if (a.infinite_ || b.infinite_) return infinity();
    return finite(a.value_ + b.value_);
  }
  friend constexpr bool operator==(ExtendedReal a, ExtendedReal b) {
    return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
  }
  friend std::ostream& operator<<(std::ostream& os, ExtendedReal x) {
    if (x.infinite_) return os << "inf";
    return os << x.value_;
  }

 private:
  constexpr ExtendedReal(double v, bool inf) : value_(v), infinite_(inf) {}

  double value_ = 0.0;
  bool infinite_ = false;
};

}  // namespace qstein
