#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>

#include <Eigen/Core>
#include <json.hpp>

#include "orchard/error.h"

namespace orchard::detail {

using Json = nlohmann::ordered_json;

// Rounds to a 1e-9 grid so output text does not depend on the last bits of a
// platform's floating point.
inline double Quantize(double x) {
  if (!std::isfinite(x)) return x;
  const double q = std::round(x * 1e9) / 1e9;
  return q == 0.0 ? 0.0 : q;
}

template <typename Derived>
Json VectorJson(const Eigen::MatrixBase<Derived>& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(Quantize(v(i)));
  return a;
}

// Exact values, for configuration round trips.
template <typename Derived>
Json ExactVectorJson(const Eigen::MatrixBase<Derived>& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

// 1-based line and column of a byte offset.
inline std::string Location(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline Json ParseJson(std::string_view text, const std::string& what) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
    throw Error(ErrorCode::kParseError, what + ": " + Location(text, at) +
                                            ": malformed JSON");
  }
}

// Typed access to the members of one JSON object; every failure names the
// dotted field path. Throws `code` on type errors and unknown members.
class ObjectReader {
 public:
  ObjectReader(const Json& object, std::string path,
               ErrorCode code = ErrorCode::kInvalidConfig)
      : object_(object), path_(std::move(path)), code_(code) {
    if (!object_.is_object()) Fail(path_, "expected an object");
  }

  std::string Field(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  [[noreturn]] void Fail(const std::string& field, const std::string& why) const {
    throw Error(code_, (field.empty() ? std::string("<root>") : field) + ": " + why);
  }

  bool Has(std::string_view key) {
    seen_.insert(std::string(key));
    return object_.contains(key) && !object_.at(key).is_null();
  }

  const Json& At(std::string_view key) {
    seen_.insert(std::string(key));
    if (!object_.contains(key)) Fail(Field(key), "missing");
    return object_.at(key);
  }

  // Optional member: leaves `out` untouched when absent.
  template <typename T>
  void Get(std::string_view key, T& out) {
    if (Has(key)) out = As<T>(object_.at(key), Field(key));
  }

  // Required member.
  template <typename T>
  T Require(std::string_view key) {
    return As<T>(At(key), Field(key));
  }

  template <int N>
  void GetVector(std::string_view key, Eigen::Matrix<double, N, 1>& out) {
    if (!Has(key)) return;
    const Json& a = object_.at(key);
    if (!a.is_array() || static_cast<int>(a.size()) != N) {
      Fail(Field(key), "expected an array of " + std::to_string(N) + " numbers");
    }
    for (int i = 0; i < N; ++i) {
      out(i) = As<double>(a[i], Field(key) + "[" + std::to_string(i) + "]");
    }
  }

  void RejectUnknown() const {
    for (const auto& [key, value] : object_.items()) {
      if (!seen_.count(key)) Fail(Field(key), "unknown field");
    }
  }

  template <typename T>
  T As(const Json& j, const std::string& field) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) Fail(field, "expected a boolean");
      return j.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer()) Fail(field, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (j.is_number_unsigned()) return static_cast<T>(j.get<std::uint64_t>());
        if (j.get<std::int64_t>() < 0) Fail(field, "must be >= 0");
      }
      return static_cast<T>(j.get<std::int64_t>());
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) Fail(field, "expected a number");
      return j.get<double>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) Fail(field, "expected a string");
      return j.get<std::string>();
    } else {
      static_assert(sizeof(T) == 0, "unsupported member type");
    }
  }

 private:
  const Json& object_;
  std::string path_;
  ErrorCode code_;
  std::set<std::string> seen_;
};

}  // namespace orchard::detail
