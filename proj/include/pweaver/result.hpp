#pragma once

#include <optional>
#include <string>
#include <utility>

namespace pweaver {

/// Value-or-error carrier for operations where failure is an ordinary
/// outcome rather than an exceptional one.
template <typename T>
struct Result {
  std::optional<T> value;
  std::string error;

  bool ok() const { return value.has_value(); }
  const T& operator*() const { return *value; }
  const T* operator->() const { return &*value; }

  static Result success(T v) { return Result{std::move(v), {}}; }
  static Result failure(std::string message) { return Result{std::nullopt, std::move(message)}; }
};

}  // namespace pweaver
