#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "marl/errors.hpp"

namespace marl::tensor {

/// One named row-major parameter tensor with its gradient buffer.
template <class T>
struct Param {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<T> value;
  std::vector<T> grad;

  std::size_t size() const { return value.size(); }
};

using ParamHandle = int;

/// Flat parameter store for one network.
///
/// Parameters are registered once at construction time; handles stay valid for
/// the lifetime of the store (and of any copy of it). Tapes bind directly to
/// the value/grad storage, so no parameter may be added while a tape that
/// refers to this store is alive.
template <class T>
class ParamStore {
 public:
  ParamHandle add(std::string name, int rows, int cols) {
    if (rows <= 0 || cols <= 0) {
      throw ShapeError("parameter '" + name + "' has non-positive shape " + std::to_string(rows) +
                       "x" + std::to_string(cols));
    }
    for (const auto& p : params_) {
      if (p.name == name) throw ConfigError("duplicate parameter name '" + name + "'");
    }
    Param<T> p;
    p.name = std::move(name);
    p.rows = rows;
    p.cols = cols;
    p.value.assign(static_cast<std::size_t>(rows) * cols, T(0));
    p.grad.assign(p.value.size(), T(0));
    params_.push_back(std::move(p));
    return static_cast<ParamHandle>(params_.size() - 1);
  }

  Param<T>& operator[](ParamHandle h) { return params_.at(static_cast<std::size_t>(h)); }
  const Param<T>& operator[](ParamHandle h) const { return params_.at(static_cast<std::size_t>(h)); }

  ParamHandle find(std::string_view name) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].name == name) return static_cast<ParamHandle>(i);
    }
    throw ConfigError("no parameter named '" + std::string(name) + "'");
  }

  bool contains(std::string_view name) const {
    for (const auto& p : params_) {
      if (p.name == name) return true;
    }
    return false;
  }

  std::span<Param<T>> params() { return params_; }
  std::span<const Param<T>> params() const { return params_; }
  std::size_t size() const { return params_.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), T(0));
  }

  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

 private:
  std::vector<Param<T>> params_;
  std::uint64_t version_ = 0;
};

/// uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) fill.
template <class T, class Rng>
void init_uniform(Param<T>& p, int fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : p.value) v = static_cast<T>(dist(rng));
}

}  // namespace marl::tensor
