#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sten/tensor.hpp"

namespace sten {

/// One named trainable tensor plus its gradient and optimizer accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor gradient;
  Tensor accumulator;

  explicit Parameter(std::string n, Shape shape)
      : name(std::move(n)), value(shape), gradient(shape), accumulator(std::move(shape)) {}
};

/// Owns every trainable tensor of a model, in registration order.
/// Names are unique; lookups are by name, iteration is ordered.
class ParameterStore {
 public:
  Parameter& create(std::string name, Shape shape);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  bool has(std::string_view name) const { return index_.count(std::string(name)) > 0; }

  std::size_t size() const { return items_.size(); }
  std::size_t element_count() const;

  Parameter& operator[](std::size_t i) { return *items_[i]; }
  const Parameter& operator[](std::size_t i) const { return *items_[i]; }

  void zero_gradients();

 private:
  std::vector<std::unique_ptr<Parameter>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace sten
