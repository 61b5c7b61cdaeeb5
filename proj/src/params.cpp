#include "sten/params.hpp"

namespace sten {

Parameter& ParameterStore::create(std::string name, Shape shape) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  items_.push_back(std::make_unique<Parameter>(name, std::move(shape)));
  index_.emplace(items_.back()->name, items_.size() - 1);
  return *items_.back();
}

Parameter& ParameterStore::at(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter: " + std::string(name));
  return *items_[it->second];
}

const Parameter& ParameterStore::at(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter: " + std::string(name));
  return *items_[it->second];
}

std::size_t ParameterStore::element_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p->value.size();
  return n;
}

void ParameterStore::zero_gradients() {
  for (auto& p : items_) p->gradient.fill(0.0);
}

}  // namespace sten
