#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sten/errors.hpp"

namespace sten {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

/// Dense row-major tensor of 64-bit floats.
struct Tensor {
  Shape shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(Shape s);
  Tensor(Shape s, std::vector<double> values);

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor full(Shape s, double value);
  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  std::size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }

  /// Extent of axis `i`; negative indices count from the end.
  std::size_t dim(int i) const;
  std::size_t rank() const { return shape.size(); }

  /// Product of all extents except the last (the "row" count for 2-D views).
  std::size_t leading() const;
  std::size_t last() const { return shape.empty() ? 1 : shape.back(); }

  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }

  bool all_finite() const;
  void fill(double value);

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

std::size_t shape_size(const Shape& s);

/// Throws ShapeError naming both shapes when they differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace sten
