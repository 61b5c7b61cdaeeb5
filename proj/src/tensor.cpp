#include "sten/tensor.hpp"

#include <sstream>

namespace sten {

std::string shape_str(const Shape& s) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out << ',';
    out << s[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

Tensor::Tensor(Shape s) : shape(std::move(s)), v(shape_size(shape), 0.0) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), v(std::move(values)) {
  if (shape_size(shape) != v.size()) {
    throw ShapeError("value count " + std::to_string(v.size()) + " does not match shape " +
                     shape_str(shape));
  }
}

Tensor Tensor::full(Shape s, double value) {
  Tensor t(std::move(s));
  t.fill(value);
  return t;
}

std::size_t Tensor::dim(int i) const {
  int r = static_cast<int>(shape.size());
  if (i < 0) i += r;
  if (i < 0 || i >= r) throw ShapeError("axis " + std::to_string(i) + " out of rank " + std::to_string(r));
  return shape[static_cast<std::size_t>(i)];
}

std::size_t Tensor::leading() const {
  if (shape.empty()) return 1;
  std::size_t n = 1;
  for (std::size_t i = 0; i + 1 < shape.size(); ++i) n *= shape[i];
  return n;
}

bool Tensor::all_finite() const {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void Tensor::fill(double value) {
  for (double& x : v) x = value;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  }
}

}  // namespace sten
