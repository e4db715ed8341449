#include "skipclip/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "skipclip/errors.hpp"

namespace skipclip::numerics {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

namespace {
void check_dims(const Shape& shape) {
  for (std::size_t i = 0; i < shape.size(); ++i)
    if (shape[i] == 0) throw ShapeError("tensor axis " + std::to_string(i) + " has zero extent");
}
}  // namespace

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(std::move(shape)) {
  check_dims(shape_);
  data_.assign(shape_size(shape_), fill);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_dims(shape_);
  if (data_.size() != shape_size(shape_))
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string(shape_));
}

template <typename T>
T BasicTensor<T>::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size())
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  return BasicTensor(std::move(shape), data_);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::slice0(std::size_t begin, std::size_t end) const {
  if (rank() == 0 || begin >= end || end > shape_[0])
    throw ShapeError("slice0 [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of range for " + shape_string(shape_));
  const std::size_t row = data_.size() / shape_[0];
  Shape s = shape_;
  s[0] = end - begin;
  return BasicTensor(std::move(s),
                     std::vector<T>(data_.begin() + static_cast<std::ptrdiff_t>(begin * row),
                                    data_.begin() + static_cast<std::ptrdiff_t>(end * row)));
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
BasicTensor<T> stack(std::span<const BasicTensor<T>> parts) {
  if (parts.empty()) throw ShapeError("stack of zero tensors");
  const Shape& inner = parts[0].shape();
  std::vector<T> data;
  data.reserve(parts.size() * parts[0].size());
  for (const auto& p : parts) {
    if (p.shape() != inner)
      throw ShapeError("stack: shape " + shape_string(p.shape()) + " differs from " +
                       shape_string(inner));
    data.insert(data.end(), p.storage().begin(), p.storage().end());
  }
  Shape s{parts.size()};
  s.insert(s.end(), inner.begin(), inner.end());
  return BasicTensor<T>(std::move(s), std::move(data));
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template BasicTensor<float> stack(std::span<const BasicTensor<float>>);
template BasicTensor<double> stack(std::span<const BasicTensor<double>>);

}  // namespace skipclip::numerics
