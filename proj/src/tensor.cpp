#include "cdae/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cdae/errors.hpp"

namespace cdae {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t element_count(const Shape& shape) {
  if (shape.empty()) throw ShapeError("empty shape");
  std::size_t n = 1;
  for (auto e : shape) {
    if (e == 0) throw ShapeError("zero extent in shape " + to_string(shape));
    n *= e;
  }
  return n;
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  const auto n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  const auto n = element_count(shape);
  if (values.size() != n) {
    throw ShapeError("shape " + to_string(shape) + " needs " + std::to_string(n) + " values, got " +
                     std::to_string(values.size()));
  }
  Tensor t(std::move(shape), std::move(values));
  if (!t.all_finite()) throw DataError("non-finite value in tensor data");
  return t;
}

std::size_t Tensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw ShapeError("index rank " + std::to_string(index.size()) + " vs tensor rank " +
                     std::to_string(shape_.size()));
  }
  std::size_t flat = 0;
  for (std::size_t a = 0; a < index.size(); ++a) {
    if (index[a] >= shape_[a]) throw ShapeError("index out of bounds for " + to_string(shape_));
    flat = flat * shape_[a] + index[a];
  }
  return flat;
}

std::vector<std::size_t> Tensor::coordinates(std::size_t flat) const {
  if (flat >= data_.size()) throw ShapeError("flat index out of bounds");
  std::vector<std::size_t> coords(shape_.size());
  for (std::size_t a = shape_.size(); a-- > 0;) {
    coords[a] = flat % shape_[a];
    flat /= shape_[a];
  }
  return coords;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* context) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(context) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

namespace {

template <class Op>
Tensor zip(const Tensor& a, const Tensor& b, const char* name, Op op) {
  require_same_shape(a, b, name);
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = op(a[i], b[i]);
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return zip(a, b, "add", std::plus<>{}); }
Tensor sub(const Tensor& a, const Tensor& b) { return zip(a, b, "sub", std::minus<>{}); }
Tensor mul(const Tensor& a, const Tensor& b) { return zip(a, b, "mul", std::multiplies<>{}); }

Tensor add(const Tensor& a, double s) {
  Tensor out = a;
  for (auto& v : out.values()) v += s;
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (auto& v : out.values()) v *= s;
  return out;
}

void axpy(double s, const Tensor& b, Tensor& a) {
  require_same_shape(a, b, "axpy");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

double sum(const Tensor& a) {
  auto v = a.values();
  return std::accumulate(v.begin(), v.end(), 0.0);
}

double mean(const Tensor& a) {
  if (a.empty()) throw ShapeError("mean of empty tensor");
  return sum(a) / static_cast<double>(a.size());
}

double stddev(const Tensor& a) {
  const double m = mean(a);
  double acc = 0.0;
  for (double v : a.values()) acc += (v - m) * (v - m);
  return std::sqrt(acc / static_cast<double>(a.size()));
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace cdae
