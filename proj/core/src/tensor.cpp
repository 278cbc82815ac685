#include "deltastore/tensor.hpp"

#include <cmath>

namespace deltastore {

void Tensor::validate() const {
  if (shape.empty()) {
    throw InvalidTensor("tensor '" + name + "' has an empty shape");
  }
  uint64_t n = 1;
  for (uint64_t d : shape) {
    if (d == 0) throw InvalidTensor("tensor '" + name + "' has a zero dimension");
    n *= d;
  }
  if (n != data.size()) {
    throw InvalidTensor("tensor '" + name + "' shape does not match data length");
  }
  for (float v : data) {
    if (!std::isfinite(v)) {
      throw InvalidTensor("tensor '" + name + "' contains NaN or infinity");
    }
  }
}

Tensor flatten(const Tensor& t) {
  return Tensor{t.name, {t.elem_count()}, t.data};
}

Tensor unflatten(const Tensor& flat, const std::vector<uint64_t>& shape) {
  Tensor out{flat.name, shape, flat.data};
  uint64_t n = 1;
  for (uint64_t d : shape) n *= d;
  if (n != flat.data.size()) {
    throw ShapeMismatch("unflatten: shape does not cover " +
                        std::to_string(flat.data.size()) + " elements");
  }
  return out;
}

}  // namespace deltastore
