#include "mononext/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

namespace mononext {

std::string Tensor::shape_string() const {
  return "(" + std::to_string(n) + "," + std::to_string(h) + "," + std::to_string(w) + "," +
         std::to_string(c) + ")";
}

Parameter::Parameter(std::string name_, std::vector<int> shape_)
    : name(std::move(name_)), shape(std::move(shape_)) {
  const std::size_t count =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<std::size_t>());
  value.assign(count, 0.0f);
  grad.assign(count, 0.0f);
}

void Parameter::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }

}  // namespace mononext
