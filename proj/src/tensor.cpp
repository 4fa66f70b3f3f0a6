#include "action4d/tensor.hpp"

#include "action4d/error.hpp"

namespace action4d {

Tensor::Tensor(std::vector<int> extents, std::vector<float> values)
    : dims(std::move(extents)), data(std::move(values)) {
  if (dims.empty() || dims.size() > 5) throw ContractViolation("tensor: rank must be 1..5");
  for (int d : dims) {
    if (d < 1) throw ContractViolation("tensor: extents must be >= 1");
  }
  if (data.size() != element_count(dims)) throw ContractViolation("tensor: data length != product of dims");
}

}  // namespace action4d
