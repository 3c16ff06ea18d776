#pragma once

#include <functional>
#include <span>
#include <vector>

#include "rclab/num/tape.hpp"

namespace rclab::num {

// A computation description: records ops on the tape from bound inputs and
// returns the scalar loss node.
template <class Real>
using Graph = std::function<Var(Tape<Real>&, const BasicParamSet<Real>&, std::span<const Var>)>;

template <class Real>
struct LossAndGrad {
  Real loss;
  BasicParamSet<Real> grads;
};

template <class Real>
LossAndGrad<Real> forward_and_grad(const Graph<Real>& graph, const BasicParamSet<Real>& params,
                                   std::span<const BasicTensor<Real>> inputs) {
  Tape<Real> tape;
  std::vector<Var> bound;
  bound.reserve(inputs.size());
  for (const auto& in : inputs) bound.push_back(tape.constant(in));
  const Var loss = graph(tape, params, bound);
  if (tape.value(loss).size() != 1) {
    throw ShapeError("graph loss must be scalar, got " + shape_string(tape.value(loss).shape()));
  }
  tape.backward(loss);
  return {tape.value(loss)[0], tape.gradients(params)};
}

}  // namespace rclab::num
