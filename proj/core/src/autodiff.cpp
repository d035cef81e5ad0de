#include "topoconv/autodiff.hpp"

#include "topoconv/errors.hpp"

namespace topoconv {

const Tensor& Var::value() const { return tape_->value(*this); }
bool Var::requires_grad() const { return tape_->requires_grad(*this); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{"constant", std::move(value), {}, nullptr, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  nodes_.push_back(Node{"param", p.value, {}, &p, true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (const auto& in : inputs) {
    if (in.tape() != this) throw std::logic_error("tape: input recorded on a different tape");
    needs = needs || nodes_.at(in.id()).requires_grad;
  }
  nodes_.push_back(Node{op, std::move(value), {}, nullptr, needs, needs ? std::move(backward) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(const Var& v) {
  auto& node = nodes_.at(v.id());
  if (node.grad.empty()) node.grad = Tensor::zeros_like(node.value);
  return node.grad;
}

void Tape::accumulate(const Var& v, const Tensor& g) {
  auto& node = nodes_.at(v.id());
  if (!node.requires_grad) return;
  if (!node.value.same_shape(g)) {
    throw ShapeError(std::string("tape: gradient shape ") + shape_to_string(g.shape()) + " for node '" +
                     std::string(node.op) + "' of shape " + shape_to_string(node.value.shape()));
  }
  auto& buf = grad_buffer(v);
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

void Tape::backward(const Var& loss) {
  if (loss.tape() != this) throw std::logic_error("tape: loss recorded on a different tape");
  if (value(loss).size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_to_string(value(loss).shape()));
  }
  grad_buffer(loss).fill(1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (node.grad.empty() || !node.requires_grad) continue;
    if (node.param != nullptr) {
      auto& pg = node.param->grad;
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += node.grad[k];
    } else if (node.backward) {
      // The closure may append to other nodes' grads but never to this one's.
      const Tensor grad = std::move(node.grad);
      node.backward(*this, grad);
    }
    node.grad = Tensor();
  }
  clear();
}

void Tape::clear() { nodes_.clear(); }

}  // namespace topoconv
