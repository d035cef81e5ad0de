#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string_view>
#include <vector>

#include "topoconv/tensor.hpp"

namespace topoconv {

/// Trainable tensor with a gradient buffer of identical shape.
struct Parameter {
  Parameter() = default;
  explicit Parameter(Tensor v) : value(std::move(v)), grad(Tensor::zeros_like(value)) {}

  void zero_grad() { grad.fill(0.0); }

  Tensor value;
  Tensor grad;
};

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid until the tape is cleared.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run reverse-mode tape.
///
/// Nodes are appended in evaluation order, so a node only ever references
/// earlier nodes and the reverse sweep is a plain backwards loop. Leaves are
/// either constants (no gradient) or Parameters (gradient accumulated into
/// Parameter::grad when backward() runs). The tape is cleared by backward().
class Tape {
 public:
  // Receives the gradient flowing into the node and distributes it to inputs
  // via Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var param(Parameter& p);

  // Appends an op node. The backward closure is dropped when no input requires a gradient.
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

  const Tensor& value(const Var& v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(const Var& v) const { return nodes_.at(v.id()).requires_grad; }
  std::string_view op(const Var& v) const { return nodes_.at(v.id()).op; }

  // Adds g into the pending gradient of v. No-op for constants.
  void accumulate(const Var& v, const Tensor& g);
  // Pending gradient buffer of v, zero-initialised on first use. Only valid during backward().
  Tensor& grad_buffer(const Var& v);

  // Reverse sweep from a scalar loss; adds dloss/dp into every Parameter on the tape, then clears.
  void backward(const Var& loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    std::string_view op;
    Tensor value;
    Tensor grad;
    Parameter* param = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
};

}  // namespace topoconv
