#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "se/tensor.hpp"

namespace se {

struct Var {
  Index id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over dense tensors. Values are recorded in topological
// order as ops execute; backward walks the record once in reverse. Gradients
// accumulate additively into per-node buffers.
template <typename S>
class Tape {
 public:
  Var leaf(Tensor<S> value, bool requires_grad = false) {
    SE_CHECK(value.all_finite(), "leaf tensor holds non-finite values");
    nodes_.push_back(NodeSlot{std::move(value), Tensor<S>(), requires_grad, false});
    return Var{static_cast<Index>(nodes_.size()) - 1};
  }

  Var constant(Tensor<S> value) { return leaf(std::move(value), false); }

  // Records a computed node. The closure receives this tape and the emitted
  // node; it runs only when a gradient actually reached that node. backward_fn
  // may be empty when no parent needs gradients; op_name feeds the non-finite
  // diagnostic.
  Var emit(Tensor<S> value, bool requires_grad, std::function<void(Tape&, Var)> backward_fn,
           const char* op_name) {
    SE_CHECK(value.all_finite(), "non-finite values produced by ", op_name);
    nodes_.push_back(NodeSlot{std::move(value), Tensor<S>(), requires_grad, false});
    const Var v{static_cast<Index>(nodes_.size()) - 1};
    if (requires_grad && backward_fn) {
      records_.push_back(Record{v, std::move(backward_fn)});
    }
    return v;
  }

  const Tensor<S>& value(Var v) const { return slot(v).value; }
  bool requires_grad(Var v) const { return slot(v).requires_grad; }

  bool has_grad(Var v) const { return slot(v).grad_alloc; }

  // Gradient buffer, zero-initialized on first touch.
  Tensor<S>& grad_buffer(Var v) {
    NodeSlot& n = slot(v);
    if (!n.grad_alloc) {
      n.grad = Tensor<S>::zeros(n.value.shape());
      n.grad_alloc = true;
    }
    return n.grad;
  }

  const Tensor<S>& grad(Var v) const {
    const NodeSlot& n = slot(v);
    SE_CHECK(n.grad_alloc, "no gradient recorded for node ", v.id,
             " (did backward run, and does the node require gradients?)");
    return n.grad;
  }

  void backward(Var loss) {
    SE_CHECK(value(loss).size() == 1, "backward requires a scalar loss, got shape ",
             shape_str(value(loss).shape()));
    SE_CHECK(!backward_run_, "backward already ran on this tape; call clear_gradients() first");
    backward_run_ = true;
    grad_buffer(loss).flat().setConstant(S(1));
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
      if (has_grad(it->out)) it->fn(*this, it->out);
    }
  }

  // Zeroes every allocated gradient buffer and re-arms backward.
  void clear_gradients() {
    for (NodeSlot& n : nodes_) {
      if (n.grad_alloc) n.grad.flat().setZero();
    }
    backward_run_ = false;
  }

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct NodeSlot {
    Tensor<S> value;
    Tensor<S> grad;
    bool requires_grad = false;
    bool grad_alloc = false;
  };

  struct Record {
    Var out;
    std::function<void(Tape&, Var)> fn;
  };

  NodeSlot& slot(Var v) {
    SE_CHECK(v.valid() && v.id < static_cast<Index>(nodes_.size()), "invalid tape node ", v.id);
    return nodes_[static_cast<std::size_t>(v.id)];
  }
  const NodeSlot& slot(Var v) const {
    SE_CHECK(v.valid() && v.id < static_cast<Index>(nodes_.size()), "invalid tape node ", v.id);
    return nodes_[static_cast<std::size_t>(v.id)];
  }

  std::vector<NodeSlot> nodes_;
  std::vector<Record> records_;
  bool backward_run_ = false;
};

}  // namespace se
