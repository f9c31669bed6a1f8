#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "frforge/common/error.hpp"
#include "frforge/common/rng.hpp"
#include "frforge/numeric/tensor.hpp"

namespace frforge::numeric {

struct Var {
  std::size_t id = 0;
};

// Contiguous row range of one sequence inside a packed (tokens x features) matrix.
struct Segment {
  std::size_t offset = 0;
  std::size_t length = 0;
};

// Reverse-mode gradient tape. Every recorded node owns its value; gradients
// are allocated on first accumulation. Parameters are materialized from a
// ParamStore (cast to T) the first time they are referenced.
template <typename T>
class Tape {
 public:
  using Matrix = Mat<T>;
  using Backward = std::function<void(Tape&)>;

  explicit Tape(const ParamStore* params = nullptr, bool training = false, std::uint64_t seed = 0)
      : params_(params), training_(training), rng_(seed) {}

  // Parameters supplied directly at precision T (used for double-precision shadows).
  explicit Tape(const std::map<std::string, Matrix>* shadow, bool training = false, std::uint64_t seed = 0)
      : params_(nullptr), shadow_(shadow), training_(training), rng_(seed) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var param(const std::string& name) {
    if (auto it = param_ids_.find(name); it != param_ids_.end()) return {it->second};
    Matrix value;
    if (shadow_ != nullptr && shadow_->contains(name)) {
      value = shadow_->at(name);
    } else if (params_ != nullptr && params_->contains(name)) {
      value = params_->at(name).template as<T>();
    } else {
      throw ContractError("computation references unknown parameter '" + name + "'");
    }
    Var v = push(std::move(value), "param", nullptr);
    param_ids_.emplace(name, v.id);
    param_names_.emplace(v.id, name);
    return v;
  }

  Var constant(Matrix value) { return push(std::move(value), "constant", nullptr); }

  // Appends a node; throws NumericError if the forward value is not finite.
  Var record(Matrix value, const char* op, Backward backward) {
    if (!value.allFinite()) {
      throw NumericError(std::string("non-finite value produced by operation '") + op + "'");
    }
    return push(std::move(value), op, std::move(backward));
  }

  const Matrix& value(Var v) const { return nodes_[v.id].value; }

  Matrix& grad(Var v) {
    auto& n = nodes_[v.id];
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  bool has_grad(Var v) const { return nodes_[v.id].grad.size() != 0; }

  void backward(Var loss) {
    const auto& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ContractError("loss must be a scalar, got " + std::to_string(lv.rows()) + "x" +
                          std::to_string(lv.cols()));
    }
    grad(loss)(0, 0) = T(1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (n.backward && n.grad.size() != 0) n.backward(*this);
    }
  }

  // Gradient for every parameter in the store; untouched ones are zero.
  std::map<std::string, Matrix> param_grads() const {
    std::map<std::string, Matrix> out;
    auto emit = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
      auto it = param_ids_.find(name);
      if (it != param_ids_.end() && nodes_[it->second].grad.size() != 0) {
        out.emplace(name, nodes_[it->second].grad);
      } else {
        out.emplace(name, Matrix::Zero(rows, cols));
      }
    };
    if (shadow_ != nullptr) {
      for (const auto& [name, m] : *shadow_) emit(name, m.rows(), m.cols());
    } else if (params_ != nullptr) {
      for (const auto& [name, t] : *params_) {
        emit(name, static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
      }
    }
    return out;
  }

  bool training() const { return training_; }
  Rng& rng() { return rng_; }
  std::size_t size() const { return nodes_.size(); }
  const char* op_name(Var v) const { return nodes_[v.id].op; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    const char* op;
    Backward backward;
  };

  Var push(Matrix value, const char* op, Backward backward) {
    nodes_.push_back({std::move(value), Matrix(), op, std::move(backward)});
    return {nodes_.size() - 1};
  }

  const ParamStore* params_;
  const std::map<std::string, Matrix>* shadow_ = nullptr;
  bool training_;
  Rng rng_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> param_ids_;
  std::unordered_map<std::size_t, std::string> param_names_;
};

}  // namespace frforge::numeric
