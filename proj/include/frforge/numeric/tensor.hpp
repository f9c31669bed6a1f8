#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace frforge::numeric {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Named float32 tensor, row-major. Shapes have one or two dimensions.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> values;

  std::size_t rows() const { return shape.size() == 1 ? 1 : shape[0]; }
  std::size_t cols() const { return shape.back(); }
  std::size_t size() const { return values.size(); }

  template <typename T>
  Mat<T> as() const {
    Mat<T> m(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
    for (std::size_t i = 0; i < values.size(); ++i) m.data()[i] = static_cast<T>(values[i]);
    return m;
  }

  bool operator==(const Tensor&) const = default;
};

class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  // Throws ContractError if `name` already exists.
  Tensor& add(const std::string& name, std::vector<std::size_t> shape);
  Tensor& add_normal(const std::string& name, std::vector<std::size_t> shape, double stddev);
  Tensor& add_uniform(const std::string& name, std::vector<std::size_t> shape, double limit);
  Tensor& add_constant(const std::string& name, std::vector<std::size_t> shape, float value);
  // Copies `tensor` under `name`, replacing any existing entry.
  void set(const std::string& name, Tensor tensor);

  bool contains(const std::string& name) const { return tensors_.contains(name); }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  void erase(const std::string& name) { tensors_.erase(name); }

  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }
  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  std::size_t size() const { return tensors_.size(); }
  std::size_t parameter_count() const;

  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  // Order-independent of insertion: covers names, shapes and raw bytes.
  std::uint64_t digest() const;
  bool all_finite() const;

  bool operator==(const ParamStore& other) const { return tensors_ == other.tensors_; }

 private:
  std::map<std::string, Tensor> tensors_;
  std::uint64_t seed_;
  std::uint64_t init_counter_ = 0;
};

}  // namespace frforge::numeric
