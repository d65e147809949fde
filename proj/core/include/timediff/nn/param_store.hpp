#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace timediff::nn {

/// Ordered collection of named double-precision tensors. Used for model
/// parameters, their gradients, and optimizer/EMA shadows, which all share
/// one layout.
class ParamStore {
 public:
  /// Appends a zero tensor and returns its index. Names must be unique.
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols);

  std::size_t size() const { return tensors_.size(); }
  Eigen::MatrixXd& operator[](std::size_t i) { return tensors_[i].value; }
  const Eigen::MatrixXd& operator[](std::size_t i) const { return tensors_[i].value; }
  const std::string& name(std::size_t i) const { return tensors_[i].name; }

  /// Index of the named tensor; throws InvalidArgument when absent.
  std::size_t index_of(std::string_view name) const;
  Eigen::MatrixXd& at(std::string_view name) { return tensors_[index_of(name)].value; }
  const Eigen::MatrixXd& at(std::string_view name) const { return tensors_[index_of(name)].value; }

  std::size_t scalar_count() const;
  bool same_layout(const ParamStore& other) const;
  ParamStore zeros_like() const;

  void set_zero();
  void scale(double s);
  /// this += s * other
  void add_scaled(const ParamStore& other, double s);
  bool all_finite() const;

 private:
  struct Entry {
    std::string name;
    Eigen::MatrixXd value;
  };
  std::vector<Entry> tensors_;
};

/// Throws InvalidArgument naming the first tensor whose shape differs.
void require_same_layout(const ParamStore& a, const ParamStore& b, const char* context);

}  // namespace timediff::nn
