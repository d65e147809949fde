#include "timediff/nn/param_store.hpp"

#include "timediff/error.hpp"

namespace timediff::nn {

std::size_t ParamStore::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  for (const auto& e : tensors_) {
    if (e.name == name) throw InvalidArgument("duplicate tensor name '" + name + "'");
  }
  tensors_.push_back({std::move(name), Eigen::MatrixXd::Zero(rows, cols)});
  return tensors_.size() - 1;
}

std::size_t ParamStore::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].name == name) return i;
  }
  throw InvalidArgument("no tensor named '" + std::string(name) + "'");
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : tensors_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

bool ParamStore::same_layout(const ParamStore& other) const {
  if (other.tensors_.size() != tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const auto& a = tensors_[i];
    const auto& b = other.tensors_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) return false;
  }
  return true;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  out.tensors_.reserve(tensors_.size());
  for (const auto& e : tensors_) {
    out.tensors_.push_back({e.name, Eigen::MatrixXd::Zero(e.value.rows(), e.value.cols())});
  }
  return out;
}

void ParamStore::set_zero() {
  for (auto& e : tensors_) e.value.setZero();
}

void ParamStore::scale(double s) {
  for (auto& e : tensors_) e.value *= s;
}

void ParamStore::add_scaled(const ParamStore& other, double s) {
  require_same_layout(*this, other, "add_scaled");
  for (std::size_t i = 0; i < tensors_.size(); ++i) tensors_[i].value += s * other.tensors_[i].value;
}

bool ParamStore::all_finite() const {
  for (const auto& e : tensors_) {
    if (!e.value.allFinite()) return false;
  }
  return true;
}

void require_same_layout(const ParamStore& a, const ParamStore& b, const char* context) {
  if (a.size() != b.size()) {
    throw InvalidArgument(std::string(context) + ": tensor count " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.name(i) != b.name(i) || a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols()) {
      throw InvalidArgument(std::string(context) + ": layout differs at tensor '" + a.name(i) + "'");
    }
  }
}

}  // namespace timediff::nn
