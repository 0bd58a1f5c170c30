#include "samctr/parameter_store.hpp"

#include <cmath>

#include "samctr/errors.hpp"

namespace samctr {

SlotId ParameterStore::add(const std::string& name, DenseMatrix value, bool trainable) {
  if (contains(name)) throw ContractError("ParameterStore: duplicate slot '" + name + "'");
  const SlotId id = slots_.size();
  DenseMatrix grad(value.rows(), value.cols());
  slots_.push_back(ParameterSlot{name, std::move(value), std::move(grad), trainable});
  index_.emplace(name, id);
  return id;
}

SlotId ParameterStore::id(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("ParameterStore: missing slot '" + name + "'");
  return it->second;
}

void ParameterStore::zero_grad() {
  for (auto& s : slots_) s.grad.fill(0.0);
}

std::size_t ParameterStore::trainable_count() const {
  std::size_t n = 0;
  for (const auto& s : slots_) {
    if (s.trainable) n += s.value.size();
  }
  return n;
}

std::size_t ParameterStore::total_count() const {
  std::size_t n = 0;
  for (const auto& s : slots_) n += s.value.size();
  return n;
}

std::vector<double> ParameterStore::flat_values() const {
  std::vector<double> out;
  out.reserve(trainable_count());
  for (const auto& s : slots_) {
    if (s.trainable) out.insert(out.end(), s.value.span().begin(), s.value.span().end());
  }
  return out;
}

std::vector<double> ParameterStore::flat_grads() const {
  std::vector<double> out;
  out.reserve(trainable_count());
  for (const auto& s : slots_) {
    if (s.trainable) out.insert(out.end(), s.grad.span().begin(), s.grad.span().end());
  }
  return out;
}

bool ParameterStore::same_values(const ParameterStore& other) const {
  if (slots_.size() != other.slots_.size()) return false;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i].name != other.slots_[i].name) return false;
    if (!(slots_[i].value == other.slots_[i].value)) return false;
  }
  return true;
}

double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void fill_xavier(DenseMatrix& m, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double a = xavier_bound(fan_in, fan_out);
  std::uniform_real_distribution<double> dist(-a, a);
  for (double& v : m.span()) v = dist(rng);
}

double apply_l2(ParameterStore& store, double lambda) {
  if (lambda == 0.0) return 0.0;
  double penalty = 0.0;
  for (auto& s : store) {
    if (!s.trainable) continue;
    auto vals = s.value.span();
    auto grads = s.grad.span();
    for (std::size_t k = 0; k < vals.size(); ++k) {
      penalty += vals[k] * vals[k];
      grads[k] += 2.0 * lambda * vals[k];
    }
  }
  return lambda * penalty;
}

}  // namespace samctr
