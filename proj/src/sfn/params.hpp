#pragma once

// Named parameter tensors, initialisation and the "SFNC" checkpoint format.

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "sfn/autograd.hpp"

namespace sfn {

enum class ParamInit { fan_in_uniform, zeros, ones };

struct ParamSpec {
  std::string name;                 // hierarchical, dot separated
  std::vector<Eigen::Index> shape;  // rank 1 (stored 1 x n) or rank 2
  ParamInit init = ParamInit::fan_in_uniform;
  Eigen::Index fan_in = 1;

  Eigen::Index rows() const { return shape.size() == 1 ? 1 : shape[0]; }
  Eigen::Index cols() const { return shape.back(); }
};

template <typename T>
class ParamStore {
 public:
  using Matrix = Mat<T>;

  ParamStore() = default;
  /// Zero-filled store; throws on duplicate names or bad ranks.
  explicit ParamStore(std::vector<ParamSpec> specs);

  std::size_t size() const { return specs_.size(); }
  const ParamSpec& spec(std::size_t i) const { return specs_[i]; }
  const std::vector<ParamSpec>& specs() const { return specs_; }
  bool contains(const std::string& name) const { return index_.contains(name); }
  std::size_t index(const std::string& name) const;

  const Matrix& value(std::size_t i) const { return values_[i]; }
  Matrix& value(std::size_t i) { return values_[i]; }
  const Matrix& value(const std::string& name) const { return values_[index(name)]; }
  Matrix& value(const std::string& name) { return values_[index(name)]; }

  std::vector<Matrix>& grads() { return grads_; }
  const std::vector<Matrix>& grads() const { return grads_; }
  void zero_grads();

  /// Total number of scalars.
  std::size_t parameter_count() const;
  /// Scalars in parameters whose name starts with `prefix`.
  std::size_t parameter_count(const std::string& prefix) const;

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out(specs_);
    for (std::size_t i = 0; i < size(); ++i) out.value(i) = values_[i].template cast<U>();
    return out;
  }

 private:
  std::vector<ParamSpec> specs_;
  std::vector<Matrix> values_;
  std::vector<Matrix> grads_;
  std::unordered_map<std::string, std::size_t> index_;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;

/// Fan-in-scaled uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)); each
/// parameter draws from its own stream keyed by (seed, name).
template <typename T>
ParamStore<T> init_params(const std::vector<ParamSpec>& specs, std::uint64_t seed);

inline constexpr char kCheckpointMagic[4] = {'S', 'F', 'N', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& params,
                     std::uint64_t config_digest);

/// Loads a checkpoint whose records must match `specs` exactly (names and
/// shapes) and whose digest must equal `config_digest`.
ParamStore<float> load_checkpoint(const std::filesystem::path& path,
                                  const std::vector<ParamSpec>& specs,
                                  std::uint64_t config_digest);

std::uint64_t read_checkpoint_digest(const std::filesystem::path& path);

}  // namespace sfn
