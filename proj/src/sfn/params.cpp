#include "sfn/params.hpp"

#include <cmath>
#include <fstream>

#include "sfn/binary.hpp"
#include "sfn/error.hpp"
#include "sfn/random.hpp"

namespace sfn {

namespace fs = std::filesystem;

template <typename T>
ParamStore<T>::ParamStore(std::vector<ParamSpec> specs) : specs_(std::move(specs)) {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const ParamSpec& s = specs_[i];
    if (s.shape.empty() || s.shape.size() > 2) {
      fail(ErrorCode::invalid_argument, "parameter '" + s.name + "' must have rank 1 or 2");
    }
    if (!index_.emplace(s.name, i).second) {
      fail(ErrorCode::invalid_argument, "duplicate parameter '" + s.name + "'");
    }
    values_.push_back(Matrix::Zero(s.rows(), s.cols()));
    grads_.push_back(Matrix::Zero(s.rows(), s.cols()));
  }
}

template <typename T>
std::size_t ParamStore<T>::index(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorCode::invalid_argument, "unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
void ParamStore<T>::zero_grads() {
  for (Matrix& g : grads_) g.setZero();
}

template <typename T>
std::size_t ParamStore<T>::parameter_count() const {
  std::size_t total = 0;
  for (const Matrix& v : values_) total += static_cast<std::size_t>(v.size());
  return total;
}

template <typename T>
std::size_t ParamStore<T>::parameter_count(const std::string& prefix) const {
  std::size_t total = 0;
  for (std::size_t i = 0; i < size(); ++i) {
    if (specs_[i].name.starts_with(prefix)) total += static_cast<std::size_t>(values_[i].size());
  }
  return total;
}

template class ParamStore<float>;
template class ParamStore<double>;

template <typename T>
ParamStore<T> init_params(const std::vector<ParamSpec>& specs, std::uint64_t seed) {
  ParamStore<T> store(specs);
  for (std::size_t i = 0; i < store.size(); ++i) {
    const ParamSpec& s = store.spec(i);
    auto& value = store.value(i);
    switch (s.init) {
      case ParamInit::zeros:
        value.setZero();
        break;
      case ParamInit::ones:
        value.setOnes();
        break;
      case ParamInit::fan_in_uniform: {
        Rng rng(derive_seed(seed, fnv1a(s.name)));
        const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(1, s.fan_in)));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Eigen::Index r = 0; r < value.rows(); ++r) {
          for (Eigen::Index c = 0; c < value.cols(); ++c) value(r, c) = static_cast<T>(dist(rng));
        }
        break;
      }
    }
  }
  return store;
}

template ParamStore<float> init_params<float>(const std::vector<ParamSpec>&, std::uint64_t);
template ParamStore<double> init_params<double>(const std::vector<ParamSpec>&, std::uint64_t);

void save_checkpoint(const fs::path& path, const ParamStore<float>& params,
                     std::uint64_t config_digest) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  os.write(kCheckpointMagic, 4);
  binary::put<std::uint32_t>(os, kCheckpointVersion);
  binary::put<std::uint64_t>(os, config_digest);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamSpec& s = params.spec(i);
    binary::put<std::uint32_t>(os, static_cast<std::uint32_t>(s.name.size()));
    os.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
    binary::put<std::uint32_t>(os, static_cast<std::uint32_t>(s.shape.size()));
    for (Eigen::Index dim : s.shape) binary::put<std::uint32_t>(os, static_cast<std::uint32_t>(dim));
    const auto& v = params.value(i);
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      for (Eigen::Index c = 0; c < v.cols(); ++c) binary::put_f32(os, v(r, c));
    }
  }
  if (!os) fail(ErrorCode::io, "write failed for '" + path.string() + "'");
}

namespace {

std::uint64_t read_header(std::istream& is, const fs::path& path) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    fail(ErrorCode::format, "'" + path.string() + "' is not an SFNC checkpoint");
  }
  const auto version = binary::get<std::uint32_t>(is, "checkpoint header");
  if (version != kCheckpointVersion) {
    fail(ErrorCode::format, "unsupported checkpoint version " + std::to_string(version));
  }
  return binary::get<std::uint64_t>(is, "checkpoint header");
}

}  // namespace

std::uint64_t read_checkpoint_digest(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  return read_header(is, path);
}

ParamStore<float> load_checkpoint(const fs::path& path, const std::vector<ParamSpec>& specs,
                                  std::uint64_t config_digest) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  const std::uint64_t digest = read_header(is, path);
  if (digest != config_digest) {
    fail(ErrorCode::format, "checkpoint '" + path.string() +
                                "' was written for a different model configuration");
  }
  ParamStore<float> store(specs);
  std::vector<bool> seen(store.size(), false);
  while (is.peek() != std::char_traits<char>::eof()) {
    const auto name_length = binary::get<std::uint32_t>(is, "record name");
    std::string name(name_length, '\0');
    if (!is.read(name.data(), name_length)) fail(ErrorCode::format, "truncated record name");
    const auto rank = binary::get<std::uint32_t>(is, "record rank");
    std::vector<Eigen::Index> shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(binary::get<std::uint32_t>(is, "record dims"));
    if (!store.contains(name)) fail(ErrorCode::format, "unexpected parameter '" + name + "'");
    const std::size_t i = store.index(name);
    if (shape != store.spec(i).shape) {
      fail(ErrorCode::format, "shape mismatch for parameter '" + name + "'");
    }
    auto& v = store.value(i);
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      for (Eigen::Index c = 0; c < v.cols(); ++c) v(r, c) = binary::get_f32(is, "payload of '" + name + "'");
    }
    seen[i] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) fail(ErrorCode::format, "checkpoint lacks parameter '" + store.spec(i).name + "'");
  }
  return store;
}

}  // namespace sfn
