#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <cmath>
#include <map>
#include <string>

#include <gtest/gtest.h>

#include "skipclip/numerics/gradcheck.hpp"
#include "skipclip/numerics/ops.hpp"
#include "skipclip/numerics/param_set.hpp"
#include "skipclip/numerics/tape.hpp"
#include "skipclip/numerics/tensor.hpp"
#include "skipclip/rng.hpp"
#include "skipclip/videoio/video.hpp"

namespace skipclip::testing {

using numerics::BasicTensor;
using numerics::ParamSet;
using numerics::Shape;
using numerics::Tape;
using numerics::Tensor;
using numerics::Tensor64;
using numerics::Var;

template <typename T = float>
BasicTensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  BasicTensor<T> t(std::move(shape));
  for (T& x : t.data()) x = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

inline videoio::Video random_video(const std::string& id, std::size_t n, std::size_t c, std::size_t h, std::size_t w,
                                   Rng& rng) {
  return videoio::Video{random_tensor<float>({n, c, h, w}, rng, 0.0, 1.0), id, std::nullopt};
}

/// Video whose frame i is filled with the value (i + 1) / (n + 1), so frame
/// provenance can be read back from any pixel.
inline videoio::Video indexed_video(const std::string& id, std::size_t n, std::size_t c, std::size_t h,
                                    std::size_t w) {
  Tensor frames({n, c, h, w});
  const std::size_t per = c * h * w;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < per; ++k) frames[i * per + k] = static_cast<float>(i + 1) / static_cast<float>(n + 1);
  return videoio::Video{std::move(frames), id, std::nullopt};
}

inline std::size_t frame_index_of(float value, std::size_t n) {
  return static_cast<std::size_t>(std::lround(value * static_cast<float>(n + 1))) - 1;
}

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = info ? std::string(info->test_suite_name()) + "_" + info->name() : "skipclip";
    for (char& ch : name)
      if (ch == '/') ch = '_';
    path_ = std::filesystem::temp_directory_path() / ("skipclip_test_" + name);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

/// Builds a taped scalar from named parameter vars; used for finite-difference checks.
using TapedBuild = std::function<Var(Tape<double>&, const std::map<std::string, Var>&)>;

/// Objective = sum(output * fixed random weights) so every output element matters.
inline numerics::CheckedObjective taped_objective(TapedBuild build, std::uint64_t seed,
                                                  double* min_kink = nullptr) {
  return [build = std::move(build), seed, min_kink](const ParamSet<double>& params, ParamSet<double>* grads) {
    Tape<double> tape;
    std::map<std::string, Var> vars;
    for (const auto& e : params.entries()) vars[e.name] = tape.parameter(e.tensor);
    const Var out = build(tape, vars);
    Rng rng = Rng::derive(seed, "probe-weights");
    const Var w = tape.constant(random_tensor<double>(tape.value(out).shape(), rng, 0.5, 1.5));
    const Var loss = numerics::sum(tape, numerics::mul(tape, out, w));
    tape.backward(loss);
    if (min_kink) *min_kink = tape.min_kink_distance();
    if (grads) {
      *grads = params.zeros_like();
      for (auto& e : grads->entries()) e.tensor = tape.grad(vars.at(e.name));
    }
    return tape.value(loss).item();
  };
}

}  // namespace skipclip::testing
