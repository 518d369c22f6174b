// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference oracles and fixtures shared by the unit tests and the acceptance
// binary. Nothing here calls into the code under test for the value it checks.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "renuance/autodiff.h"

namespace renuance::testing {

// Removes the directory on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("renuance_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

// Worst per-parameter relative error ||analytic - numeric|| / max(||analytic||, ||numeric||, floor)
// using central differences. `loss` records a scalar on the given tape.
inline double gradient_check(const std::vector<ad::Parameter*>& params, const std::function<ad::Var(ad::Tape&)>& loss,
                             double h = 1e-5, double floor = 1e-7) {
  for (auto* p : params) p->zero_grad();
  {
    ad::Tape tape;
    ad::Var l = loss(tape);
    tape.backward(l);
    tape.accumulate_param_grads();
  }
  double worst = 0.0;
  for (auto* p : params) {
    Matrix numeric = Matrix::Zero(p->value.rows(), p->value.cols());
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double keep = x;
      x = keep + h;
      double up;
      {
        ad::Tape t(false);
        up = loss(t).scalar();
      }
      x = keep - h;
      double down;
      {
        ad::Tape t(false);
        down = loss(t).scalar();
      }
      x = keep;
      numeric.data()[i] = (up - down) / (2.0 * h);
    }
    const double scale = std::max({p->grad.norm(), numeric.norm(), floor});
    worst = std::max(worst, (p->grad - numeric).norm() / scale);
  }
  return worst;
}

// Output length of one strided convolution: floor((L + 2p - k) / s) + 1.
inline int conv_out_len(int len, int kernel, int stride, int padding) {
  const int span = len + 2 * padding - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

// Exact two-sided signed-rank p by enumerating all 2^n sign patterns.
struct EnumeratedWilcoxon {
  int n_effective = 0;
  double w_plus = 0.0;
  double p = 1.0;
};

inline EnumeratedWilcoxon enumerate_wilcoxon(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  }
  EnumeratedWilcoxon out;
  out.n_effective = static_cast<int>(d.size());
  if (d.empty()) return out;
  const int n = out.n_effective;
  // Doubled midranks: 2 * (#smaller) + (#equal) + 1.
  std::vector<long> rank2(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    long smaller = 0, equal = 0;
    for (double x : d) {
      if (std::fabs(x) < std::fabs(d[i])) ++smaller;
      if (std::fabs(x) == std::fabs(d[i])) ++equal;
    }
    rank2[i] = 2 * smaller + equal + 1;
  }
  long observed = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > 0) observed += rank2[i];
  }
  out.w_plus = observed / 2.0;
  std::uint64_t le = 0, ge = 0;
  const std::uint64_t patterns = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < patterns; ++mask) {
    long w = 0;
    for (int i = 0; i < n; ++i) {
      if (mask >> i & 1U) w += rank2[static_cast<std::size_t>(i)];
    }
    le += w <= observed;
    ge += w >= observed;
  }
  const double all = static_cast<double>(patterns);
  out.p = std::min(1.0, 2.0 * std::min(le / all, ge / all));
  return out;
}

// Ordinal 0..2 scores with exactly `n_nonzero` differing pairs out of `n`.
inline void ordinal_pairs(std::mt19937_64& rng, int n, int n_nonzero, std::vector<double>& a, std::vector<double>& b) {
  std::uniform_int_distribution<int> score(0, 2);
  a.assign(static_cast<std::size_t>(n), 0.0);
  b.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    int x = score(rng), y = score(rng);
    if (i < n_nonzero) {
      while (x == y) y = score(rng);
    } else {
      y = x;
    }
    a[static_cast<std::size_t>(i)] = x;
    b[static_cast<std::size_t>(i)] = y;
  }
  std::vector<std::size_t> perm(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> pa(a.size()), pb(b.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    pa[i] = a[perm[i]];
    pb[i] = b[perm[i]];
  }
  a = pa;
  b = pb;
}

}  // namespace renuance::testing
