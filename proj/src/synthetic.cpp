#include <random>
#include <stdexcept>
#include <vector>

#include "bbsgd/data_io.hpp"

namespace bbsgd {

Dataset<double> synthesize_dataset(std::uint64_t seed, Index n, Index d, double noise) {
  if (n < 1 || d < 1) throw std::invalid_argument("synthetic dataset needs n >= 1 and d >= 1");
  if (!(noise >= 0.0 && noise <= 1.0)) throw std::invalid_argument("noise must lie in [0, 1]");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gaussian(0.0, 1.0);
  std::bernoulli_distribution flip(noise);

  Vector<double> w(d);
  for (Index j = 0; j < d; ++j) w[j] = gaussian(rng);

  std::vector<Eigen::Triplet<double, int>> entries;
  entries.reserve(static_cast<std::size_t>(n * d));
  Vector<double> labels(n);
  Vector<double> a(d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) {
      a[j] = gaussian(rng);
      entries.emplace_back(static_cast<int>(i), static_cast<int>(j), a[j]);
    }
    double label = a.dot(w) >= 0.0 ? 1.0 : -1.0;
    if (flip(rng)) label = -label;
    labels[i] = label;
  }
  SparseRows<double> features(n, d);
  features.setFromTriplets(entries.begin(), entries.end());
  return Dataset<double>(std::move(features), std::move(labels));
}

}  // namespace bbsgd
