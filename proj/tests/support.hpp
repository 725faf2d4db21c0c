#pragma once

#include <memory>
#include <string>

#include "conceptprobe/provider.hpp"
#include "conceptprobe/synthetic.hpp"
#include "tempdir.hpp"

namespace testing {

inline cprobe::ConceptSpec demo_spec(std::string name = "Demo") {
  cprobe::ConceptSpec s;
  s.name = std::move(name);
  s.positive_template = "Why is this intense? Text: {input}. Intense because";
  s.negative_template = "Why is this mild? Text: {input}. Mild because";
  s.unified_template = "Is this intense or mild? Text: {input}. It is";
  s.scoring_template = "Score the intensity of {input} from 0 to 100:";
  return s;
}

inline cprobe::ConceptSpec rephrased_spec() {
  cprobe::ConceptSpec s;
  s.name = "Demo";
  s.positive_template = "Intensity shows in strong wording. Passage: {input}. Strong wording:";
  s.negative_template = "Mildness shows in restrained wording. Passage: {input}. Restrained wording:";
  s.unified_template = "Strong or restrained wording? Passage: {input}. The wording is";
  s.scoring_template = "Rate {input} for intensity, 0 to 100:";
  return s;
}

inline std::shared_ptr<cprobe::SyntheticBackend> synthetic(double sigma = 0.1, std::int64_t dim = 64,
                                                           double jitter = 0.5) {
  cprobe::SyntheticOptions o;
  o.sigma = sigma;
  o.hidden_dim = dim;
  o.separation_jitter = jitter;
  return std::make_shared<cprobe::SyntheticBackend>(o);
}

inline std::unique_ptr<cprobe::Provider> provider(std::shared_ptr<cprobe::Backend> backend,
                                                  std::shared_ptr<cprobe::ContentCache> cache = {},
                                                  std::int64_t chunk_limit = 1000) {
  cprobe::ProviderOptions o;
  o.cache = std::move(cache);
  o.chunk_limit = chunk_limit;
  return std::make_unique<cprobe::Provider>(std::move(backend), o);
}

}  // namespace testing

#include "conceptprobe/numerics.hpp"
#include "conceptprobe/rng.hpp"
#include "oracles.hpp"

namespace testing {

inline cprobe::Matrix to_eigen(const oracle::Mat& m) {
  cprobe::Matrix out(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(m[0].size()));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m[i][j];
  return out;
}

inline oracle::Mat random_matrix(std::size_t rows, std::size_t cols, cprobe::Rng& rng) {
  oracle::Mat m(rows, std::vector<double>(cols));
  for (auto& r : m)
    for (auto& x : r) x = rng.normal();
  return m;
}

// Largest |dot| against the oracle's leading eigenvector, so sign is ignored.
inline double max_abs_diff_up_to_sign(const cprobe::Vector& v, const std::vector<double>& w) {
  double plus = 0.0, minus = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    plus = std::max(plus, std::abs(v(static_cast<Eigen::Index>(i)) - w[i]));
    minus = std::max(minus, std::abs(v(static_cast<Eigen::Index>(i)) + w[i]));
  }
  return std::min(plus, minus);
}

inline std::vector<double> column(const oracle::Mat& m, std::size_t j) {
  std::vector<double> c;
  for (const auto& r : m) c.push_back(r[j]);
  return c;
}

}  // namespace testing
