#pragma once

// Independent checks of instructive-frame selection, shared by the unit and
// acceptance tests. Each returns an empty string on success, otherwise a
// description of the first violation.

#include <algorithm>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "generators.hpp"
#include "sfn/sampling.hpp"

namespace oracle {

using sfn::Index;

inline sfn::ConfidenceMap random_confidence(gen::Source& s, Index length, bool ties) {
  sfn::ConfidenceMap c;
  for (Index i = 0; i < length; ++i) {
    c.values.push_back(ties ? static_cast<double>(s.integer(0, 3)) : s.real(-2.0, 2.0));
    c.mask.push_back(!s.coin(0.2));
  }
  if (sfn::count_valid(c.mask) == 0) c.mask[0] = true;
  return c;
}

inline std::vector<Index> valid_positions(const sfn::ConfidenceMap& c) {
  std::vector<Index> v;
  for (std::size_t i = 0; i < c.mask.size(); ++i)
    if (c.mask[i]) v.push_back(static_cast<Index>(i));
  return v;
}

/// The picked set is a best-scoring subset, and among equal scores the
/// lower positions win.
inline std::string top_nc_optimal(const sfn::ConfidenceMap& c, const std::vector<Index>& picked, int n) {
  if (static_cast<int>(picked.size()) != n) return "wrong size";
  if (!std::is_sorted(picked.begin(), picked.end())) return "not sorted";
  const std::set<Index> chosen(picked.begin(), picked.end());
  if (static_cast<int>(chosen.size()) != n) return "duplicates";
  for (Index p : picked)
    if (!c.mask[p]) return "picked a padded frame";
  for (Index u : valid_positions(c)) {
    if (chosen.count(u)) continue;
    for (Index p : picked) {
      if (c.values[u] > c.values[p]) return "unpicked frame scores higher";
      if (c.values[u] == c.values[p] && u < p) return "tie not broken toward the lower index";
    }
  }
  return {};
}

inline std::string uniform_formula(const sfn::ConfidenceMap& c, const std::vector<Index>& picked, int n) {
  const auto valid = valid_positions(c);
  const auto L = static_cast<Index>(valid.size());
  if (static_cast<int>(picked.size()) != n) return "wrong size";
  for (int k = 0; k < n; ++k) {
    if (picked[k] != valid[static_cast<std::size_t>((k * L) / n)]) return "index " + std::to_string(k);
  }
  return {};
}

/// Permuting the scores permutes the selection (distinct scores, no padding).
inline std::string permutation_equivariant(gen::Source& s, Index length, int n) {
  sfn::ConfidenceMap c;
  for (Index i = 0; i < length; ++i) {
    c.values.push_back(s.real(-1.0, 1.0) + 1e-9 * static_cast<double>(i));
    c.mask.push_back(true);
  }
  std::vector<Index> perm(static_cast<std::size_t>(length));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), s.rng);
  sfn::ConfidenceMap moved = c;
  for (Index i = 0; i < length; ++i) moved.values[perm[i]] = c.values[i];

  const auto a = sfn::sample_instructive(c, sfn::SamplingStrategy::top_nc, n, 0);
  const auto b = sfn::sample_instructive(moved, sfn::SamplingStrategy::top_nc, n, 0);
  std::vector<Index> mapped;
  for (Index i : a) mapped.push_back(perm[i]);
  std::sort(mapped.begin(), mapped.end());
  return mapped == b ? std::string{} : "selection does not follow the permutation";
}

}  // namespace oracle
