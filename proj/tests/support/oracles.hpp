#pragma once

// Deliberately naive reference implementations used to cross-check the
// library: nested-loop n-gram counting, a full LCS table, and set-based
// unigram overlap.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace oracles {

using Tokens = std::vector<std::string>;

inline bool same_gram(const Tokens& a, std::size_t i, const Tokens& b, std::size_t j, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    if (a[i + k] != b[j + k]) return false;
  }
  return true;
}

// Occurrences of a[i..i+n) inside seq.
inline long long occurrences(const Tokens& a, std::size_t i, const Tokens& seq, std::size_t n) {
  long long c = 0;
  for (std::size_t j = 0; j + n <= seq.size(); ++j) c += same_gram(a, i, seq, j, n);
  return c;
}

// Sentence BLEU with clipped counts over orders 1..min(max_n, |cand|).
// epsilon > 0 replaces zero-match precisions by epsilon / total.
inline double bleu(const Tokens& cand, const Tokens& ref, int max_n, double epsilon) {
  if (cand.empty()) return 0.0;
  double log_sum = 0.0;
  int orders = 0;
  for (int n = 1; n <= max_n && static_cast<std::size_t>(n) <= cand.size(); ++n, ++orders) {
    const auto un = static_cast<std::size_t>(n);
    long long total = 0;
    long long matched = 0;
    for (std::size_t i = 0; i + un <= cand.size(); ++i) {
      ++total;
      // Count each distinct gram once, at its first position.
      bool seen_before = false;
      for (std::size_t p = 0; p < i; ++p) {
        if (same_gram(cand, p, cand, i, un)) seen_before = true;
      }
      if (seen_before) continue;
      matched += std::min(occurrences(cand, i, cand, un), occurrences(cand, i, ref, un));
    }
    double p;
    if (matched > 0) p = static_cast<double>(matched) / static_cast<double>(total);
    else if (epsilon > 0) p = epsilon / static_cast<double>(std::max<long long>(total, 1));
    else return 0.0;
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(cand.size());
  const double r = static_cast<double>(ref.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return std::min(1.0, bp * std::exp(log_sum / orders));
}

// Full (m+1) x (n+1) table.
inline std::size_t lcs(const Tokens& a, const Tokens& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1]) t[i][j] = t[i - 1][j - 1] + 1;
      else t[i][j] = std::max(t[i - 1][j], t[i][j - 1]);
    }
  }
  return t[a.size()][b.size()];
}

struct Overlap {
  double precision = 0.0;
  double recall = 0.0;
};

// Fraction of candidate tokens present in the reference, and vice versa.
inline Overlap unigram_overlap(const Tokens& cand, const Tokens& ref) {
  auto fraction_in = [](const Tokens& xs, const Tokens& pool) {
    std::size_t hit = 0;
    for (const auto& x : xs) hit += std::find(pool.begin(), pool.end(), x) != pool.end();
    return static_cast<double>(hit) / static_cast<double>(xs.size());
  };
  return {fraction_in(cand, ref), fraction_in(ref, cand)};
}

inline Tokens random_tokens(std::mt19937& rng, std::size_t min_len, std::size_t max_len, int alphabet) {
  const auto len = min_len + rng() % (max_len - min_len + 1);
  Tokens t;
  for (std::size_t i = 0; i < len; ++i) t.push_back(std::string(1, static_cast<char>('a' + rng() % alphabet)));
  return t;
}

}  // namespace oracles
