// Brute-force BLEU and exhaustive bootstrap used as test oracles. Inputs are
// lowercase, punctuation-free and space-separated, so the evaluation
// tokenization is the identity on them.

#ifndef DICTATTACH_TESTS_BLEU_ORACLE_H_
#define DICTATTACH_TESTS_BLEU_ORACLE_H_

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace dictattach::testing {

inline std::vector<std::string> Words(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

struct OracleCounts {
  double matches[4] = {0, 0, 0, 0};
  double totals[4] = {0, 0, 0, 0};
  double hyp_len = 0;
  double ref_len = 0;
};

inline void OracleAdd(const std::string& hyp, const std::string& ref, OracleCounts* c) {
  const auto h = Words(hyp);
  const auto r = Words(ref);
  c->hyp_len += h.size();
  c->ref_len += r.size();
  for (size_t n = 1; n <= 4; ++n) {
    std::map<std::string, int> hc, rc;
    for (size_t i = 0; i + n <= h.size(); ++i) {
      std::string key;
      for (size_t j = 0; j < n; ++j) key += h[i + j] + "\x01";
      ++hc[key];
    }
    for (size_t i = 0; i + n <= r.size(); ++i) {
      std::string key;
      for (size_t j = 0; j < n; ++j) key += r[i + j] + "\x01";
      ++rc[key];
    }
    for (const auto& [key, count] : hc) {
      c->totals[n - 1] += count;
      const auto it = rc.find(key);
      if (it != rc.end()) c->matches[n - 1] += std::min(count, it->second);
    }
  }
}

inline double OracleBleu(const OracleCounts& c) {
  double log_sum = 0;
  for (int n = 0; n < 4; ++n) {
    if (c.totals[n] == 0 || c.matches[n] == 0) return 0.0;
    log_sum += std::log(c.matches[n] / c.totals[n]);
  }
  const double bp = c.hyp_len >= c.ref_len ? 1.0 : std::exp(1.0 - c.ref_len / c.hyp_len);
  return 100.0 * bp * std::exp(log_sum / 4);
}

inline double OracleCorpusBleu(const std::vector<std::string>& hyps,
                               const std::vector<std::string>& refs) {
  OracleCounts c;
  for (size_t i = 0; i < hyps.size(); ++i) OracleAdd(hyps[i], refs[i], &c);
  return OracleBleu(c);
}

// Exact bootstrap p-value: every index tuple of length n is enumerated once,
// which weights each multiset of sentences by its multiplicity.
inline double ExhaustiveBootstrapP(const std::vector<std::string>& a,
                                   const std::vector<std::string>& b,
                                   const std::vector<std::string>& refs) {
  const double full_a = OracleCorpusBleu(a, refs);
  const double full_b = OracleCorpusBleu(b, refs);
  if (full_a == full_b) return 1.0;
  const size_t n = refs.size();
  std::vector<size_t> idx(n, 0);
  size_t total = 0, lower_wins = 0;
  while (true) {
    std::vector<std::string> sa, sb, sr;
    for (size_t i : idx) {
      sa.push_back(a[i]);
      sb.push_back(b[i]);
      sr.push_back(refs[i]);
    }
    const double x = OracleCorpusBleu(sa, sr);
    const double y = OracleCorpusBleu(sb, sr);
    ++total;
    if (full_a > full_b ? y >= x : x >= y) ++lower_wins;
    size_t k = 0;
    while (k < n && ++idx[k] == n) idx[k++] = 0;
    if (k == n) break;
  }
  return static_cast<double>(lower_wins) / static_cast<double>(total);
}

// Twenty small hypothesis/reference pairs covering exact matches, clipping,
// reordering, short and long hypotheses.
inline std::vector<std::pair<std::string, std::string>> HandCheckablePairs() {
  return {
      {"the cat sat on the mat", "the cat sat on the mat"},
      {"the the the the", "the cat sat"},
      {"a cat sat on a mat", "the cat sat on the mat"},
      {"on the mat the cat sat", "the cat sat on the mat"},
      {"the cat", "the cat sat on the mat"},
      {"the cat sat on the mat today in the sun", "the cat sat on the mat"},
      {"everyone knows that the dead sea is dying", "everyone knows the dead sea is dying"},
      {"my brother heard that we made gunpowder", "well my brother heard that we had made gunpowder"},
      {"it is a guide to action", "it is a guide to action that ensures that the military"},
      {"the party commands", "it is the guiding principle which guarantees the party commands"},
      {"there is a cat on the mat", "the cat is on the mat"},
      {"black cat black cat black cat", "the black cat"},
      {"one two three four five", "one two three four five"},
      {"five four three two one", "one two three four five"},
      {"one two three four six", "one two three four five"},
      {"we looked at each other", "we looked at each other for a while"},
      {"symmetry breaking", "the symmetry is broken"},
      {"i do not know", "i do not know"},
      {"unk unk unk", "the dead sea"},
      {"he said that he would come", "he said he would come tomorrow"},
  };
}

}  // namespace dictattach::testing

#endif  // DICTATTACH_TESTS_BLEU_ORACLE_H_
