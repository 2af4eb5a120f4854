#pragma once

// Resonances of the dispersion law j -> sqrt|j|: signed tuples (j_i, s_i)
// with sum s_i j_i = 0 and sum s_i sqrt|j_i| = 0, decided in integer
// arithmetic. Writing sqrt|j| = a sqrt(d) with d square-free, the square
// roots of distinct square-free d are linearly independent over Q, so the
// frequency sum vanishes iff the signed coefficients cancel kernel by kernel.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "qpww/error.hpp"
#include "qpww/normalform.hpp"
#include "qpww/sites.hpp"

namespace qpww::resonance {

/// sqrt(n) = coefficient * sqrt(kernel), kernel square-free.
struct SquareFree {
  long coefficient;
  long kernel;
};

inline SquareFree square_free(long n) {
  if (n <= 0) throw InvalidArgument("square_free: argument must be positive");
  long a = 1, d = 1;
  for (long p = 2; p * p <= n; ++p) {
    int e = 0;
    while (n % p == 0) {
      n /= p;
      ++e;
    }
    for (int i = 0; i < e / 2; ++i) a *= p;
    if (e % 2) d *= p;
  }
  return {a, d * n};
}

/// Exact test of sum_i l_i sqrt|j_i| = 0.
inline bool sqrt_combination_is_zero(std::span<const long> js, std::span<const long> ls) {
  if (js.size() != ls.size()) throw InvalidArgument("sqrt_combination_is_zero: length mismatch");
  std::map<long, long long> by_kernel;
  for (std::size_t i = 0; i < js.size(); ++i) {
    if (js[i] == 0) throw InvalidArgument("sqrt_combination_is_zero: site 0 is not allowed");
    const auto sf = square_free(std::labs(js[i]));
    by_kernel[sf.kernel] += static_cast<long long>(ls[i]) * sf.coefficient;
  }
  return std::all_of(by_kernel.begin(), by_kernel.end(), [](const auto& kv) { return kv.second == 0; });
}

/// Signed tuple ((j_1..j_n), (s_1..s_n)); sites nonzero, signs +-1.
class ResonanceTuple {
 public:
  ResonanceTuple(std::vector<long> sites, std::vector<int> signs)
      : sites_(std::move(sites)), signs_(std::move(signs)) {
    if (sites_.size() != signs_.size()) throw InvalidArgument("ResonanceTuple: sites/signs length mismatch");
    for (long j : sites_)
      if (j == 0) throw InvalidArgument("ResonanceTuple: site 0 is not allowed");
    for (int s : signs_)
      if (s != 1 && s != -1) throw InvalidArgument("ResonanceTuple: signs must be +1 or -1");
  }

  std::size_t order() const { return sites_.size(); }
  std::span<const long> sites() const { return sites_; }
  std::span<const int> signs() const { return signs_; }

  bool momentum_holds() const {
    long long m = 0;
    for (std::size_t i = 0; i < sites_.size(); ++i) m += static_cast<long long>(signs_[i]) * sites_[i];
    return m == 0;
  }
  bool frequency_holds() const {
    std::vector<long> ls(signs_.begin(), signs_.end());
    return sqrt_combination_is_zero(sites_, ls);
  }
  bool is_resonant() const { return momentum_holds() && frequency_holds(); }

  /// Sorted by (site, sign descending), with the global sign flip chosen to
  /// give the lexicographically smallest form; its first sign is +.
  ResonanceTuple canonical() const {
    auto form = [&](int flip) {
      std::vector<std::pair<long, int>> p;
      for (std::size_t i = 0; i < sites_.size(); ++i) p.emplace_back(sites_[i], -flip * signs_[i]);
      std::sort(p.begin(), p.end());
      return p;
    };
    const auto a = form(1), b = form(-1);
    const auto& best = std::min(a, b);
    std::vector<long> s;
    std::vector<int> g;
    for (const auto& [j, ns] : best) {
      s.push_back(j);
      g.push_back(-ns);
    }
    return {std::move(s), std::move(g)};
  }

  friend bool operator==(const ResonanceTuple& x, const ResonanceTuple& y) {
    return x.sites_ == y.sites_ && x.signs_ == y.signs_;
  }
  friend bool operator<(const ResonanceTuple& x, const ResonanceTuple& y) {
    return std::tie(x.sites_, x.signs_) < std::tie(y.sites_, y.signs_);
  }

 private:
  std::vector<long> sites_;
  std::vector<int> signs_;
};

/// Even order and, for every site value, as many + as - entries.
inline bool is_trivial(const ResonanceTuple& t) {
  if (t.order() % 2) return false;
  std::map<long, int> balance;
  for (std::size_t i = 0; i < t.order(); ++i) balance[t.sites()[i]] += t.signs()[i];
  return std::all_of(balance.begin(), balance.end(), [](const auto& kv) { return kv.second == 0; });
}

/// (-lb^2, l(b+1)^2, l(b^2+b+1)^2, l b^2 (b+1)^2) with signs (+,-,+,-).
inline ResonanceTuple benjamin_feir(long lambda, long b) {
  if (lambda == 0) throw InvalidArgument("benjamin_feir: lambda must be nonzero");
  if (b < 1) throw InvalidArgument("benjamin_feir: b must be >= 1");
  const long c = b * b + b + 1;
  ResonanceTuple t({-lambda * b * b, lambda * (b + 1) * (b + 1), lambda * c * c, lambda * b * b * (b + 1) * (b + 1)},
                   {1, -1, 1, -1});
  if (!t.is_resonant()) throw Error("benjamin_feir: family member failed the resonance identities");
  return t;
}

/// (lambda, b) with canonical(benjamin_feir(lambda, b)) == canonical(t), if any.
inline std::optional<std::pair<long, long>> benjamin_feir_parameters(const ResonanceTuple& t) {
  if (t.order() != 4) return std::nullopt;
  long bound = 0;
  for (long j : t.sites()) bound = std::max(bound, std::labs(j));
  const ResonanceTuple target = t.canonical();
  for (long lam = 1; lam <= bound; ++lam) {
    for (long b = 1; lam * b * b * (b + 1) * (b + 1) <= bound; ++b) {
      for (long sl : {lam, -lam})
        if (benjamin_feir(sl, b).canonical() == target) return std::make_pair(sl, b);
    }
  }
  return std::nullopt;
}

struct EnumerateOptions {
  bool include_trivial = true;
  /// Guard on the output size; exceeding it is a bound error.
  std::size_t max_results = 10'000'000;
  int workers = 1;
};

class BoundExceeded : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

namespace detail {

struct Alphabet {
  // Element e is (site[e], sign[e]); ordered by site, then sign.
  std::vector<long> site, kernel;
  std::vector<int> sign;
  std::vector<long> coef;
  std::map<long, std::vector<std::size_t>> by_kernel;
  long bound;

  explicit Alphabet(long n) : bound(n) {
    for (long j = -n; j <= n; ++j) {
      if (j == 0) continue;
      const auto sf = square_free(std::labs(j));
      for (int s : {-1, 1}) {
        by_kernel[sf.kernel].push_back(site.size());
        site.push_back(j);
        sign.push_back(s);
        kernel.push_back(sf.kernel);
        coef.push_back(sf.coefficient);
      }
    }
  }
  std::size_t size() const { return site.size(); }
};

struct Residual {
  std::array<std::pair<long, long long>, 6> k{};
  int used = 0;

  void add(long kernel, long long c) {
    for (int i = 0; i < used; ++i)
      if (k[i].first == kernel) {
        k[i].second += c;
        return;
      }
    k[used++] = {kernel, c};
  }
  int nonzero() const {
    int r = 0;
    for (int i = 0; i < used; ++i) r += k[i].second != 0;
    return r;
  }
};

class Search {
 public:
  Search(const Alphabet& a, int n, std::size_t limit) : a_(a), n_(n), limit_(limit) {}

  void run_from(std::size_t first) {
    Residual r;
    push(first, r, 0);
  }
  std::vector<ResonanceTuple>& results() { return out_; }

 private:
  void push(std::size_t e, Residual r, long long momentum) {
    chosen_.push_back(e);
    r.add(a_.kernel[e], static_cast<long long>(a_.sign[e]) * a_.coef[e]);
    momentum += static_cast<long long>(a_.sign[e]) * a_.site[e];
    const int remaining = n_ - static_cast<int>(chosen_.size());
    const int nz = r.nonzero();
    if (nz <= remaining) extend(e, r, momentum, remaining, nz);
    chosen_.pop_back();
  }

  void extend(std::size_t last, const Residual& r, long long momentum, int remaining, int nz) {
    if (remaining == 0) {
      if (momentum == 0) emit({});
      return;
    }
    if (remaining == 1 && nz == 0) return;
    if (remaining == nz) {
      forced(r, momentum);
      return;
    }
    if (remaining == nz + 1 && nz > 0) {
      // A fresh kernel would leave too many residuals: stay within the open ones.
      for (int i = 0; i < r.used; ++i) {
        if (r.k[i].second == 0) continue;
        const auto& list = a_.by_kernel.at(r.k[i].first);
        for (auto it = std::lower_bound(list.begin(), list.end(), last); it != list.end(); ++it)
          push(*it, r, momentum);
      }
      return;
    }
    for (std::size_t e = last; e < a_.size(); ++e) push(e, r, momentum);
  }

  // One element per open kernel: s a = -residual fixes sign and coefficient.
  void forced(const Residual& r, long long momentum) {
    std::vector<std::pair<long, int>> need;  // (|j| magnitude, sign)
    for (int i = 0; i < r.used; ++i) {
      const long long c = r.k[i].second;
      if (c == 0) continue;
      const long long a = std::llabs(c);
      const long long mag = static_cast<long long>(r.k[i].first) * a * a;
      if (mag > a_.bound) return;
      need.emplace_back(static_cast<long>(mag), c > 0 ? -1 : 1);
    }
    const auto m = need.size();
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
      long long mom = momentum;
      std::vector<std::pair<long, int>> extra;
      for (std::size_t i = 0; i < m; ++i) {
        const long j = (mask >> i) & 1u ? -need[i].first : need[i].first;
        mom += static_cast<long long>(need[i].second) * j;
        extra.emplace_back(j, need[i].second);
      }
      if (mom == 0) emit(extra);
    }
  }

  void emit(const std::vector<std::pair<long, int>>& extra) {
    std::vector<long> s;
    std::vector<int> g;
    for (auto e : chosen_) {
      s.push_back(a_.site[e]);
      g.push_back(a_.sign[e]);
    }
    for (const auto& [j, sg] : extra) {
      s.push_back(j);
      g.push_back(sg);
    }
    out_.push_back(ResonanceTuple(std::move(s), std::move(g)).canonical());
    if (out_.size() > 4 * limit_)
      throw BoundExceeded("enumerate_resonances: result count exceeds max_results");
  }

  const Alphabet& a_;
  int n_;
  std::size_t limit_;
  std::vector<std::size_t> chosen_;
  std::vector<ResonanceTuple> out_;
};

}  // namespace detail

/// All resonant n-tuples with 0 < |j_i| <= bound, in canonical form, sorted,
/// deduplicated under permutations and the global sign flip.
inline std::vector<ResonanceTuple> enumerate_resonances(int n, long bound, const EnumerateOptions& opt = {}) {
  if (n < 3 || n > 6) throw InvalidArgument("enumerate_resonances: order must be in 3..6");
  if (bound < 1) throw InvalidArgument("enumerate_resonances: bound must be >= 1");
  if (bound > 5000) throw BoundExceeded("enumerate_resonances: bound above 5000");
  const detail::Alphabet alpha(bound);
  const int workers = std::max(1, opt.workers);
  std::vector<std::vector<ResonanceTuple>> parts(static_cast<std::size_t>(workers));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  auto work = [&](int w) {
    try {
      detail::Search search(alpha, n, opt.max_results);
      for (std::size_t e = static_cast<std::size_t>(w); e < alpha.size(); e += static_cast<std::size_t>(workers))
        search.run_from(e);
      auto& res = search.results();
      std::sort(res.begin(), res.end());
      res.erase(std::unique(res.begin(), res.end()), res.end());
      parts[static_cast<std::size_t>(w)] = std::move(res);
    } catch (...) {
      errors[static_cast<std::size_t>(w)] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<ResonanceTuple> all;
  for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  if (!opt.include_trivial)
    all.erase(std::remove_if(all.begin(), all.end(), [](const auto& t) { return is_trivial(t); }), all.end());
  if (all.size() > opt.max_results)
    throw BoundExceeded("enumerate_resonances: result count exceeds max_results");
  return all;
}

// ---------------------------------------------------------------------------
// Generic tangential sets.

class SearchExhausted : public Error {
 public:
  using Error::Error;
};

struct SiteCertificate {
  /// One line per candidate examined, with the reason for rejection.
  std::vector<std::string> checks;
  /// Number of integer vectors l tested for omega_bar . l = 0.
  long long lattice_points = 0;
  double twist_determinant = 0.0;
};

struct SiteSearchResult {
  TangentialSet sites;
  SiteCertificate certificate;
};

namespace detail {

// Smallest-box search for l != 0 supported on one kernel class with
// sum l_i a_i = 0 and |l|_inf <= L; classes of distinct kernels are
// independent over Q, so this decides omega_bar . l = 0 on the whole box.
inline std::optional<std::vector<long>> kernel_relation(std::span<const long> sites, long L,
                                                        long long& tested) {
  std::map<long, std::vector<std::size_t>> cls;
  std::vector<long> coef(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const auto sf = square_free(std::labs(sites[i]));
    cls[sf.kernel].push_back(i);
    coef[i] = sf.coefficient;
  }
  for (const auto& [k, idx] : cls) {
    if (idx.size() < 2) continue;
    std::vector<long> l(idx.size(), -L);
    while (true) {
      ++tested;
      long long s = 0;
      bool nonzero = false;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        s += static_cast<long long>(l[i]) * coef[idx[i]];
        nonzero = nonzero || l[i] != 0;
      }
      if (nonzero && s == 0) {
        std::vector<long> full(sites.size(), 0);
        for (std::size_t i = 0; i < idx.size(); ++i) full[idx[i]] = l[i];
        return full;
      }
      std::size_t p = 0;
      while (p < l.size() && l[p] == L) l[p++] = -L;
      if (p == l.size()) break;
      ++l[p];
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// First set (in order of increasing |j|, then j) of nu sites from
/// [lo, hi] \ {0} with omega_bar . l != 0 for 0 < |l|_inf <= L and a
/// nonsingular twist matrix.
inline SiteSearchResult generic_sites_search(int nu, long lo, long hi, long L) {
  if (nu < 1) throw InvalidArgument("generic_sites_search: nu must be >= 1");
  if (lo > hi) throw InvalidArgument("generic_sites_search: empty site range");
  if (L < 1) throw InvalidArgument("generic_sites_search: L must be >= 1");
  std::vector<long> pool;
  for (long j = lo; j <= hi; ++j)
    if (j != 0) pool.push_back(j);
  std::sort(pool.begin(), pool.end(), [](long a, long b) {
    return std::make_pair(std::labs(a), a) < std::make_pair(std::labs(b), b);
  });
  SiteCertificate cert;
  if (static_cast<long>(pool.size()) < nu) throw SearchExhausted("generic_sites_search: range smaller than nu");
  std::vector<std::size_t> pick(static_cast<std::size_t>(nu));
  for (int i = 0; i < nu; ++i) pick[i] = static_cast<std::size_t>(i);
  auto label = [](const std::vector<long>& s) {
    std::string out = "{";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "}";
  };
  while (true) {
    std::vector<long> cand;
    for (auto p : pick) cand.push_back(pool[p]);
    bool opposite = false;
    for (std::size_t a = 0; a < cand.size(); ++a)
      for (std::size_t b = 0; b < a; ++b) opposite = opposite || cand[a] == -cand[b];
    if (opposite) {
      cert.checks.push_back(label(cand) + ": rejected, contains j and -j");
    } else if (auto rel = detail::kernel_relation(cand, L, cert.lattice_points)) {
      cert.checks.push_back(label(cand) + ": rejected, omega_bar . l = 0 at l = " + label(*rel));
    } else {
      const TangentialSet s(cand);
      const auto t = normalform::twist_matrix(s);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(t.a);
      lu.setThreshold(1e-12);
      if (lu.rank() < nu) {
        cert.checks.push_back(label(cand) + ": rejected, singular twist matrix");
      } else {
        cert.twist_determinant = t.determinant();
        cert.checks.push_back(label(cand) + ": accepted, no relation with |l|_inf <= " + std::to_string(L) +
                              ", det A = " + std::to_string(cert.twist_determinant));
        return {s, std::move(cert)};
      }
    }
    int i = nu - 1;
    while (i >= 0 && pick[i] == pool.size() - static_cast<std::size_t>(nu - i)) --i;
    if (i < 0) break;
    ++pick[i];
    for (int k = i + 1; k < nu; ++k) pick[k] = pick[k - 1] + 1;
  }
  throw SearchExhausted("generic_sites_search: no admissible site set in range");
}

/// Exact check of one candidate set against the same criteria.
inline std::optional<std::vector<long>> omega_bar_relation(const TangentialSet& s, long L) {
  long long tested = 0;
  return detail::kernel_relation(s.sites(), L, tested);
}

}  // namespace qpww::resonance
