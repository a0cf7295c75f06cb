#include "smoothgev/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "smoothgev/errors.hpp"
#include "smoothgev/parallel.hpp"
#include "smoothgev/rng.hpp"

namespace smoothgev {

double score_se(const GevParams& f, double y) {
  if (f.xi >= 1.0) throw ScoreError("squared error score needs a finite mean (xi < 1)");
  const double d = y - gev_mean_var(f).mean;
  return d * d;
}

double score_ds(const GevParams& f, double y) {
  if (f.xi >= 0.5) throw ScoreError("Dawid-Sebastiani score needs a finite variance (xi < 1/2)");
  const GevMoments m = gev_mean_var(f);
  const double d = y - m.mean;
  return d * d / m.variance + std::log(m.variance);
}

double score_crp(const GevParams& f, double y) {
  validate(f);
  if (f.xi >= 1.0) throw ScoreError("CRPS needs a finite mean (xi < 1)");
  if (!std::isfinite(y)) throw ScoreError("observation must be finite");
  const double F = gev_cdf(f, y);
  const double mu = f.mu, sigma = f.sigma, xi = f.xi;
  if (std::abs(xi) <= kXiEps) {
    const double log2 = std::numbers::ln2;
    // -2 sigma Ei(log F) -> +inf as F -> 1 and -> 0 as F -> 0
    double ei_term;
    if (F <= 0.0)
      ei_term = 0.0;
    else if (F >= 1.0)
      return y - mu - sigma * (kEulerGamma + log2);
    else
      ei_term = boost::math::expint(std::log(F));
    return mu - y + sigma * (kEulerGamma - log2) - 2.0 * sigma * ei_term;
  }
  const double a = 1.0 - xi;
  double lower;  // lower incomplete gamma at -log F
  if (F <= 0.0)
    lower = std::tgamma(a);
  else if (F >= 1.0)
    lower = 0.0;
  else
    lower = boost::math::tgamma_lower(a, -std::log(F));
  const double s = sigma / xi;
  return (mu - y - s) * (1.0 - 2.0 * F) - s * (std::exp2(xi) * std::tgamma(a) - 2.0 * lower);
}

double upper_tail_weight(double p) { return p * p; }

double score_wcrp(const GevParams& f, double y, const QuantileWeight& w, int n) {
  validate(f);
  if (f.xi >= 1.0) throw ScoreError("weighted CRPS needs a finite mean (xi < 1)");
  if (n < 2) throw DomainError("quadrature needs at least 2 nodes");
  double total = 0.0;
  for (int i = 1; i < n; ++i) {
    const double p = static_cast<double>(i) / n;
    const double q = gev_quantile(f, p);
    total += ((y <= q ? 1.0 : 0.0) - p) * (q - y) * w(p);
  }
  return 2.0 * total / n;
}

ScoreSet score_all(const GevParams& f, double y) {
  return {score_se(f, y), score_ds(f, y), score_crp(f, y), score_wcrp(f, y)};
}

std::size_t FoldAssignment::fold_size(int f) const {
  return static_cast<std::size_t>(std::count(fold.begin(), fold.end(), f));
}

FoldAssignment make_folds(const GriddedDataset& data, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("cross-validation needs at least 2 folds");
  FoldAssignment out;
  out.k = k;
  out.seed = seed;
  for (std::size_t i = 0; i < data.n_boxes(); ++i)
    for (std::size_t t = 0; t < data.n_years(); ++t)
      if (!data.missing(i, t)) {
        out.box.push_back(i);
        out.t.push_back(t);
      }
  const std::size_t n = out.box.size();
  if (n < static_cast<std::size_t>(k)) throw ValidationError("fewer observations than folds");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  SplitMix64 rng(substream_seed(seed, 0x464F4C44ULL));
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);
  out.fold.assign(n, 0);
  for (std::size_t pos = 0; pos < n; ++pos) out.fold[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  return out;
}

ExchangeabilityResult exchangeability_test(std::span<const double> a, std::span<const double> b,
                                           std::size_t replicates, std::uint64_t seed, unsigned threads) {
  if (a.size() != b.size()) throw ValidationError("score lists differ in length");
  if (a.empty()) throw ValidationError("score lists are empty");
  if (replicates == 0) throw ValidationError("at least one replicate is required");
  const std::size_t n = a.size();
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  ExchangeabilityResult out;
  out.replicates = replicates;
  out.swapped = mean_a < mean_b;
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = out.swapped ? b[i] - a[i] : a[i] - b[i];
  double sum = 0.0;
  for (double v : d) sum += v;
  out.t_obs = sum / static_cast<double>(n);
  if (out.t_obs <= 0.0) {
    out.t_obs = 0.0;
    out.degenerate = true;
    out.p_value = 1.0;
    out.warning = "observed mean score difference is zero; the test is degenerate and p = 1";
    return out;
  }

  std::vector<unsigned char> exceed(replicates, 0);
  parallel_for(replicates, threads, [&](std::size_t j) {
    SplitMix64 rng(substream_seed(seed, j));
    std::uint64_t bits = 0;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i % 64 == 0) bits = rng();
      s += (bits & 1u) ? d[i] : -d[i];
      bits >>= 1;
    }
    exceed[j] = s / static_cast<double>(n) >= out.t_obs ? 1 : 0;
  });
  std::size_t count = 0;
  for (unsigned char e : exceed) count += e;
  out.p_value = static_cast<double>(count) / static_cast<double>(replicates);
  return out;
}

}  // namespace smoothgev
