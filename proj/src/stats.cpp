#include "elmer/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace elmer::stats {

namespace bm = boost::math;

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0,1)");
    return bm::quantile(bm::normal_distribution<>(), p);
}

double normal_two_sided_p(double z) {
    return std::min(1.0, std::erfc(std::fabs(z) / std::sqrt(2.0)));
}

double chi2_quantile(double prob, int df) {
    if (df < 1) throw std::invalid_argument("chi2_quantile: df must be positive");
    if (!(prob > 0.0 && prob < 1.0)) throw std::invalid_argument("chi2_quantile: prob must be in (0,1)");
    return bm::quantile(bm::chi_squared_distribution<>(df), prob);
}

double chi2_upper_tail(double x, int df) {
    if (df < 1) throw std::invalid_argument("chi2_upper_tail: df must be positive");
    if (!(x > 0.0)) return 1.0;
    if (!std::isfinite(x)) return 0.0;
    return bm::cdf(bm::complement(bm::chi_squared_distribution<>(df), x));
}

}  // namespace elmer::stats
