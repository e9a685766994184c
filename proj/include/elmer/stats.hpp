#pragma once

namespace elmer::stats {

double normal_cdf(double x);
double normal_quantile(double p);
// P(|Z| >= |z|) for standard normal Z.
double normal_two_sided_p(double z);

double chi2_quantile(double prob, int df);
// Upper tail P(X >= x) of chi-square(df); 1 for x <= 0.
double chi2_upper_tail(double x, int df);

}  // namespace elmer::stats
