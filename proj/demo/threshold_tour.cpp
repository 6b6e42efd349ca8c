// Prints H_p*, lambda_p and t for a few orders, then sums one monomial series
// above threshold and shows where its mass sits.
#include <fmt/format.h>

#include "hpspin/monomial_partition.hpp"
#include "hpspin/phase_functions.hpp"

int main() {
  using namespace hpspin;
  fmt::print("{:>3} {:>14} {:>14} {:>10} {:>10}\n", "p", "H*", "h_min", "lambda", "t");
  for (int p = 2; p <= 8; ++p) {
    const double h = 1.5 * h_star(p);
    fmt::print("{:>3} {:>14.6f} {:>14.4f} {:>10.6f} {:>10.6f}\n", p, h_star(p), h_min(p), lambda_p(p, h),
               t_magnitude(p, h));
  }
  const std::size_t n = 2000;
  const double h = 1.5 * h_star(3);
  const auto prof = log_partition_series(n, 3, h);
  const auto w = concentration_window(prof);
  fmt::print("\np=3, H=1.5 H*, n={}: (1/n) log Z = {:.6f}, f = {:.6f}\n", n, prof.log_sum / n, f_p(3, h));
  fmt::print("argmax l/n = {:.4f}, lambda = {:.4f}, window mass = {:.4f}\n", w.argmax_fraction, w.lambda_pred,
             w.window_mass);
}
