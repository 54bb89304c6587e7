#pragma once

namespace dmlme {

/// Standard normal quantile Phi^{-1}(p) for p in (0, 1), with
/// normal_quantile(0.5) == 0 exactly. Rational minimax approximation
/// (Wichura's PPND16); absolute error below 1e-15 on (0, 1), far inside
/// the 1e-8 the confidence-interval code requires.
double normal_quantile(double p);

} // namespace dmlme
