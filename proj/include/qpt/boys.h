#pragma once
#include <span>

namespace qpt {

inline constexpr int kBoysMaxOrder = 16;

/// F_m(t) = \int_0^1 u^{2m} exp(-t u^2) du for 0 <= m <= 16, t >= 0.
double boys(int m, double t);

/// Fills out[0..m_max] with F_0(t)..F_{m_max}(t). out.size() must exceed m_max.
void boys_array(int m_max, double t, std::span<double> out);

} // namespace qpt
